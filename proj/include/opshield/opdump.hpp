// Copyright 2026 The OpShield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "opshield/error.hpp"

namespace opshield {

enum class OperandKind {
  ConstString,
  ConstNumber,
  CompiledVar,
  TempVar,
  Var,
  Name,
  Unused,
};

/// One instruction operand. `raw` is the text as written in the dump, with
/// the quotes (and escapes) of a ConstString removed.
struct Operand {
  OperandKind kind = OperandKind::Unused;
  std::string raw;

  static Operand unused() { return {}; }
  static Operand string(std::string s) { return {OperandKind::ConstString, std::move(s)}; }
  static Operand name(std::string s) { return {OperandKind::Name, std::move(s)}; }

  bool operator==(const Operand&) const = default;
};

struct OpLine {
  std::uint32_t src_line = 1;
  std::uint32_t op_index = 0;
  std::string opcode;
  // Zero to two entries. A single operand is never Unused: the textual form
  // could not tell it apart from "no operands".
  std::vector<Operand> operands;
  std::optional<Operand> result;

  bool operator==(const OpLine&) const = default;
};

struct FunctionUnit {
  std::string name;
  std::vector<OpLine> ops;

  bool operator==(const FunctionUnit&) const = default;
};

inline constexpr std::string_view kMainFunction = "(main)";

struct OpcodeDump {
  int version = 1;
  // "(main)" comes first once parsed or built through the library.
  std::vector<FunctionUnit> functions;

  bool operator==(const OpcodeDump&) const = default;

  std::size_t op_count() const;
};

/// Infers an operand kind from its surface syntax (VLD notation): `!` is a
/// compiled variable, `~` a temporary, `$` a var, quotes a string, a decimal
/// literal a number, anything else a bare name and the empty text Unused.
OperandKind infer_operand_kind(std::string_view token);

bool is_valid_opcode(std::string_view opcode);
bool is_number_literal(std::string_view text);

/// Parses ODUMP v1 text. Throws FormatError on the first violation.
OpcodeDump parse_dump(std::string_view text);

/// Canonical ODUMP v1 text; "(main)" is always emitted first.
std::string serialize_dump(const OpcodeDump& dump);

/// Best-effort import of VLD-style opcode tables. Non-instruction lines are
/// skipped; throws FormatError when no instruction row was recovered.
OpcodeDump import_vld(std::string_view text);

/// Checks the structural invariants; throws FormatError (line 0) if broken.
void validate_dump(const OpcodeDump& dump);

}  // namespace opshield
