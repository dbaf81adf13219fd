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

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "opshield/opdump.hpp"

namespace opshield {

enum class UnknownPolicy { KeepUnknown, DropUnknown };

/// Which instructions survive extraction. An instruction is retained iff its
/// opcode is in `keep`, or it is not in `drop` and the policy keeps unknowns.
struct FilterRules {
  std::set<std::string> keep;
  std::set<std::string> drop;
  UnknownPolicy default_policy = UnknownPolicy::KeepUnknown;

  /// Call, eval and string-assembly opcodes kept; debug padding dropped.
  static FilterRules defaults();
  void validate() const;
  bool retains(std::string_view opcode) const;
};

struct DecodePolicy {
  std::size_t max_depth = 3;
  std::size_t min_b64_len = 8;
  double printable_ratio = 0.9;

  // Normalization constants.
  std::size_t placeholder_len = 64;
  double entropy_high = 5.0;
  double entropy_low = 3.0;

  void validate() const;
};

enum class Encoding { Base64, UrlEncoded, Plain };
enum class Label { Benign = 0, Webshell = 1 };
enum class ExtractMode { ODT, OST };

const char* to_string(Encoding e);
const char* to_string(ExtractMode m);
ExtractMode parse_mode(std::string_view s);

struct TokenSequence {
  std::vector<std::string> tokens;
  std::optional<Label> label;
  std::string source_id;
  ExtractMode mode = ExtractMode::ODT;

  bool operator==(const TokenSequence&) const = default;
};

std::vector<OpLine> filter_ops(const OpcodeDump& dump, const FilterRules& rules);

Encoding detect_encoding(std::string_view s, const DecodePolicy& policy = {});

/// Decodes URL/Base64 layers until the text looks plain or max_depth layers
/// were removed. `steps`, when given, receives the number of layers removed.
std::string decode_operand(std::string_view s, const DecodePolicy& policy = {},
                           std::size_t* steps = nullptr);

/// Token for an operand, or nullopt for Unused. Never returns an empty token.
std::optional<std::string> normalize_operand(const Operand& op, const DecodePolicy& policy = {});

/// Bits per byte. Throws Error{EmptyInput} for "".
double shannon_entropy(std::string_view s);

/// Throws Error{EmptySequence} if the rules remove every instruction.
TokenSequence extract_sequence(const OpcodeDump& dump, const FilterRules& rules,
                               const DecodePolicy& policy, ExtractMode mode);

// RFC 4648 standard alphabet. Returns nullopt on any charset/padding error.
std::optional<std::string> base64_decode(std::string_view s);
std::string base64_encode(std::string_view bytes);
// Percent-decoding only ('+' is left alone).
std::optional<std::string> url_decode(std::string_view s);

// JSON-lines persistence: {"source_id", "label", "mode", "tokens"} per line.
std::string to_jsonl(const TokenSequence& seq);
TokenSequence from_jsonl(std::string_view line);
std::vector<TokenSequence> read_jsonl(std::string_view text);

}  // namespace opshield
