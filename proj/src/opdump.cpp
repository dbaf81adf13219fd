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

#include "opshield/opdump.hpp"

#include <algorithm>
#include <charconv>

namespace opshield {
namespace {

constexpr std::string_view kHeader = "#odump 1";

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::optional<std::uint32_t> parse_u32(std::string_view s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), is_digit)) return std::nullopt;
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

void append_escaped(std::string& out, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\'': out += "\\'"; break;
      default: out += c;
    }
  }
}

void append_operand(std::string& out, const Operand& op) {
  if (op.kind == OperandKind::ConstString) {
    out += '\'';
    append_escaped(out, op.raw);
    out += '\'';
  } else {
    out += op.raw;
  }
}

// Splits an operand field on '|' outside single-quoted strings.
std::vector<std::string_view> split_operands(std::string_view field, std::size_t line_no) {
  std::vector<std::string_view> pieces;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < field.size(); ++i) {
    char c = field[i];
    if (quoted) {
      if (c == '\\') {
        ++i;
      } else if (c == '\'') {
        quoted = false;
      }
    } else if (c == '\'') {
      quoted = true;
    } else if (c == '|') {
      pieces.push_back(field.substr(start, i - start));
      start = i + 1;
    }
  }
  if (quoted) throw FormatError(line_no, "unterminated string operand");
  pieces.push_back(field.substr(start));
  return pieces;
}

Operand parse_operand(std::string_view token, std::size_t line_no) {
  if (token.empty()) return Operand::unused();
  if (token.front() == '\'') {
    if (token.size() < 2 || token.back() != '\'') {
      throw FormatError(line_no, "malformed string operand");
    }
    std::string raw;
    std::string_view body = token.substr(1, token.size() - 2);
    for (std::size_t i = 0; i < body.size(); ++i) {
      char c = body[i];
      if (c == '\'') throw FormatError(line_no, "unescaped quote in string operand");
      if (c != '\\') {
        raw += c;
        continue;
      }
      if (++i == body.size()) throw FormatError(line_no, "dangling escape in string operand");
      switch (body[i]) {
        case '\\': raw += '\\'; break;
        case 't': raw += '\t'; break;
        case 'n': raw += '\n'; break;
        case 'r': raw += '\r'; break;
        case '\'': raw += '\''; break;
        default: throw FormatError(line_no, "unknown escape in string operand");
      }
    }
    return Operand::string(std::move(raw));
  }
  for (char c : token) {
    auto u = static_cast<unsigned char>(c);
    if (u <= 0x20 || u == 0x7f || c == '\'') {
      throw FormatError(line_no, "invalid character in operand");
    }
  }
  return Operand{infer_operand_kind(token), std::string(token)};
}

}  // namespace

std::size_t OpcodeDump::op_count() const {
  std::size_t n = 0;
  for (const auto& fn : functions) n += fn.ops.size();
  return n;
}

bool is_valid_opcode(std::string_view opcode) {
  if (opcode.empty() || !is_upper(opcode.front())) return false;
  return std::all_of(opcode.begin(), opcode.end(),
                     [](char c) { return is_upper(c) || is_digit(c) || c == '_'; });
}

bool is_number_literal(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '-') ++i;
  std::size_t int_digits = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++int_digits;
  if (int_digits == 0) return false;
  if (i < s.size() && s[i] == '.') {
    ++i;
    std::size_t frac = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++frac;
    if (frac == 0) return false;
  }
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++exp;
    if (exp == 0) return false;
  }
  return i == s.size();
}

OperandKind infer_operand_kind(std::string_view token) {
  if (token.empty()) return OperandKind::Unused;
  switch (token.front()) {
    case '!': return OperandKind::CompiledVar;
    case '~': return OperandKind::TempVar;
    case '$': return OperandKind::Var;
    case '\'': return OperandKind::ConstString;
    default: break;
  }
  return is_number_literal(token) ? OperandKind::ConstNumber : OperandKind::Name;
}

OpcodeDump parse_dump(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < text.size()) lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }

  if (lines.empty() || lines.front().rfind("#odump", 0) != 0) {
    throw FormatError(1, "missing header");
  }
  if (lines.front() != kHeader) throw FormatError(1, "unsupported version");

  OpcodeDump dump;
  std::size_t fn_line = 0;
  bool have_main = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = lines[i];
    if (line.rfind("fn ", 0) == 0) {
      if (!dump.functions.empty() && dump.functions.back().ops.empty()) {
        throw FormatError(fn_line, "function has no instructions");
      }
      std::string name(line.substr(3));
      if (name.empty()) throw FormatError(line_no, "empty function name");
      if (name == kMainFunction) {
        if (have_main) throw FormatError(line_no, "duplicate (main)");
        have_main = true;
      }
      dump.functions.push_back({std::move(name), {}});
      fn_line = line_no;
      continue;
    }
    if (dump.functions.empty()) throw FormatError(line_no, "instruction outside function");

    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string_view::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 5) throw FormatError(line_no, "malformed record");

    OpLine op;
    auto src = parse_u32(fields[0]);
    if (!src || *src == 0) throw FormatError(line_no, "invalid source line");
    auto idx = parse_u32(fields[1]);
    if (!idx) throw FormatError(line_no, "invalid op index");
    if (!is_valid_opcode(fields[2])) throw FormatError(line_no, "invalid opcode");
    op.src_line = *src;
    op.op_index = *idx;
    op.opcode = std::string(fields[2]);

    if (!fields[3].empty()) {
      auto pieces = split_operands(fields[3], line_no);
      if (pieces.size() > 2) throw FormatError(line_no, "more than two operands");
      for (auto piece : pieces) op.operands.push_back(parse_operand(piece, line_no));
      if (op.operands.size() == 1 && op.operands[0].kind == OperandKind::Unused) {
        throw FormatError(line_no, "malformed record");
      }
    }
    if (!fields[4].empty()) {
      auto pieces = split_operands(fields[4], line_no);
      if (pieces.size() != 1) throw FormatError(line_no, "malformed result");
      op.result = parse_operand(pieces[0], line_no);
    }

    auto& ops = dump.functions.back().ops;
    if (!ops.empty() && op.op_index <= ops.back().op_index) {
      throw FormatError(line_no, "non-monotonic op index");
    }
    ops.push_back(std::move(op));
  }

  if (dump.functions.empty()) throw FormatError(lines.size(), "no functions");
  if (dump.functions.back().ops.empty()) {
    throw FormatError(fn_line, "function has no instructions");
  }
  if (!have_main) throw FormatError(lines.size(), "missing (main)");

  std::stable_partition(dump.functions.begin(), dump.functions.end(),
                        [](const FunctionUnit& f) { return f.name == kMainFunction; });
  return dump;
}

std::string serialize_dump(const OpcodeDump& dump) {
  std::string out;
  out += "#odump ";
  out += std::to_string(dump.version);
  out += '\n';
  auto emit = [&out](const FunctionUnit& fn) {
    out += "fn ";
    out += fn.name;
    out += '\n';
    for (const auto& op : fn.ops) {
      out += std::to_string(op.src_line);
      out += '\t';
      out += std::to_string(op.op_index);
      out += '\t';
      out += op.opcode;
      out += '\t';
      for (std::size_t i = 0; i < op.operands.size(); ++i) {
        if (i) out += '|';
        append_operand(out, op.operands[i]);
      }
      out += '\t';
      if (op.result) append_operand(out, *op.result);
      out += '\n';
    }
  };
  for (const auto& fn : dump.functions) {
    if (fn.name == kMainFunction) emit(fn);
  }
  for (const auto& fn : dump.functions) {
    if (fn.name != kMainFunction) emit(fn);
  }
  return out;
}

void validate_dump(const OpcodeDump& dump) {
  if (dump.functions.empty()) throw FormatError(0, "no functions");
  std::size_t mains = 0;
  for (const auto& fn : dump.functions) {
    if (fn.name == kMainFunction) ++mains;
    if (fn.ops.empty()) throw FormatError(0, "function has no instructions: " + fn.name);
    for (std::size_t i = 0; i < fn.ops.size(); ++i) {
      const auto& op = fn.ops[i];
      if (!is_valid_opcode(op.opcode)) throw FormatError(0, "invalid opcode: " + op.opcode);
      if (op.src_line == 0) throw FormatError(0, "invalid source line");
      if (i > 0 && op.op_index <= fn.ops[i - 1].op_index) {
        throw FormatError(0, "non-monotonic op index in " + fn.name);
      }
      if (op.operands.size() > 2) throw FormatError(0, "more than two operands");
    }
  }
  if (mains != 1) throw FormatError(0, "expected exactly one (main)");
}

}  // namespace opshield
