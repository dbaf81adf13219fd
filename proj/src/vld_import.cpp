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

#include <algorithm>
#include <cctype>

#include "opshield/opdump.hpp"

// VLD prints one table per compiled function:
//
//   function name:  (null)
//   line      #* E I O op                fetch   ext  return  operands
//   ----------------------------------------------------------------------
//      2     0  E >   INIT_FCALL                                'phpinfo'
//            1        DO_ICALL
//
// Column widths drift between PHP versions, so rows are read as whitespace
// separated tokens instead of fixed offsets. The flags, fetch and ext columns
// are dropped.

namespace opshield {
namespace {

bool is_uint(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_flag(std::string_view s) {
  return s == "E" || s == "I" || s == "O" || s == ">" || s == "*" || s == ">>";
}

bool is_fetch_word(std::string_view s) {
  return s == "global" || s == "local" || s == "static" || s == "global_lock" ||
         s == "member" || s == "property";
}

// Quotes are kept attached so a quoted comma or space does not split a token.
std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> tokens;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      cur += c;
      if (c == '\\' && i + 1 < line.size()) {
        cur += line[++i];
      } else if (c == '\'') {
        quoted = false;
      }
      continue;
    }
    if (c == '\'') {
      quoted = true;
      cur += c;
    } else if (c == ',' ) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
      tokens.emplace_back(",");
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || (s.front() >= '0' && s.front() <= '9')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\\';
  });
}

bool is_call_init(std::string_view opcode) {
  return opcode.rfind("INIT_", 0) == 0 || opcode == "NEW" || opcode == "DECLARE_FUNCTION" ||
         opcode == "DECLARE_CLASS" || opcode == "FETCH_CONSTANT";
}

Operand to_operand(const std::string& token, std::string_view opcode) {
  if (token.size() >= 2 && token.front() == '\'' && token.back() == '\'') {
    std::string body = token.substr(1, token.size() - 2);
    std::string raw;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '\\' && i + 1 < body.size()) {
        char n = body[++i];
        raw += n == 'n' ? '\n' : n == 't' ? '\t' : n == 'r' ? '\r' : n;
      } else {
        raw += body[i];
      }
    }
    // Function and class names are quoted by VLD but are identifiers.
    if (is_call_init(opcode) && is_identifier(raw)) return Operand::name(std::move(raw));
    return Operand::string(std::move(raw));
  }
  std::string clean;
  for (char c : token) {
    auto u = static_cast<unsigned char>(c);
    if (u > 0x20 && u != 0x7f && c != '\'' && c != '|') clean += c;
  }
  return Operand{infer_operand_kind(clean), clean};
}

struct Builder {
  OpcodeDump dump;
  std::size_t current = 0;
  bool open = false;
  std::uint32_t last_line = 1;

  void start(std::string name) {
    if (name == "(null)" || name.empty()) name = std::string(kMainFunction);
    if (name == kMainFunction &&
        std::any_of(dump.functions.begin(), dump.functions.end(),
                    [](const FunctionUnit& f) { return f.name == kMainFunction; })) {
      name = "(anon)" + std::to_string(dump.functions.size());
    }
    dump.functions.push_back({std::move(name), {}});
    current = dump.functions.size() - 1;
    open = true;
    last_line = 1;
  }

  void add(OpLine op) {
    if (!open) start(std::string(kMainFunction));
    auto& ops = dump.functions[current].ops;
    if (!ops.empty() && op.op_index <= ops.back().op_index) return;
    ops.push_back(std::move(op));
  }
};

std::optional<OpLine> parse_row(const std::vector<std::string>& tokens, std::uint32_t& last_line) {
  std::size_t i = 0;
  std::vector<std::uint32_t> numbers;
  while (i < tokens.size() && numbers.size() < 2 && is_uint(tokens[i]) && tokens[i].size() < 10) {
    numbers.push_back(static_cast<std::uint32_t>(std::stoul(tokens[i])));
    ++i;
  }
  if (numbers.empty()) return std::nullopt;
  while (i < tokens.size() && is_flag(tokens[i])) ++i;
  if (i >= tokens.size() || tokens[i].size() < 2 || !is_valid_opcode(tokens[i])) {
    return std::nullopt;
  }

  OpLine op;
  if (numbers.size() == 2) {
    op.src_line = numbers[0] == 0 ? 1 : numbers[0];
    op.op_index = numbers[1];
    last_line = op.src_line;
  } else {
    op.src_line = last_line;
    op.op_index = numbers[0];
  }
  op.opcode = tokens[i++];

  // Remaining columns: [fetch] [ext] [return] op1 [, op2]
  std::vector<std::string> head;
  std::vector<std::string> tail;
  bool after_comma = false;
  for (; i < tokens.size(); ++i) {
    if (tokens[i] == ",") {
      after_comma = true;
      continue;
    }
    (after_comma ? tail : head).push_back(tokens[i]);
  }
  std::vector<std::string> operands;
  if (!head.empty()) {
    operands.push_back(head.back());
    head.pop_back();
  }
  if (!tail.empty()) operands.push_back(tail.front());
  for (const auto& t : head) {
    if (is_fetch_word(t) || is_uint(t)) continue;
    auto kind = infer_operand_kind(t);
    if (kind == OperandKind::TempVar || kind == OperandKind::Var ||
        kind == OperandKind::CompiledVar) {
      op.result = to_operand(t, op.opcode);
    }
  }
  for (const auto& t : operands) {
    Operand o = to_operand(t, op.opcode);
    if (o.kind == OperandKind::Unused) continue;
    op.operands.push_back(std::move(o));
  }
  return op;
}

}  // namespace

OpcodeDump import_vld(std::string_view text) {
  Builder builder;
  std::uint32_t last_line = 1;
  std::size_t rows = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;

    constexpr std::string_view kFnTag = "function name:";
    if (auto at = line.find(kFnTag); at != std::string_view::npos) {
      std::string_view rest = line.substr(at + kFnTag.size());
      auto first = rest.find_first_not_of(" \t\r");
      auto last = rest.find_last_not_of(" \t\r");
      builder.start(first == std::string_view::npos
                        ? std::string()
                        : std::string(rest.substr(first, last - first + 1)));
      last_line = 1;
      continue;
    }
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (auto op = parse_row(tokens, last_line)) {
      builder.add(std::move(*op));
      ++rows;
    }
  }
  if (rows == 0) throw FormatError(0, "no instruction rows recognized");

  auto& fns = builder.dump.functions;
  fns.erase(std::remove_if(fns.begin(), fns.end(), [](const FunctionUnit& f) { return f.ops.empty(); }),
            fns.end());
  bool has_main = std::any_of(fns.begin(), fns.end(),
                              [](const FunctionUnit& f) { return f.name == kMainFunction; });
  if (!has_main) fns.front().name = std::string(kMainFunction);
  std::stable_partition(fns.begin(), fns.end(),
                        [](const FunctionUnit& f) { return f.name == kMainFunction; });
  return builder.dump;
}

}  // namespace opshield
