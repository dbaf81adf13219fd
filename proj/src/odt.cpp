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

#include "opshield/odt.hpp"

#include <array>
#include <cmath>

namespace opshield {
namespace {

bool is_printable(unsigned char c) {
  return (c >= 0x20 && c <= 0x7e) || c == '\t' || c == '\n' || c == '\r';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

double printable_fraction(std::string_view bytes) {
  if (bytes.empty()) return 0.0;
  std::size_t ok = 0;
  for (char c : bytes) ok += is_printable(static_cast<unsigned char>(c));
  return static_cast<double>(ok) / static_cast<double>(bytes.size());
}

// Control bytes become spaces and bytes that do not form valid UTF-8 become
// '?', so tokens stay printable text for the JSONL and .vec writers.
std::string sanitize_token(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      out += (c < 0x20 || c == 0x7f) ? ' ' : static_cast<char>(c);
      ++i;
      continue;
    }
    std::size_t len = (c & 0xe0) == 0xc0 ? 2 : (c & 0xf0) == 0xe0 ? 3 : (c & 0xf8) == 0xf0 ? 4 : 0;
    bool valid = len != 0 && i + len <= s.size() && c != 0xc0 && c != 0xc1 && c < 0xf5;
    for (std::size_t k = 1; valid && k < len; ++k) {
      valid = (static_cast<unsigned char>(s[i + k]) & 0xc0) == 0x80;
    }
    if (valid) {
      out.append(s.substr(i, len));
      i += len;
    } else {
      out += '?';
      ++i;
    }
  }
  return out;
}

std::string ascii_lower(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

}  // namespace

FilterRules FilterRules::defaults() {
  FilterRules rules;
  rules.keep = {"INCLUDE_OR_EVAL", "INIT_FCALL", "INIT_FCALL_BY_NAME", "INIT_DYNAMIC_CALL",
                "DO_FCALL",        "DO_ICALL",   "DO_UCALL",           "SEND_VAL",
                "SEND_VAR",        "CONCAT",     "FAST_CONCAT",        "ROPE_INIT",
                "ROPE_ADD",        "ROPE_END",   "ASSIGN",             "ASSIGN_DIM",
                "ECHO",            "EXIT",       "FETCH_R",            "FETCH_W",
                "FETCH_DIM_R",     "BEGIN_SILENCE"};
  rules.drop = {"NOP", "EXT_STMT", "EXT_NOP", "EXT_FCALL_BEGIN", "EXT_FCALL_END", "TICKS"};
  rules.default_policy = UnknownPolicy::KeepUnknown;
  return rules;
}

void FilterRules::validate() const {
  for (const auto& op : keep) {
    if (drop.count(op)) throw Error(ErrorCode::InvalidConfig, "opcode in both keep and drop: " + op);
  }
}

bool FilterRules::retains(std::string_view opcode) const {
  std::string key(opcode);
  if (keep.count(key)) return true;
  return !drop.count(key) && default_policy == UnknownPolicy::KeepUnknown;
}

void DecodePolicy::validate() const {
  if (max_depth < 1) throw Error(ErrorCode::InvalidConfig, "decode max_depth must be >= 1");
  if (min_b64_len < 1) throw Error(ErrorCode::InvalidConfig, "decode min_b64_len must be >= 1");
  if (!(printable_ratio > 0.0 && printable_ratio <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "decode printable_ratio must be in (0, 1]");
  }
  if (placeholder_len < 1) throw Error(ErrorCode::InvalidConfig, "placeholder length must be >= 1");
  if (!(entropy_low >= 0.0 && entropy_low <= entropy_high)) {
    throw Error(ErrorCode::InvalidConfig, "entropy thresholds must satisfy 0 <= low <= high");
  }
}

const char* to_string(Encoding e) {
  switch (e) {
    case Encoding::Base64: return "Base64";
    case Encoding::UrlEncoded: return "UrlEncoded";
    case Encoding::Plain: return "Plain";
  }
  return "Plain";
}

const char* to_string(ExtractMode m) { return m == ExtractMode::ODT ? "odt" : "ost"; }

ExtractMode parse_mode(std::string_view s) {
  if (s == "odt" || s == "ODT") return ExtractMode::ODT;
  if (s == "ost" || s == "OST") return ExtractMode::OST;
  throw Error(ErrorCode::InvalidConfig, "unknown extraction mode: " + std::string(s));
}

std::optional<std::string> base64_decode(std::string_view s) {
  if (s.size() % 4 != 0) return std::nullopt;
  std::size_t pad = 0;
  while (pad < s.size() && pad < 2 && s[s.size() - 1 - pad] == '=') ++pad;
  std::string out;
  out.reserve(s.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (std::size_t i = 0; i < s.size() - pad; ++i) {
    int v = base64_value(s[i]);
    if (v < 0) return std::nullopt;
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xff);
    }
  }
  // Leftover bits must be zero for a canonical encoding.
  if (bits > 0 && (acc & ((1u << bits) - 1)) != 0) return std::nullopt;
  return out;
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    std::uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                      (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                      static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    std::uint32_t n = static_cast<unsigned char>(bytes[i]) << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    std::uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                      (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::optional<std::string> url_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out += s[i];
      continue;
    }
    if (i + 2 >= s.size()) return std::nullopt;
    int hi = hex_value(s[i + 1]);
    int lo = hex_value(s[i + 2]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

Encoding detect_encoding(std::string_view s, const DecodePolicy& policy) {
  if (s.empty()) return Encoding::Plain;
  if (s.find('%') != std::string_view::npos && url_decode(s)) return Encoding::UrlEncoded;
  if (s.size() >= policy.min_b64_len && s.size() % 4 == 0) {
    auto decoded = base64_decode(s);
    if (decoded && printable_fraction(*decoded) >= policy.printable_ratio) return Encoding::Base64;
  }
  return Encoding::Plain;
}

std::string decode_operand(std::string_view s, const DecodePolicy& policy, std::size_t* steps) {
  std::string current(s);
  std::size_t done = 0;
  while (done < policy.max_depth) {
    Encoding enc = detect_encoding(current, policy);
    if (enc == Encoding::Plain) break;
    auto next = enc == Encoding::UrlEncoded ? url_decode(current) : base64_decode(current);
    if (!next) break;
    if (enc == Encoding::Base64 && printable_fraction(*next) < policy.printable_ratio) break;
    current = std::move(*next);
    ++done;
  }
  if (steps) *steps = done;
  return current;
}

double shannon_entropy(std::string_view s) {
  if (s.empty()) throw Error(ErrorCode::EmptyInput, "entropy of empty string");
  std::array<std::size_t, 256> counts{};
  for (char c : s) ++counts[static_cast<unsigned char>(c)];
  const double n = static_cast<double>(s.size());
  double h = 0.0;
  for (std::size_t count : counts) {
    if (count == 0) continue;
    double p = static_cast<double>(count) / n;
    h -= p * std::log2(p);
  }
  return h > 0.0 ? h : 0.0;
}

std::optional<std::string> normalize_operand(const Operand& op, const DecodePolicy& policy) {
  switch (op.kind) {
    case OperandKind::Unused:
      return std::nullopt;
    case OperandKind::ConstNumber:
      return std::string("<num>");
    case OperandKind::CompiledVar:
    case OperandKind::TempVar:
    case OperandKind::Var:
      return std::string("<var>");
    case OperandKind::Name:
    case OperandKind::ConstString:
      break;
  }
  std::string decoded = decode_operand(op.raw, policy);
  if (decoded.size() > policy.placeholder_len) {
    double h = shannon_entropy(decoded);
    const char* bucket = h > policy.entropy_high ? "H" : h >= policy.entropy_low ? "M" : "L";
    return std::string("<str:") + bucket + ">";
  }
  std::string token = sanitize_token(ascii_lower(std::move(decoded)));
  if (token.empty()) return std::string("<empty>");
  return token;
}

std::vector<OpLine> filter_ops(const OpcodeDump& dump, const FilterRules& rules) {
  std::vector<OpLine> kept;
  for (const auto& fn : dump.functions) {
    for (const auto& op : fn.ops) {
      if (rules.retains(op.opcode)) kept.push_back(op);
    }
  }
  return kept;
}

TokenSequence extract_sequence(const OpcodeDump& dump, const FilterRules& rules,
                               const DecodePolicy& policy, ExtractMode mode) {
  TokenSequence seq;
  seq.mode = mode;
  for (const auto& fn : dump.functions) {
    for (const auto& op : fn.ops) {
      if (!rules.retains(op.opcode)) continue;
      seq.tokens.push_back(op.opcode);
      if (mode == ExtractMode::OST) continue;
      for (const auto& operand : op.operands) {
        if (auto tok = normalize_operand(operand, policy)) seq.tokens.push_back(std::move(*tok));
      }
    }
  }
  if (seq.tokens.empty()) throw Error(ErrorCode::EmptySequence, "no instructions left after filtering");
  return seq;
}

}  // namespace opshield
