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

#include <json.hpp>

#include "opshield/odt.hpp"

namespace opshield {

using nlohmann::json;

std::string to_jsonl(const TokenSequence& seq) {
  json j;
  j["source_id"] = seq.source_id;
  j["label"] = seq.label ? json(static_cast<int>(*seq.label)) : json(nullptr);
  j["mode"] = to_string(seq.mode);
  j["tokens"] = seq.tokens;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

TokenSequence from_jsonl(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(0, std::string("invalid JSON: ") + e.what());
  }
  TokenSequence seq;
  try {
    seq.source_id = j.at("source_id").get<std::string>();
    const auto& label = j.at("label");
    if (!label.is_null()) {
      int v = label.get<int>();
      if (v != 0 && v != 1) throw FormatError(0, "label must be 0, 1 or null");
      seq.label = static_cast<Label>(v);
    }
    seq.mode = parse_mode(j.at("mode").get<std::string>());
    seq.tokens = j.at("tokens").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(0, std::string("bad sequence record: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Format) throw;
    throw FormatError(0, e.what());
  }
  return seq;
}

std::vector<TokenSequence> read_jsonl(std::string_view text) {
  std::vector<TokenSequence> out;
  std::size_t line_no = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(from_jsonl(line));
    } catch (const FormatError& e) {
      throw FormatError(line_no, e.reason());
    }
  }
  return out;
}

}  // namespace opshield
