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

#include "opshield/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>

namespace opshield {
namespace {

struct Entry {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad_value(std::string_view what, std::string_view value) {
  throw Error(ErrorCode::InvalidConfig, "invalid " + std::string(what) + " value '" + std::string(value) + "'");
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_int(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value("integer", s);
  return v;
}

double parse_real(std::string_view s) {
  double v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value("number", s);
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  bad_value("boolean", s);
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Shortest text that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char shorter[32];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::stod(shorter) == v) return shorter;
  }
  return buf;
}

std::set<std::string> parse_set(std::string_view s) {
  std::set<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = trim(s.substr(pos, comma - pos));
    if (!item.empty()) {
      if (!is_valid_opcode(item)) bad_value("opcode", item);
      out.emplace(item);
    }
    pos = comma + 1;
  }
  return out;
}

std::string join_set(const std::set<std::string>& s) {
  std::string out;
  for (const auto& item : s) {
    if (!out.empty()) out += ',';
    out += item;
  }
  return out;
}

template <typename Field>
Entry size_entry(Field field) {
  return {[field](RunConfig& c, std::string_view v) { field(c) = parse_int<std::size_t>(v); },
          [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Entry int_entry(Field field) {
  return {[field](RunConfig& c, std::string_view v) { field(c) = parse_int<int>(v); },
          [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Entry u64_entry(Field field) {
  return {[field](RunConfig& c, std::string_view v) { field(c) = parse_int<std::uint64_t>(v); },
          [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Entry real_entry(Field field) {
  return {[field](RunConfig& c, std::string_view v) { field(c) = parse_real(v); },
          [field](const RunConfig& c) { return fmt_real(field(const_cast<RunConfig&>(c))); }};
}

const std::vector<std::pair<std::string, Entry>>& table() {
  static const std::vector<std::pair<std::string, Entry>> entries = [] {
    std::vector<std::pair<std::string, Entry>> t;
    t.emplace_back("filter.keep", Entry{[](RunConfig& c, std::string_view v) { c.rules.keep = parse_set(v); },
                                        [](const RunConfig& c) { return join_set(c.rules.keep); }});
    t.emplace_back("filter.drop", Entry{[](RunConfig& c, std::string_view v) { c.rules.drop = parse_set(v); },
                                        [](const RunConfig& c) { return join_set(c.rules.drop); }});
    t.emplace_back("filter.default_policy",
                   Entry{[](RunConfig& c, std::string_view v) {
                           if (v == "keep_unknown") c.rules.default_policy = UnknownPolicy::KeepUnknown;
                           else if (v == "drop_unknown") c.rules.default_policy = UnknownPolicy::DropUnknown;
                           else bad_value("filter.default_policy", v);
                         },
                         [](const RunConfig& c) {
                           return std::string(c.rules.default_policy == UnknownPolicy::KeepUnknown ? "keep_unknown"
                                                                                                  : "drop_unknown");
                         }});
    t.emplace_back("decode.max_depth", size_entry([](RunConfig& c) -> auto& { return c.decode.max_depth; }));
    t.emplace_back("decode.min_b64_len", size_entry([](RunConfig& c) -> auto& { return c.decode.min_b64_len; }));
    t.emplace_back("decode.printable_ratio",
                   real_entry([](RunConfig& c) -> auto& { return c.decode.printable_ratio; }));
    t.emplace_back("normalize.placeholder_len",
                   size_entry([](RunConfig& c) -> auto& { return c.decode.placeholder_len; }));
    t.emplace_back("normalize.entropy_high", real_entry([](RunConfig& c) -> auto& { return c.decode.entropy_high; }));
    t.emplace_back("normalize.entropy_low", real_entry([](RunConfig& c) -> auto& { return c.decode.entropy_low; }));
    t.emplace_back("extract.mode", Entry{[](RunConfig& c, std::string_view v) {
                                           if (v != "odt" && v != "ost") bad_value("extract.mode", v);
                                           c.mode = parse_mode(v);
                                         },
                                         [](const RunConfig& c) { return std::string(to_string(c.mode)); }});
    t.emplace_back("embed.minn", int_entry([](RunConfig& c) -> auto& { return c.embed.minn; }));
    t.emplace_back("embed.maxn", int_entry([](RunConfig& c) -> auto& { return c.embed.maxn; }));
    t.emplace_back("embed.buckets", size_entry([](RunConfig& c) -> auto& { return c.embed.buckets; }));
    t.emplace_back("embed.dim", size_entry([](RunConfig& c) -> auto& { return c.embed.dim; }));
    t.emplace_back("embed.window", size_entry([](RunConfig& c) -> auto& { return c.embed.window; }));
    t.emplace_back("embed.negatives", size_entry([](RunConfig& c) -> auto& { return c.embed.negatives; }));
    t.emplace_back("embed.epochs", size_entry([](RunConfig& c) -> auto& { return c.embed.epochs; }));
    t.emplace_back("embed.lr", real_entry([](RunConfig& c) -> auto& { return c.embed.lr; }));
    t.emplace_back("embed.seed", u64_entry([](RunConfig& c) -> auto& { return c.embed.seed; }));
    t.emplace_back("encoder.d_model", size_entry([](RunConfig& c) -> auto& { return c.encoder.d_model; }));
    t.emplace_back("encoder.n_heads", size_entry([](RunConfig& c) -> auto& { return c.encoder.n_heads; }));
    t.emplace_back("encoder.n_layers", size_entry([](RunConfig& c) -> auto& { return c.encoder.n_layers; }));
    t.emplace_back("encoder.ff_dim", size_entry([](RunConfig& c) -> auto& { return c.encoder.ff_dim; }));
    t.emplace_back("encoder.max_len", size_entry([](RunConfig& c) -> auto& { return c.encoder.max_len; }));
    t.emplace_back("encoder.window", size_entry([](RunConfig& c) -> auto& { return c.encoder.window; }));
    t.emplace_back("encoder.stride", size_entry([](RunConfig& c) -> auto& { return c.encoder.stride; }));
    t.emplace_back("encoder.dropout", real_entry([](RunConfig& c) -> auto& { return c.encoder.dropout; }));
    t.emplace_back("encoder.pool",
                   Entry{[](RunConfig& c, std::string_view v) {
                           if (v == "window_mean") c.encoder.pool = PoolMode::WindowMean;
                           else if (v == "token_mean") c.encoder.pool = PoolMode::TokenMean;
                           else bad_value("encoder.pool", v);
                         },
                         [](const RunConfig& c) {
                           return std::string(c.encoder.pool == PoolMode::WindowMean ? "window_mean" : "token_mean");
                         }});
    t.emplace_back("fusion.lambda", real_entry([](RunConfig& c) -> auto& { return c.fusion.lambda; }));
    t.emplace_back("head.hidden", size_entry([](RunConfig& c) -> auto& { return c.train.head_hidden; }));
    t.emplace_back("adamw.lr", real_entry([](RunConfig& c) -> auto& { return c.train.adamw.lr; }));
    t.emplace_back("adamw.beta1", real_entry([](RunConfig& c) -> auto& { return c.train.adamw.beta1; }));
    t.emplace_back("adamw.beta2", real_entry([](RunConfig& c) -> auto& { return c.train.adamw.beta2; }));
    t.emplace_back("adamw.eps", real_entry([](RunConfig& c) -> auto& { return c.train.adamw.eps; }));
    t.emplace_back("adamw.weight_decay", real_entry([](RunConfig& c) -> auto& { return c.train.adamw.weight_decay; }));
    t.emplace_back("train.epochs", size_entry([](RunConfig& c) -> auto& { return c.train.epochs; }));
    t.emplace_back("train.batch", size_entry([](RunConfig& c) -> auto& { return c.train.batch; }));
    t.emplace_back("train.seed", u64_entry([](RunConfig& c) -> auto& { return c.train.seed; }));
    t.emplace_back("train.vocab_min_count",
                   size_entry([](RunConfig& c) -> auto& { return c.train.vocab_min_count; }));
    t.emplace_back("split.train", real_entry([](RunConfig& c) -> auto& { return c.split.train; }));
    t.emplace_back("split.val", real_entry([](RunConfig& c) -> auto& { return c.split.val; }));
    t.emplace_back("split.test", real_entry([](RunConfig& c) -> auto& { return c.split.test; }));
    t.emplace_back("split.seed", u64_entry([](RunConfig& c) -> auto& { return c.split.seed; }));
    t.emplace_back("split.stratified",
                   Entry{[](RunConfig& c, std::string_view v) { c.split.stratified = parse_bool(v); },
                         [](const RunConfig& c) { return std::string(c.split.stratified ? "true" : "false"); }});
    t.emplace_back("lambda.grid", Entry{[](RunConfig& c, std::string_view v) { c.lambda_grid = parse_double_list(v); },
                                        [](const RunConfig& c) {
                                          std::string out;
                                          for (double d : c.lambda_grid) {
                                            if (!out.empty()) out += ',';
                                            out += fmt_real(d);
                                          }
                                          return out;
                                        }});
    return t;
  }();
  return entries;
}

const Entry& lookup(std::string_view key) {
  for (const auto& [k, e] : table()) {
    if (k == key) return e;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'");
}

}  // namespace

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = trim(text.substr(pos, comma - pos));
    if (item.empty()) bad_value("list", text);
    out.push_back(parse_real(item));
    pos = comma + 1;
  }
  return out;
}

void RunConfig::set(std::string_view key, std::string_view value) { lookup(key).set(*this, trim(value)); }

std::string RunConfig::get(std::string_view key) const { return lookup(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, e] : table()) out.push_back(k);
    return out;
  }();
  return names;
}

void RunConfig::validate() const {
  rules.validate();
  decode.validate();
  embed.validate();
  EncoderConfig probe = encoder;
  probe.vocab_size = std::max<std::size_t>(probe.vocab_size, 1);
  probe.validate();
  fusion.validate();
  train.validate();
  split.validate();
  if (lambda_grid.empty()) throw Error(ErrorCode::InvalidConfig, "lambda.grid is empty");
  for (double l : lambda_grid) FusionConfig{l}.validate();
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, e] : table()) out += k + " = " + e.get(*this) + "\n";
  return out;
}

void RunConfig::merge_text(std::string_view text) {
  std::size_t line_no = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

RunConfig RunConfig::from_text(std::string_view text) {
  RunConfig c;
  c.merge_text(text);
  c.validate();
  return c;
}

void RunConfig::set_seed(std::uint64_t seed) {
  embed.seed = seed;
  train.seed = seed;
  split.seed = seed;
}

}  // namespace opshield
