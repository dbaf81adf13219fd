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
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "opshield/eval.hpp"

namespace opshield {
namespace {

bool safe_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return c > 0x20 && c != '/' && c != '\\' && c != ',' && c != 0x7f;
  });
}

}  // namespace

void write_corpus(const std::filesystem::path& dir, const std::vector<LabeledDump>& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  std::string labels = "source_id,label\n";
  for (const auto& s : corpus) {
    if (!safe_id(s.source_id)) throw Error(ErrorCode::InvalidConfig, "unusable source id '" + s.source_id + "'");
    write_file(dir / (s.source_id + ".odump"), serialize_dump(s.dump));
    labels += s.source_id + "," + std::to_string(static_cast<int>(s.label)) + "\n";
  }
  write_file(dir / "labels.csv", labels);
}

std::vector<LabeledDump> read_corpus(const std::filesystem::path& dir) {
  const std::string text = read_file(dir / "labels.csv");
  std::vector<LabeledDump> corpus;
  std::size_t line_no = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "source_id,label") throw FormatError(1, "labels.csv: expected header source_id,label");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw FormatError(line_no, "labels.csv: missing label");
    const std::string id(line.substr(0, comma));
    const auto label = line.substr(comma + 1);
    if (!safe_id(id)) throw FormatError(line_no, "labels.csv: bad source id");
    if (label != "0" && label != "1") throw FormatError(line_no, "labels.csv: label must be 0 or 1");
    LabeledDump s;
    s.source_id = id;
    s.label = label == "1" ? Label::Webshell : Label::Benign;
    try {
      s.dump = parse_dump(read_file(dir / (id + ".odump")));
    } catch (const FormatError& e) {
      throw Error(ErrorCode::Format, id + ".odump: " + e.what());
    }
    corpus.push_back(std::move(s));
  }
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "labels.csv lists no samples");
  return corpus;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<TokenSequence> extract_corpus(const std::vector<LabeledDump>& corpus, const FilterRules& rules,
                                          const DecodePolicy& policy, ExtractMode mode,
                                          std::vector<std::string>* skipped, std::size_t jobs) {
  std::vector<std::optional<TokenSequence>> slots(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    try {
      TokenSequence seq = extract_sequence(corpus[i].dump, rules, policy, mode);
      seq.label = corpus[i].label;
      seq.source_id = corpus[i].source_id;
      slots[i] = std::move(seq);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySequence) throw;
    }
  });
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else if (skipped) {
      skipped->push_back(corpus[i].source_id);
    }
  }
  return out;
}

}  // namespace opshield
