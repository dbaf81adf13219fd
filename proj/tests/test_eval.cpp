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

#include <doctest.h>

#include <atomic>
#include <set>

#include "opshield/eval.hpp"
#include "support.hpp"

using namespace opshield;

namespace {

std::vector<TokenSequence> labelled(std::size_t pos, std::size_t neg) {
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; i < pos + neg; ++i) {
    TokenSequence s;
    s.tokens = {"ECHO"};
    s.label = i < pos ? Label::Webshell : Label::Benign;
    s.source_id = "id" + std::to_string(i);
    out.push_back(s);
  }
  return out;
}

std::size_t count(const std::vector<TokenSequence>& v, Label l) {
  std::size_t n = 0;
  for (const auto& s : v) n += s.label == l;
  return n;
}

}  // namespace

TEST_CASE("split sizes") {
  SplitSpec spec;
  spec.stratified = false;
  const auto s = split_dataset(labelled(5, 5), spec);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
}

TEST_CASE("split is deterministic, disjoint and exhaustive") {
  const auto data = labelled(37, 63);
  for (bool stratified : {false, true}) {
    SplitSpec spec;
    spec.stratified = stratified;
    const auto a = split_dataset(data, spec), b = split_dataset(data, spec);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    std::multiset<std::string> ids;
    for (const auto* part : {&a.train, &a.val, &a.test})
      for (const auto& s : *part) ids.insert(s.source_id);
    CHECK(ids.size() == data.size());
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == data.size());
    spec.seed = 43;
    const auto c = split_dataset(data, spec);
    CHECK_FALSE(c.train == a.train);
  }
}

TEST_CASE("stratified split keeps class ratios") {
  SplitSpec spec;
  spec.train = 0.5;
  spec.val = 0.25;
  spec.test = 0.25;
  const auto s = split_dataset(labelled(6, 6), spec);
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    CHECK(count(*part, Label::Webshell) == count(*part, Label::Benign));
  }
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);

  SplitSpec def;
  const auto big = split_dataset(labelled(137, 251), def);
  const double ratio = 137.0 / 388.0;
  for (const auto* part : {&big.train, &big.val, &big.test}) {
    const double expected = ratio * static_cast<double>(part->size());
    CHECK(std::abs(static_cast<double>(count(*part, Label::Webshell)) - expected) <= 1.0);
  }
}

TEST_CASE("split guards") {
  auto code_of = [](const std::vector<TokenSequence>& d, SplitSpec spec) {
    try {
      split_dataset(d, spec);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code_of(labelled(1, 1), {}) == ErrorCode::TooFewSamples);
  CHECK(code_of(labelled(0, 10), {}) == ErrorCode::SingleClassDataset);
  SplitSpec bad;
  bad.train = 0.9;
  CHECK(code_of(labelled(5, 5), bad) == ErrorCode::InvalidConfig);
  bad = {};
  bad.val = 0.0;
  bad.train = 0.9;
  CHECK(code_of(labelled(5, 5), bad) == ErrorCode::InvalidConfig);
}

TEST_CASE("metrics examples") {
  const auto m = metrics_from_counts(8, 2, 8, 2);
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.precision == doctest::Approx(0.8));
  CHECK(m.recall == doctest::Approx(0.8));
  CHECK(m.f1 == doctest::Approx(0.8));
  const std::vector<Label> y = {Label::Webshell, Label::Benign, Label::Webshell};
  const auto perfect = compute_metrics(y, y);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);
  const std::vector<Label> none(3, Label::Benign);
  const auto zero = compute_metrics(none, y);
  CHECK(zero.tp == 0);
  CHECK(zero.precision == 0.0);
  CHECK(zero.f1 == 0.0);
  CHECK_THROWS_AS(compute_metrics(none, std::vector<Label>(2, Label::Benign)), Error);
  CHECK_THROWS_AS(compute_metrics(std::vector<Label>{}, std::vector<Label>{}), Error);
}

TEST_CASE("metrics agree with a brute-force recount") {
  Rng rng(50);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 50;
    std::vector<Label> p(n), t(n);
    for (int i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(0.5) ? Label::Webshell : Label::Benign;
      t[i] = rng.bernoulli(0.5) ? Label::Webshell : Label::Benign;
    }
    const auto m = compute_metrics(p, t);
    const auto r = testing::recount(p, t);
    CHECK(m.tp == r.tp);
    CHECK(m.fp == r.fp);
    CHECK(m.tn == r.tn);
    CHECK(m.fn == r.fn);
    CHECK(m.accuracy == static_cast<double>(r.tp + r.tn) / n);
    CHECK(m.f1 <= 1.0);
  }
}

TEST_CASE("generator is deterministic and balanced") {
  const auto a = gen_corpus(5, 3, 4), b = gen_corpus(5, 3, 4);
  REQUIRE(a.size() == 7);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(serialize_dump(a[i].dump) == serialize_dump(b[i].dump));
    CHECK(a[i].source_id == b[i].source_id);
    bad += a[i].label == Label::Webshell;
    REQUIRE_NOTHROW(validate_dump(a[i].dump));
    CHECK(a[i].dump.op_count() >= 20);
    CHECK(a[i].dump.op_count() <= 400);
  }
  CHECK(bad == 4);
  CHECK_FALSE(serialize_dump(gen_corpus(6, 3, 4)[0].dump) == serialize_dump(a[0].dump));
  CHECK_THROWS_AS(gen_corpus(1, 0, 1), Error);
}

TEST_CASE("every generated webshell carries a base64 operand") {
  const auto corpus = gen_corpus(42, 100, 100);
  for (const auto& s : corpus) {
    if (s.label != Label::Webshell) continue;
    bool found = false;
    for (const auto& fn : s.dump.functions)
      for (const auto& op : fn.ops)
        for (const auto& o : op.operands)
          found = found || (o.kind == OperandKind::ConstString && detect_encoding(o.raw) == Encoding::Base64);
    CHECK(found);
  }
}

TEST_CASE("generated classes overlap in opcode distribution") {
  CHECK(opcode_overlap(gen_corpus(42, 500, 500)) >= 0.8);
}

TEST_CASE("corpus directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "opshield_corpus_test";
  std::filesystem::remove_all(dir);
  const auto corpus = gen_corpus(3, 2, 2);
  write_corpus(dir, corpus);
  const std::string labels = read_file(dir / "labels.csv");
  CHECK(labels.rfind("source_id,label\n", 0) == 0);
  const auto back = read_corpus(dir);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].source_id == corpus[i].source_id);
    CHECK(back[i].label == corpus[i].label);
    CHECK(back[i].dump == corpus[i].dump);
  }
  write_file(dir / "labels.csv", "source_id,label\nsample_00000,2\n");
  CHECK_THROWS_AS(read_corpus(dir), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("parallel extraction matches serial extraction") {
  const auto corpus = gen_corpus(8, 20, 20);
  const auto rules = FilterRules::defaults();
  const auto serial = extract_corpus(corpus, rules, {}, ExtractMode::ODT, nullptr, 1);
  const auto parallel = extract_corpus(corpus, rules, {}, ExtractMode::ODT, nullptr, 4);
  CHECK(serial == parallel);
  std::atomic<int> hits{0};
  parallel_for(100, 3, [&](std::size_t) { ++hits; });
  CHECK(hits == 100);
  CHECK_THROWS_AS(parallel_for(10, 2, [](std::size_t i) {
                    if (i == 7) throw Error(ErrorCode::Io, "boom");
                  }),
                  Error);
}

TEST_CASE("extraction skips samples that filter to nothing") {
  auto corpus = gen_corpus(9, 2, 2);
  OpLine nop;
  nop.opcode = "NOP";
  corpus[1].dump.functions = {{"(main)", {nop}}};
  std::vector<std::string> skipped;
  const auto seqs = extract_corpus(corpus, FilterRules::defaults(), {}, ExtractMode::ODT, &skipped);
  CHECK(seqs.size() == 3);
  CHECK(skipped == std::vector<std::string>{corpus[1].source_id});
}

TEST_CASE("ablation control and guards") {
  // Operand-free dumps give identical ODT and OST tokens.
  std::vector<LabeledDump> corpus;
  for (int i = 0; i < 12; ++i) {
    OpLine op;
    op.opcode = i % 2 ? "ECHO" : "EXIT";
    OpLine pad;
    pad.opcode = "ASSIGN";
    pad.op_index = 1;
    corpus.push_back({"c" + std::to_string(i), OpcodeDump{1, {{"(main)", {op, pad}}}},
                      i % 2 ? Label::Webshell : Label::Benign});
  }
  RunConfig cfg;
  cfg.train.epochs = 1;
  cfg.embed.epochs = 1;
  cfg.embed.dim = 8;
  cfg.encoder.d_model = 8;
  cfg.encoder.n_heads = 2;
  cfg.encoder.ff_dim = 8;
  cfg.train.vocab_min_count = 1;
  const auto report = run_ablation(corpus, cfg);
  CHECK(report.delta == 0.0);
  REQUIRE(report.warning.has_value());
  CHECK(report.odt == report.ost);
  CHECK(ablation_csv(report).rfind("mode,accuracy,precision,recall,f1\nodt,", 0) == 0);

  try {
    run_ablation({}, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
}
