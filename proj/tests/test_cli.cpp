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

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "opshield/classifier.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = opshield::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string last_line(const std::string& s) {
  auto t = s;
  while (!t.empty() && t.back() == '\n') t.pop_back();
  const auto pos = t.rfind('\n');
  return pos == std::string::npos ? t : t.substr(pos + 1);
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("opshield_cli_" + name);
  fs::remove_all(p);
  return p;
}

const std::vector<std::string> kSmall = {
    "--set", "embed.dim=8",      "--set", "embed.epochs=1",  "--set", "encoder.d_model=8",
    "--set", "encoder.n_heads=2", "--set", "encoder.ff_dim=8", "--set", "encoder.n_layers=1",
    "--set", "encoder.window=32", "--set", "encoder.stride=16", "--set", "train.epochs=1"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

}  // namespace

TEST_CASE("parse prints canonical dumps") {
  const auto r = run({"parse", testing::fixture("eval_b64.odump").string()});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("#odump 1\n", 0) == 0);
  CHECK(last_line(r.out) == "RESULT files=1 ok=1 failed=0");

  const auto bad = run({"parse", testing::fixture("garbage.txt").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("garbage.txt") != std::string::npos);
  CHECK(last_line(bad.out) == "RESULT files=1 ok=0 failed=1");
}

TEST_CASE("parse imports VLD listings") {
  const auto dir = scratch("vld");
  const auto r = run({"parse", "--vld", "-o", dir.string(), testing::fixture("vld_hello.txt").string()});
  CHECK(r.code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    ++files;
    CHECK(opshield::read_file(e.path()) == opshield::read_file(testing::fixture("vld_hello.odump")));
  }
  CHECK(files == 1);
  fs::remove_all(dir);
}

TEST_CASE("extract in both modes") {
  const auto in = testing::fixture("eval_b64.odump").string();
  const auto odt = run({"extract", in});
  CHECK(odt.code == 0);
  CHECK(odt.out.find("\"base64_decode\"") != std::string::npos);
  CHECK(odt.err.find("RESULT records=1") != std::string::npos);
  const auto ost = run({"extract", "--mode", "ost", in});
  CHECK(ost.code == 0);
  CHECK(ost.out.find("base64_decode") == std::string::npos);
  CHECK(ost.out.find("INIT_FCALL") != std::string::npos);
  CHECK(run({"extract", "--mode", "both", in}).code == 64);
  CHECK(run({"extract", "--set", "nope=1", in}).code == 64);
  CHECK(run({"extract", testing::fixture("garbage.txt").string()}).code == 2);
}

TEST_CASE("usage errors and help") {
  CHECK(run({}).code == 64);
  CHECK(run({"frobnicate"}).code == 64);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("gen, train, eval and predict") {
  const auto corpus = scratch("corpus");
  const auto model = scratch("model");
  auto g = run({"gen", "--benign", "10", "--malicious", "10", "-o", corpus.string()});
  REQUIRE(g.code == 0);
  CHECK(last_line(g.out).rfind("RESULT samples=20 benign=10 malicious=10 ", 0) == 0);
  CHECK(fs::exists(corpus / "labels.csv"));

  auto t = run(with_small({"train", corpus.string(), "-o", model.string()}));
  REQUIRE(t.code == 0);
  CHECK(last_line(t.out).rfind("RESULT train=16 val=2 test=2", 0) == 0);
  for (const char* f : {"manifest.txt", "encoder.swae", "head.bin", "vocab.txt", "embed.vec", "embed.ftbk",
                        "config.txt", "history.csv"}) {
    CHECK(fs::exists(model / f));
  }

  auto e = run({"eval", model.string(), corpus.string()});
  CHECK(e.code == 0);
  CHECK(last_line(e.out).rfind("RESULT n=2 ", 0) == 0);
  auto all = run({"eval", "--all", model.string(), corpus.string()});
  CHECK(last_line(all.out).rfind("RESULT n=20 ", 0) == 0);

  auto p = run({"predict", model.string(), testing::fixture("webshell_sample.odump").string()});
  CHECK(p.code == 0);
  const auto line = last_line(p.out);
  CHECK(line.rfind("RESULT prob=", 0) == 0);
  const double prob = std::stod(line.substr(12, 8));
  CHECK(prob >= 0.0);
  CHECK(prob <= 1.0);
  CHECK(line.find(prob >= 0.5 ? "label=webshell" : "label=benign") != std::string::npos);

  auto many = run({"predict", model.string(), testing::fixture("webshell_sample.odump").string(),
                   testing::fixture("benign_sample.odump").string()});
  CHECK(many.code == 0);
  CHECK(last_line(many.out).rfind("RESULT files=2 ", 0) == 0);

  CHECK(run({"predict", model.string(), testing::fixture("garbage.txt").string()}).code == 2);
  CHECK(run({"eval", (model / "missing").string(), corpus.string()}).code == 2);
  fs::remove_all(corpus);
  fs::remove_all(model);
}

TEST_CASE("lambda search prints one row per candidate") {
  const auto corpus = scratch("lambda");
  REQUIRE(run({"gen", "--benign", "8", "--malicious", "8", "-o", corpus.string()}).code == 0);
  const auto r = run(with_small({"lambda", corpus.string(), "--grid", "0,0.5,1"}));
  CHECK(r.code == 0);
  std::size_t rows = 0;
  std::istringstream lines(r.out);
  for (std::string l; std::getline(lines, l);) rows += l.find(',') != std::string::npos && l[0] != 'l';
  CHECK(rows == 3);
  CHECK(last_line(r.out).find("candidates=3") != std::string::npos);
  fs::remove_all(corpus);
}
