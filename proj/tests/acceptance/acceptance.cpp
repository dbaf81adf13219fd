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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is 0 only
// when every criterion passes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

#include "cli.hpp"
#include "opshield/adamw.hpp"
#include "opshield/classifier.hpp"
#include "opshield/eval.hpp"
#include "opshield/odt.hpp"
#include "support.hpp"

using namespace opshield;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kAttentionTol = 1e-5;
constexpr double kGradTol = 1e-4;
constexpr double kFusionTol = 1e-12;
constexpr double kAdamTol = 1e-7;
constexpr double kMinAccuracy = 0.95;
constexpr double kMinF1 = 0.95;
constexpr double kPipelineBudgetSeconds = 15 * 60;
constexpr int kFuzzInputs = 100000;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::vector<std::int32_t> random_ids(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<std::int32_t> ids(n);
  for (auto& id : ids) id = static_cast<std::int32_t>(rng.below(vocab));
  return ids;
}

Outcome crit_window_attention() {
  Rng rng(1001);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t heads = 1 + rng.below(3);
    const std::size_t d = heads * (2 + rng.below(4));
    const std::size_t window = 4 + rng.below(29);
    const std::size_t stride = 1 + rng.below(window - 1);
    const auto c = testing::toy_encoder(5 + rng.below(20), d, heads, 1 + rng.below(2), 2 * d, window, stride);
    auto p = EncoderParams::initialize(c, rng);
    testing::perturb(p, rng);
    const auto ids = random_ids(rng, 1 + rng.below(window), c.vocab_size);
    const auto hidden = encode(p, c, ids);
    if (hidden.size() != 1) return {false, "more than one window for L <= W"};
    const auto ref = testing::reference_encode(p, c, ids);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        worst = std::max(worst, std::abs(hidden[0](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - ref[i][j]));
  }
  return {worst < kAttentionTol, "100 pairs, max abs diff " + fmt("%.3g", worst)};
}

Outcome crit_window_layout() {
  std::size_t cases = 0, bad = 0;
  for (std::size_t L = 1; L <= 64; ++L)
    for (std::size_t W = 2; W <= 16; ++W)
      for (std::size_t Sr = 1; Sr < W; ++Sr) {
        ++cases;
        if (window_layout(L, W, Sr).starts != testing::covering_starts(L, W, Sr)) ++bad;
      }
  return {bad == 0, std::to_string(cases) + " (L, W, Sr) triples, " + std::to_string(bad) + " mismatches"};
}

Outcome crit_gradients() {
  Rng rng(1003);
  const double h = 1e-4;
  std::size_t enc_checked = 0, enc_bad = 0;
  {
    const auto c = testing::toy_encoder(7, 4, 2, 1, 8, 4, 2);
    auto p = EncoderParams::initialize(c, rng);
    testing::perturb(p, rng);
    const auto ids = random_ids(rng, 7, c.vocab_size);
    Vector upstream(4);
    for (auto& u : upstream) u = rng.uniform(-1, 1);
    auto grads = EncoderParams::zeros(c);
    const EncoderExample ex{ids, upstream};
    encoder_grad(p, c, std::span(&ex, 1), grads);
    auto loss = [&] {
      return pool_global(encode(p, c, ids), window_layout(ids.size(), c.window, c.stride), c.pool).dot(upstream);
    };
    auto params = p.tensors();
    const auto g = grads.tensors();
    for (int k = 0; k < 60; ++k) {
      const auto t = rng.below(params.size());
      Matrix& m = *params[t].value;
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.size())));
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = loss();
      m.data()[i] = saved - h;
      const double down = loss();
      m.data()[i] = saved;
      enc_bad += !testing::grad_close(g[t].value->data()[i], (up - down) / (2 * h), kGradTol);
      ++enc_checked;
    }
  }
  std::size_t head_checked = 0, head_bad = 0;
  {
    auto head = ClassifierHead::initialize(8, 8, rng);
    for (auto& t : head.tensors())
      for (Eigen::Index i = 0; i < t.value->size(); ++i) t.value->data()[i] += rng.uniform(-0.5, 0.5);
    Vector x(8);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (int label : {0, 1}) {
      HeadTrace trace;
      const double logit = head_forward(head, x, &trace);
      auto grads = ClassifierHead::zeros(8, 8);
      head_backward(head, trace, bce_logit_grad(logit, label), grads);
      auto loss = [&] { return bce_loss(sigmoid(head_forward(head, x)), label); };
      auto params = head.tensors();
      const auto g = grads.tensors();
      for (int k = 0; k < 30; ++k) {
        const auto t = rng.below(params.size());
        Matrix& m = *params[t].value;
        const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.size())));
        const double saved = m.data()[i];
        m.data()[i] = saved + 1e-5;
        const double up = loss();
        m.data()[i] = saved - 1e-5;
        const double down = loss();
        m.data()[i] = saved;
        head_bad += !testing::grad_close(g[t].value->data()[i], (up - down) / 2e-5, kGradTol);
        ++head_checked;
      }
    }
  }
  return {enc_bad == 0 && head_bad == 0 && enc_checked >= 50 && head_checked >= 50,
          "encoder " + std::to_string(enc_checked - enc_bad) + "/" + std::to_string(enc_checked) + ", head " +
              std::to_string(head_checked - head_bad) + "/" + std::to_string(head_checked) + " coordinates"};
}

Outcome crit_fusion() {
  Rng rng(1004);
  bool ok = true;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Vector a(6), b(6), a2(6), b2(6);
    for (auto* v : {&a, &b, &a2, &b2})
      for (auto& x : *v) x = rng.uniform(-5, 5);
    ok = ok && fuse(a, b, {0.0}) == b && fuse(a, b, {1.0}) == a;
    const double lambda = rng.uniform();
    const Vector lhs = fuse(a + a2, b + b2, {lambda});
    const Vector rhs = fuse(a, b, {lambda}) + fuse(a2, b2, {lambda});
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  Vector enc(2), ft(2);
  enc << 1, 0;
  ft << 0, 1;
  const Vector mix = fuse(enc, ft, {0.7});
  const bool example = std::abs(mix(0) - 0.7) <= kFusionTol && std::abs(mix(1) - 0.3) <= kFusionTol;
  return {ok && example && worst <= kFusionTol,
          std::string("endpoints ") + (ok ? "exact" : "NOT exact") + ", 0.7 example " + (example ? "ok" : "wrong") +
              ", linearity max diff " + fmt("%.3g", worst)};
}

Outcome crit_adamw() {
  auto one_step = [](double wd) {
    Matrix theta = Matrix::Constant(1, 1, 1.0), grad = Matrix::Constant(1, 1, 1.0);
    Matrix* params[] = {&theta};
    const Matrix* grads[] = {&grad};
    AdamWState s;
    s.hyper.lr = 0.1;
    s.hyper.weight_decay = wd;
    adamw_step(params, grads, s);
    return theta(0, 0);
  };
  const double plain = one_step(0.0), decayed = one_step(0.01);
  return {std::abs(plain - 0.9) <= kAdamTol && std::abs(decayed - 0.899) <= kAdamTol,
          "theta'=" + fmt("%.9f", plain) + " and " + fmt("%.9f", decayed)};
}

Outcome crit_decode() {
  const bool rfc = base64_encode("f") == "Zg==" && base64_encode("fo") == "Zm8=" && base64_encode("foo") == "Zm9v" &&
                   base64_encode("foobar") == "Zm9vYmFy" && base64_decode("Zm9vYmFy") == std::optional<std::string>("foobar") &&
                   base64_decode("Zg==") == std::optional<std::string>("f") && !base64_decode("Zm9=").has_value() &&
                   url_decode("%68%65%6C%6C%6F") == std::optional<std::string>("hello") && !url_decode("%4").has_value() &&
                   decode_operand("ZXZhbA==") == "eval" && decode_operand("%73%79%73%74%65%6d") == "system";
  std::size_t steps = 0;
  const bool two_level = decode_operand("WlhaaGJBPT0=", {}, &steps) == "eval" && steps == 2;

  Rng rng(1006);
  const DecodePolicy policy;
  std::size_t deepest = 0;
  for (int i = 0; i < kFuzzInputs; ++i) {
    std::string s = testing::random_text(rng, 40);
    if (rng.bernoulli(0.3)) s = base64_encode(s);
    if (rng.bernoulli(0.2)) s = base64_encode(s);
    if (rng.bernoulli(0.1)) s = "%" + s;
    detect_encoding(s, policy);
    std::size_t depth = 0;
    decode_operand(s, policy, &depth);
    deepest = std::max(deepest, depth);
  }
  return {rfc && two_level && deepest <= policy.max_depth,
          std::string("RFC vectors ") + (rfc ? "ok" : "FAILED") + ", two-level " + (two_level ? "ok" : "FAILED") +
              ", fuzz " + std::to_string(kFuzzInputs) + " inputs, max depth " + std::to_string(deepest)};
}

Outcome crit_metrics() {
  Rng rng(1007);
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng.below(200);
    std::vector<Label> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(0.5) ? Label::Webshell : Label::Benign;
      t[i] = rng.bernoulli(0.5) ? Label::Webshell : Label::Benign;
    }
    const auto m = compute_metrics(p, t);
    const auto r = testing::recount(p, t);
    bad += m.tp != r.tp || m.fp != r.fp || m.tn != r.tn || m.fn != r.fn;
  }
  return {bad == 0, "1000 label vectors, " + std::to_string(bad) + " disagreements"};
}

Outcome crit_parser() {
  Rng rng(1011);
  std::size_t round_trip_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto dump = testing::random_dump(rng);
    const std::string text = serialize_dump(dump);
    const auto back = parse_dump(text);
    round_trip_bad += !(back == dump) || serialize_dump(back) != text;
  }
  for (const char* name : {"eval_b64.odump", "vld_hello.odump", "webshell_sample.odump", "benign_sample.odump"}) {
    const std::string text = read_file(testing::fixture(name));
    round_trip_bad += serialize_dump(parse_dump(text)) != text;
  }
  bool empty_ok = false;
  try {
    parse_dump("");
  } catch (const FormatError& e) {
    empty_ok = e.line_no() == 1;
  }

  const std::string seeds[] = {"#odump 1\nfn (main)\n", "1\t0\tECHO\t'x'\t\n", "fn f\n", "|", "'", "\\", "\t", "\n"};
  std::size_t accepted = 0, rejected = 0, crashed = 0;
  for (int i = 0; i < kFuzzInputs; ++i) {
    std::string text;
    const auto pieces = rng.below(12);
    for (std::uint64_t k = 0; k < pieces; ++k) {
      if (rng.bernoulli(0.5)) {
        text += seeds[rng.below(std::size(seeds))];
      } else {
        text += static_cast<char>(rng.below(256));
      }
    }
    try {
      const auto dump = parse_dump(text);
      validate_dump(dump);
      ++accepted;
    } catch (const FormatError&) {
      ++rejected;
    } catch (...) {
      ++crashed;
    }
  }
  return {round_trip_bad == 0 && empty_ok && crashed == 0,
          std::to_string(round_trip_bad) + " round-trip failures, fuzz accepted=" + std::to_string(accepted) +
              " rejected=" + std::to_string(rejected) + " other=" + std::to_string(crashed)};
}

// End-to-end runs through the command-line front end.

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string result_line(const std::string& text) {
  const auto pos = text.rfind("RESULT ");
  if (pos == std::string::npos) return "";
  return text.substr(pos, text.find('\n', pos) - pos);
}

double field(const std::string& line, const std::string& key) {
  const auto pos = line.find(" " + key + "=");
  if (pos == std::string::npos) return -1;
  return std::stod(line.substr(pos + key.size() + 2));
}

struct PipelineRun {
  bool ok = false;
  double seconds = 0;
  std::string gen, train, eval;
  fs::path corpus, model;
};

PipelineRun run_cli_pipeline(const fs::path& root) {
  PipelineRun r;
  fs::remove_all(root);
  r.corpus = root / "corpus";
  r.model = root / "model";
  const std::vector<std::string> common = {"--seed", "42", "--jobs", "1"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  const auto g = cli(with({"gen", "--benign", "500", "--malicious", "500", "-o", r.corpus.string()}));
  r.gen = result_line(g.out);
  if (g.code != 0) return r;
  const auto start = std::chrono::steady_clock::now();
  const auto t = cli(with({"train", r.corpus.string(), "-o", r.model.string()}));
  r.train = result_line(t.out);
  if (t.code != 0) {
    std::fprintf(stderr, "%s", t.err.c_str());
    return r;
  }
  const auto e = cli(with({"eval", r.model.string(), r.corpus.string()}));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.eval = result_line(e.out);
  r.ok = e.code == 0;
  return r;
}

fs::path work_root() { return fs::temp_directory_path() / "opshield_acceptance"; }

PipelineRun first_run;

Outcome crit_end_to_end() {
  first_run = run_cli_pipeline(work_root() / "run1");
  if (!first_run.ok) return {false, "pipeline failed: " + first_run.train};
  const double acc = field(first_run.eval, "acc"), f1 = field(first_run.eval, "f1");
  return {acc >= kMinAccuracy && f1 >= kMinF1 && first_run.seconds <= kPipelineBudgetSeconds,
          "test acc=" + fmt("%.4f", acc) + " f1=" + fmt("%.4f", f1) + ", embed+train+eval " +
              fmt("%.0f", first_run.seconds) + " s"};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& diff) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  std::size_t count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) count_b += e.is_regular_file();
  if (count_b != files.size()) {
    diff = "file counts differ";
    return false;
  }
  for (const auto& f : files) {
    if (!fs::exists(b / f) || read_file(a / f) != read_file(b / f)) {
      diff = f.string();
      return false;
    }
  }
  return true;
}

Outcome crit_reproducible() {
  if (!first_run.ok) return {false, "first run did not complete"};
  const auto second = run_cli_pipeline(work_root() / "run2");
  if (!second.ok) return {false, "second run failed"};
  const bool lines = first_run.gen == second.gen && first_run.train == second.train && first_run.eval == second.eval;
  std::string diff;
  const bool model = same_tree(first_run.model, second.model, diff);
  const bool corpus = same_tree(first_run.corpus, second.corpus, diff);
  return {lines && model && corpus, std::string("RESULT lines ") + (lines ? "identical" : "DIFFER") +
                                        ", checkpoints " + (model && corpus ? "byte-identical" : "differ at " + diff)};
}

Outcome crit_ablation() {
  const auto corpus = gen_corpus(42, 500, 500);
  std::string detail;
  bool ok = true;
  for (std::uint64_t seed : {42, 43, 44}) {
    RunConfig cfg;
    cfg.set_seed(seed);
    const auto report = run_ablation(corpus, cfg);
    ok = ok && report.delta > 0;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + ": odt " +
              fmt("%.3f", report.odt.accuracy) + " ost " + fmt("%.3f", report.ost.accuracy);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"window attention equals full attention for L <= W", crit_window_attention},
      {"window layout matches the covering-progression oracle", crit_window_layout},
      {"encoder and head gradients match finite differences", crit_gradients},
      {"fusion endpoints, example and linearity", crit_fusion},
      {"AdamW single-step values", crit_adamw},
      {"decode vectors, two-level fixture and fuzz", crit_decode},
      {"metrics match a brute-force recount", crit_metrics},
      {"end-to-end synthetic detection (seed 42, 500+500)", crit_end_to_end},
      {"ODT beats OST on seeds 42, 43, 44", crit_ablation},
      {"identical seeds give identical results and checkpoints", crit_reproducible},
      {"parser round trip and fuzz", crit_parser},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  fs::remove_all(work_root());
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
