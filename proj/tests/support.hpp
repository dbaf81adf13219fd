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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "opshield/encoder.hpp"
#include "opshield/metrics.hpp"
#include "opshield/opdump.hpp"
#include "opshield/rng.hpp"

namespace testing {

using namespace opshield;

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(OPSHIELD_FIXTURE_DIR) / name;
}

inline std::string random_identifier(Rng& rng, std::size_t max_len = 10) {
  static const std::string head = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
  static const std::string tail = head + "0123456789";
  std::string s(1, head[rng.below(head.size())]);
  const auto n = rng.below(max_len);
  for (std::uint64_t i = 0; i < n; ++i) s += tail[rng.below(tail.size())];
  return s;
}

inline std::string random_opcode(Rng& rng) {
  static const std::string head = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  static const std::string tail = head + "0123456789_";
  std::string s(1, head[rng.below(head.size())]);
  const auto n = rng.below(14);
  for (std::uint64_t i = 0; i < n; ++i) s += tail[rng.below(tail.size())];
  return s;
}

inline std::string random_text(Rng& rng, std::size_t max_len = 20) {
  static const std::vector<std::string> pieces = {"a", "Z", "0", " ", "\t", "\n", "\r", "\\", "'", "|", "%41",
                                                  "=", "é", "日本", "#", "fn ", "$", "!", "~", "\x01"};
  std::string s;
  const auto n = rng.below(max_len + 1);
  for (std::uint64_t i = 0; i < n; ++i) s += pieces[rng.below(pieces.size())];
  return s;
}

inline Operand random_operand(Rng& rng, bool allow_unused) {
  switch (rng.below(allow_unused ? 7 : 6)) {
    case 0: return Operand::string(random_text(rng));
    case 1: {
      static const std::vector<std::string> numbers = {"0", "42", "-7", "3.25", "1e10", "-0.5E-3"};
      return {OperandKind::ConstNumber, numbers[rng.below(numbers.size())]};
    }
    case 2: return {OperandKind::CompiledVar, "!" + std::to_string(rng.below(100))};
    case 3: return {OperandKind::TempVar, "~" + std::to_string(rng.below(100))};
    case 4: return {OperandKind::Var, "$" + std::to_string(rng.below(100))};
    case 5: return Operand::name(random_identifier(rng));
    default: return Operand::unused();
  }
}

/// Structurally valid dump with "(main)" first and 0-2 extra functions.
inline OpcodeDump random_dump(Rng& rng) {
  OpcodeDump dump;
  const auto n_functions = 1 + rng.below(3);
  for (std::uint64_t f = 0; f < n_functions; ++f) {
    FunctionUnit fn;
    fn.name = f == 0 ? std::string(kMainFunction) : random_identifier(rng) + std::to_string(f);
    std::uint32_t index = static_cast<std::uint32_t>(rng.below(3));
    const auto n_ops = 1 + rng.below(12);
    for (std::uint64_t i = 0; i < n_ops; ++i) {
      OpLine op;
      op.src_line = 1 + static_cast<std::uint32_t>(rng.below(500));
      op.op_index = index;
      index += 1 + static_cast<std::uint32_t>(rng.below(3));
      op.opcode = random_opcode(rng);
      const auto n_operands = rng.below(3);
      if (n_operands == 1) op.operands.push_back(random_operand(rng, false));
      if (n_operands == 2) {
        op.operands.push_back(random_operand(rng, true));
        op.operands.push_back(random_operand(rng, true));
      }
      if (rng.bernoulli(0.5)) op.result = random_operand(rng, false);
      fn.ops.push_back(std::move(op));
    }
    dump.functions.push_back(std::move(fn));
  }
  return dump;
}

/// Smallest n such that {0, Sr, ..., (n-1)Sr} windows of width W cover
/// [0, L), found by marking covered positions.
inline std::vector<std::size_t> covering_starts(std::size_t L, std::size_t W, std::size_t Sr) {
  for (std::size_t n = 1;; ++n) {
    std::vector<bool> covered(L, false);
    std::vector<std::size_t> starts;
    for (std::size_t k = 0; k < n; ++k) {
      starts.push_back(k * Sr);
      for (std::size_t p = k * Sr; p < k * Sr + W && p < L; ++p) covered[p] = true;
    }
    bool all = true;
    for (bool c : covered) all = all && c;
    if (all) return starts;
  }
}

/// Confusion counts by direct enumeration.
struct Recount {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline Recount recount(const std::vector<Label>& pred, const std::vector<Label>& truth) {
  Recount r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == Label::Webshell, t = truth[i] == Label::Webshell;
    if (p && t) ++r.tp;
    if (p && !t) ++r.fp;
    if (!p && !t) ++r.tn;
    if (!p && t) ++r.fn;
  }
  return r;
}

// Plain nested-loop transformer with full attention over the whole
// sequence, written without Eigen expressions.
using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const Matrix& m) {
  Rows r(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

inline Rows matmul(const Rows& a, const Matrix& w, const Matrix& b) {
  Rows out(a.size(), std::vector<double>(w.cols()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double s = b(0, j);
      for (Eigen::Index k = 0; k < w.rows(); ++k) s += a[i][k] * w(k, j);
      out[i][j] = s;
    }
  }
  return out;
}

inline Rows layer_norm_ref(const Rows& x, const Matrix& gain, const Matrix& bias) {
  Rows out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(x[i].size());
    double mean = 0, var = 0;
    for (double v : x[i]) mean += v;
    mean /= n;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < x[i].size(); ++j) {
      out[i][j] = (x[i][j] - mean) / std::sqrt(var + 1e-5) * gain(0, j) + bias(0, j);
    }
  }
  return out;
}

inline Rows reference_encode(const EncoderParams& p, const EncoderConfig& c, const std::vector<std::int32_t>& ids) {
  const std::size_t L = ids.size(), d = c.d_model, dh = d / c.n_heads;
  Rows x(L, std::vector<double>(d));
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (j / 2)) / static_cast<double>(d));
      const double pe = j % 2 == 0 ? std::sin(static_cast<double>(t) / rate) : std::cos(static_cast<double>(t) / rate);
      x[t][j] = p.embedding(ids[t], j) + pe;
    }
  }
  for (const auto& layer : p.layers) {
    const Rows h = layer_norm_ref(x, layer.ln1_gain, layer.ln1_bias);
    const Rows q = matmul(h, layer.wq, layer.bq), k = matmul(h, layer.wk, layer.bk), v = matmul(h, layer.wv, layer.bv);
    Rows ctx(L, std::vector<double>(d, 0.0));
    for (std::size_t head = 0; head < c.n_heads; ++head) {
      const std::size_t o = head * dh;
      for (std::size_t i = 0; i < L; ++i) {
        std::vector<double> s(L);
        double mx = -1e300;
        for (std::size_t j = 0; j < L; ++j) {
          double dot = 0;
          for (std::size_t e = 0; e < dh; ++e) dot += q[i][o + e] * k[j][o + e];
          s[j] = dot / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, s[j]);
        }
        double z = 0;
        for (auto& sj : s) z += (sj = std::exp(sj - mx));
        for (std::size_t j = 0; j < L; ++j)
          for (std::size_t e = 0; e < dh; ++e) ctx[i][o + e] += s[j] / z * v[j][o + e];
      }
    }
    const Rows attn = matmul(ctx, layer.wo, layer.bo);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < d; ++j) x[i][j] += attn[i][j];
    const Rows h2 = layer_norm_ref(x, layer.ln2_gain, layer.ln2_bias);
    Rows f = matmul(h2, layer.w1, layer.b1);
    for (auto& row : f)
      for (auto& val : row) val = 0.5 * val * (1.0 + std::erf(val / std::sqrt(2.0)));
    const Rows ff = matmul(f, layer.w2, layer.b2);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < d; ++j) x[i][j] += ff[i][j];
  }
  return x;
}

inline EncoderConfig toy_encoder(std::size_t vocab, std::size_t d, std::size_t heads, std::size_t layers,
                                 std::size_t ff, std::size_t window, std::size_t stride) {
  EncoderConfig c;
  c.vocab_size = vocab;
  c.d_model = d;
  c.n_heads = heads;
  c.n_layers = layers;
  c.ff_dim = ff;
  c.max_len = 64;
  c.window = window;
  c.stride = stride;
  c.dropout = 0.0;
  return c;
}

/// Randomizes every trainable tensor so biases and gains are exercised too.
inline void perturb(EncoderParams& p, Rng& rng, double scale = 0.3) {
  for (auto& t : p.tensors()) {
    for (Eigen::Index i = 0; i < t.value->size(); ++i) t.value->data()[i] += rng.uniform(-scale, scale);
  }
}

}  // namespace testing

namespace testing {

/// Analytic vs numeric derivative: relative error below `tol`, or both
/// values negligibly small.
inline bool grad_close(double analytic, double numeric, double tol = 1e-4) {
  const double diff = std::abs(analytic - numeric);
  if (diff < 1e-9) return true;
  return diff / std::max(std::abs(analytic), std::abs(numeric)) < tol;
}

}  // namespace testing
