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

#include "opshield/encoder.hpp"

#include <cmath>
#include <map>

#include "opshield/tensor_io.hpp"

namespace opshield {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr std::uint32_t kEncoderFormatVersion = 1;

void layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, Matrix& hat,
                RowVector& inv_std, Matrix& out) {
  const auto n = x.rows();
  const auto d = static_cast<double>(x.cols());
  hat.resize(n, x.cols());
  inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mean = x.row(i).sum() / d;
    double var = (x.row(i).array() - mean).square().sum() / d;
    double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std(i) = is;
    hat.row(i) = (x.row(i).array() - mean) * is;
  }
  out = (hat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? 0.0 : scale;
  return mask;
}

Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

Matrix run_window(const EncoderParams& params, const EncoderConfig& config, Matrix x,
                  WindowTrace* trace, Rng* dropout_rng, std::size_t& max_score_rows) {
  const auto dk = static_cast<Eigen::Index>(config.head_dim());
  const bool use_dropout = dropout_rng && config.dropout > 0.0;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const auto& p = params.layers[l];
    LayerTrace t;
    t.input = x;
    layer_norm(x, p.ln1_gain, p.ln1_bias, t.ln1_hat, t.ln1_inv_std, t.ln1_out);
    t.q = (t.ln1_out * p.wq).rowwise() + p.bq.row(0);
    t.k = (t.ln1_out * p.wk).rowwise() + p.bk.row(0);
    t.v = (t.ln1_out * p.wv).rowwise() + p.bv.row(0);
    t.context.resize(x.rows(), x.cols());
    t.probs.resize(config.n_heads);
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h) * dk;
      Matrix qh = t.q.middleCols(c0, dk);
      Matrix kh = t.k.middleCols(c0, dk);
      Matrix vh = t.v.middleCols(c0, dk);
      t.context.middleCols(c0, dk) = attention(qh, kh, vh, &t.probs[h]);
      max_score_rows = std::max(max_score_rows, static_cast<std::size_t>(t.probs[h].rows()));
    }
    Matrix attn = (t.context * p.wo).rowwise() + p.bo.row(0);
    if (use_dropout) {
      t.drop1 = dropout_mask(attn.rows(), attn.cols(), config.dropout, *dropout_rng);
      attn.array() *= t.drop1.array();
    }
    t.mid = x + attn;
    layer_norm(t.mid, p.ln2_gain, p.ln2_bias, t.ln2_hat, t.ln2_inv_std, t.ln2_out);
    t.ff_pre = (t.ln2_out * p.w1).rowwise() + p.b1.row(0);
    t.ff_act = t.ff_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix ff = (t.ff_act * p.w2).rowwise() + p.b2.row(0);
    if (use_dropout) {
      t.drop2 = dropout_mask(ff.rows(), ff.cols(), config.dropout, *dropout_rng);
      ff.array() *= t.drop2.array();
    }
    x = t.mid + ff;
    if (trace) trace->layers.push_back(std::move(t));
  }
  return x;
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
  return cdf + x * pdf;
}

void EncoderConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (window < 1) fail("window size must be >= 1");
  if (stride >= window) fail("stride must be strictly less than the window size");
  if (stride < 1) fail("stride must be >= 1");
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) fail("d_model must be a positive multiple of n_heads");
  if (ff_dim < 1) fail("ff_dim must be >= 1");
  if (max_len < 1) fail("max_len must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

WindowLayout window_layout(std::size_t seq_len, std::size_t window, std::size_t stride) {
  if (window < 1 || stride < 1 || stride >= window) {
    throw Error(ErrorCode::InvalidConfig, "window layout needs 1 <= stride < window");
  }
  if (seq_len < 1) throw Error(ErrorCode::InvalidConfig, "window layout needs seq_len >= 1");
  WindowLayout layout{{0}, window, seq_len};
  if (seq_len <= window) return layout;
  const std::size_t last = (seq_len - window + stride - 1) / stride;
  for (std::size_t k = 1; k <= last; ++k) layout.starts.push_back(k * stride);
  return layout;
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix scores = (q * k.transpose()) * scale;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    double m = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - m).exp();
    scores.row(i) /= scores.row(i).sum();
  }
  Matrix out = scores * v;
  if (weights) *weights = std::move(scores);
  return out;
}

Matrix sinusoidal_positions(std::size_t max_len, std::size_t d_model) {
  Matrix pe(static_cast<Eigen::Index>(max_len), static_cast<Eigen::Index>(d_model));
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double exponent = static_cast<double>(i - i % 2) / static_cast<double>(d_model);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(i)) =
          i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

EncoderParams EncoderParams::zeros(const EncoderConfig& config) {
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto f = static_cast<Eigen::Index>(config.ff_dim);
  EncoderParams p;
  p.embedding = Matrix::Zero(static_cast<Eigen::Index>(config.vocab_size), d);
  p.layers.resize(config.n_layers);
  for (auto& l : p.layers) {
    l.wq = l.wk = l.wv = l.wo = Matrix::Zero(d, d);
    l.bq = l.bk = l.bv = l.bo = Matrix::Zero(1, d);
    l.ln1_gain = l.ln1_bias = l.ln2_gain = l.ln2_bias = Matrix::Zero(1, d);
    l.w1 = Matrix::Zero(d, f);
    l.b1 = Matrix::Zero(1, f);
    l.w2 = Matrix::Zero(f, d);
    l.b2 = Matrix::Zero(1, d);
  }
  return p;
}

EncoderParams EncoderParams::initialize(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto f = static_cast<Eigen::Index>(config.ff_dim);
  EncoderParams p = zeros(config);
  const double bound = std::sqrt(3.0);
  for (Eigen::Index i = 0; i < p.embedding.size(); ++i) p.embedding.data()[i] = rng.uniform(-bound, bound);
  for (auto& l : p.layers) {
    l.wq = xavier(d, d, rng);
    l.wk = xavier(d, d, rng);
    l.wv = xavier(d, d, rng);
    l.wo = xavier(d, d, rng);
    l.ln1_gain.setOnes();
    l.ln2_gain.setOnes();
    l.w1 = xavier(d, f, rng);
    l.w2 = xavier(f, d, rng);
  }
  p.positions = sinusoidal_positions(config.max_len, config.d_model);
  return p;
}

namespace {

template <typename Ref, typename Params>
std::vector<Ref> collect_tensors(Params& p) {
  std::vector<Ref> out;
  out.push_back({"embedding", &p.embedding, 2});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layer" + std::to_string(i) + ".";
    out.push_back({pre + "wq", &l.wq, 2});
    out.push_back({pre + "bq", &l.bq, 1});
    out.push_back({pre + "wk", &l.wk, 2});
    out.push_back({pre + "bk", &l.bk, 1});
    out.push_back({pre + "wv", &l.wv, 2});
    out.push_back({pre + "bv", &l.bv, 1});
    out.push_back({pre + "wo", &l.wo, 2});
    out.push_back({pre + "bo", &l.bo, 1});
    out.push_back({pre + "ln1_gain", &l.ln1_gain, 1});
    out.push_back({pre + "ln1_bias", &l.ln1_bias, 1});
    out.push_back({pre + "ln2_gain", &l.ln2_gain, 1});
    out.push_back({pre + "ln2_bias", &l.ln2_bias, 1});
    out.push_back({pre + "w1", &l.w1, 2});
    out.push_back({pre + "b1", &l.b1, 1});
    out.push_back({pre + "w2", &l.w2, 2});
    out.push_back({pre + "b2", &l.b2, 1});
  }
  return out;
}

}  // namespace

std::vector<ParamRef> EncoderParams::tensors() { return collect_tensors<ParamRef>(*this); }

std::vector<ConstParamRef> EncoderParams::tensors() const {
  return collect_tensors<ConstParamRef>(*this);
}

void EncoderParams::set_zero() {
  for (auto& t : tensors()) t.value->setZero();
}

std::vector<Matrix> encode(const EncoderParams& params, const EncoderConfig& config,
                           std::span<const std::int32_t> ids, EncoderTape* tape, Rng* dropout_rng) {
  if (ids.empty()) throw Error(ErrorCode::EmptySequence, "cannot encode an empty sequence");
  if (ids.size() > config.max_len) {
    throw Error(ErrorCode::SequenceTooLong, "sequence of " + std::to_string(ids.size()) +
                                                " tokens exceeds max_len " + std::to_string(config.max_len));
  }
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw Error(ErrorCode::TokenOutOfRange, "token id " + std::to_string(id) + " out of range");
    }
  }
  const auto layout = window_layout(ids.size(), config.window, config.stride);
  const auto d = static_cast<Eigen::Index>(config.d_model);
  if (tape) {
    tape->layout = layout;
    tape->windows.clear();
    tape->max_score_rows = 0;
  }
  std::size_t max_rows = 0;
  std::vector<Matrix> hiddens;
  hiddens.reserve(layout.size());
  for (std::size_t w = 0; w < layout.size(); ++w) {
    const std::size_t begin = layout.begin(w);
    const auto n = static_cast<Eigen::Index>(layout.length(w));
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t pos = begin + static_cast<std::size_t>(i);
      x.row(i) = params.embedding.row(ids[pos]) + params.positions.row(static_cast<Eigen::Index>(pos));
    }
    WindowTrace* trace = nullptr;
    if (tape) {
      tape->windows.emplace_back();
      trace = &tape->windows.back();
      trace->ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                        ids.begin() + static_cast<std::ptrdiff_t>(begin + layout.length(w)));
      trace->offset = begin;
    }
    hiddens.push_back(run_window(params, config, std::move(x), trace, dropout_rng, max_rows));
  }
  if (tape) tape->max_score_rows = max_rows;
  return hiddens;
}

Vector pool_global(const std::vector<Matrix>& window_hiddens, const WindowLayout& layout, PoolMode mode) {
  (void)layout;
  const auto d = window_hiddens.front().cols();
  Vector out = Vector::Zero(d);
  if (mode == PoolMode::TokenMean) {
    Eigen::Index rows = 0;
    for (const auto& h : window_hiddens) {
      out += h.colwise().sum().transpose();
      rows += h.rows();
    }
    return out / static_cast<double>(rows);
  }
  for (const auto& h : window_hiddens) out += h.colwise().mean().transpose();
  return out / static_cast<double>(window_hiddens.size());
}

std::string encoder_config_text(const EncoderConfig& c) {
  std::string s;
  auto kv = [&s](const char* k, const std::string& v) { s += std::string(k) + "=" + v + "\n"; };
  kv("vocab_size", std::to_string(c.vocab_size));
  kv("d_model", std::to_string(c.d_model));
  kv("n_heads", std::to_string(c.n_heads));
  kv("n_layers", std::to_string(c.n_layers));
  kv("ff_dim", std::to_string(c.ff_dim));
  kv("max_len", std::to_string(c.max_len));
  kv("window", std::to_string(c.window));
  kv("stride", std::to_string(c.stride));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", c.dropout);
  kv("dropout", buf);
  kv("pool", c.pool == PoolMode::WindowMean ? "window_mean" : "token_mean");
  return s;
}

EncoderConfig parse_encoder_config_text(std::string_view text) {
  std::map<std::string, std::string> kv;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError(0, "bad encoder config line");
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  auto get = [&kv](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(0, std::string("encoder config missing ") + key);
    return it->second;
  };
  EncoderConfig c;
  try {
    c.vocab_size = std::stoul(get("vocab_size"));
    c.d_model = std::stoul(get("d_model"));
    c.n_heads = std::stoul(get("n_heads"));
    c.n_layers = std::stoul(get("n_layers"));
    c.ff_dim = std::stoul(get("ff_dim"));
    c.max_len = std::stoul(get("max_len"));
    c.window = std::stoul(get("window"));
    c.stride = std::stoul(get("stride"));
    c.dropout = std::stod(get("dropout"));
  } catch (const std::logic_error&) {
    throw FormatError(0, "invalid number in encoder config");
  }
  const auto& pool = get("pool");
  if (pool == "window_mean") {
    c.pool = PoolMode::WindowMean;
  } else if (pool == "token_mean") {
    c.pool = PoolMode::TokenMean;
  } else {
    throw FormatError(0, "unknown pool mode " + pool);
  }
  c.validate();
  return c;
}

std::string save_encoder(const EncoderParams& params, const EncoderConfig& config) {
  BinaryWriter w;
  w.bytes("SWAE");
  w.u32(kEncoderFormatVersion);
  w.str(encoder_config_text(config));
  for (const auto& t : params.tensors()) w.tensor(t.name, *t.value, t.rank);
  return w.take();
}

void load_encoder(std::string_view bytes, EncoderParams& params, EncoderConfig& config) {
  BinaryReader r(bytes);
  if (r.bytes(4) != "SWAE") throw FormatError(0, "bad encoder checkpoint magic");
  if (r.u32() != kEncoderFormatVersion) throw FormatError(0, "unsupported encoder checkpoint version");
  config = parse_encoder_config_text(r.str());
  params = EncoderParams::zeros(config);
  for (auto& t : params.tensors()) r.tensor(t.name, *t.value);
  if (!r.done()) throw FormatError(0, "trailing bytes in encoder checkpoint");
  params.positions = sinusoidal_positions(config.max_len, config.d_model);
}

}  // namespace opshield
