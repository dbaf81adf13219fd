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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "opshield/error.hpp"
#include "opshield/rng.hpp"
#include "opshield/tensor.hpp"

namespace opshield {

enum class PoolMode {
  WindowMean,  // mean within each window, then mean across windows
  TokenMean,   // mean over every window row; overlapped tokens count more
};

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t ff_dim = 128;
  std::size_t max_len = 2048;
  std::size_t window = 128;  // W
  std::size_t stride = 64;   // Sr, strictly less than W
  double dropout = 0.1;
  PoolMode pool = PoolMode::WindowMean;

  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }
};

/// Start offsets of overlapping windows over a sequence. Window k spans
/// [starts[k], min(starts[k] + window, seq_len)).
struct WindowLayout {
  std::vector<std::size_t> starts;
  std::size_t window = 0;
  std::size_t seq_len = 0;

  std::size_t size() const { return starts.size(); }
  std::size_t begin(std::size_t k) const { return starts[k]; }
  std::size_t end(std::size_t k) const { return std::min(starts[k] + window, seq_len); }
  std::size_t length(std::size_t k) const { return end(k) - begin(k); }
};

/// Throws Error{InvalidConfig} when stride >= window or seq_len == 0.
WindowLayout window_layout(std::size_t seq_len, std::size_t window, std::size_t stride);

/// softmax(q k^T / sqrt(d_k)) v with a row-wise softmax. `weights`, when
/// given, receives the softmax matrix.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights = nullptr);

/// Fixed sinusoidal table: PE(p, 2i) = sin(p / 10000^(2i/d)),
/// PE(p, 2i+1) = cos(p / 10000^(2i/d)).
Matrix sinusoidal_positions(std::size_t max_len, std::size_t d_model);

struct LayerParams {
  Matrix wq, wk, wv, wo;   // d_model x d_model
  Matrix bq, bk, bv, bo;   // 1 x d_model
  Matrix ln1_gain, ln1_bias;
  Matrix ln2_gain, ln2_bias;
  Matrix w1, b1;           // d_model x ff_dim, 1 x ff_dim
  Matrix w2, b2;           // ff_dim x d_model, 1 x d_model
};

struct ParamRef {
  std::string name;
  Matrix* value;
  std::uint32_t rank;  // on-disk rank: 1 for bias/gain vectors
};

struct ConstParamRef {
  std::string name;
  const Matrix* value;
  std::uint32_t rank;
};

struct EncoderParams {
  Matrix embedding;  // vocab_size x d_model
  Matrix positions;  // max_len x d_model, fixed (not trained, not saved)
  std::vector<LayerParams> layers;

  /// Xavier-uniform projections, unit-variance embeddings, zero biases and
  /// unit layer-norm gains.
  static EncoderParams initialize(const EncoderConfig& config, Rng& rng);
  /// Zero tensors shaped like the trainable parameters of `config`.
  static EncoderParams zeros(const EncoderConfig& config);

  /// Trainable tensors in checkpoint order: embedding, then per layer
  /// wq bq wk bk wv bv wo bo ln1_gain ln1_bias ln2_gain ln2_bias w1 b1 w2 b2.
  std::vector<ParamRef> tensors();
  std::vector<ConstParamRef> tensors() const;
  void set_zero();
};

/// Per-window activations kept for the backward pass.
struct LayerTrace {
  Matrix input;                  // x entering the block
  Matrix ln1_hat;                // normalized (pre-gain) LN1 input
  RowVector ln1_inv_std;         // one entry per row, stored as row vector
  Matrix ln1_out;
  Matrix q, k, v;
  std::vector<Matrix> probs;     // per head softmax
  Matrix context;                // concatenated head outputs
  Matrix drop1;                  // dropout mask (scaled), empty when off
  Matrix mid;                    // x after the attention residual
  Matrix ln2_hat;
  RowVector ln2_inv_std;
  Matrix ln2_out;
  Matrix ff_pre;                 // before GELU
  Matrix ff_act;                 // after GELU
  Matrix drop2;
};

struct WindowTrace {
  std::vector<std::int32_t> ids;
  std::size_t offset = 0;
  std::vector<LayerTrace> layers;
};

struct EncoderTape {
  WindowLayout layout;
  std::vector<WindowTrace> windows;
  std::size_t max_score_rows = 0;  // largest attention score matrix built
};

/// Runs the encoder over every window of `ids` independently and returns the
/// last hidden state of each window (rows = window length). Dropout is
/// applied only when `dropout_rng` is non-null and config.dropout > 0.
/// Throws TokenOutOfRange or SequenceTooLong.
std::vector<Matrix> encode(const EncoderParams& params, const EncoderConfig& config,
                           std::span<const std::int32_t> ids, EncoderTape* tape = nullptr,
                           Rng* dropout_rng = nullptr);

Vector pool_global(const std::vector<Matrix>& window_hiddens, const WindowLayout& layout,
                   PoolMode mode = PoolMode::WindowMean);

/// Accumulates dLoss/dparams into `grads` given dLoss/dpooled for a sequence
/// whose forward pass was recorded in `tape`.
void encoder_backward(const EncoderParams& params, const EncoderConfig& config,
                      const EncoderTape& tape, const Vector& d_pooled, EncoderParams& grads);

struct EncoderExample {
  std::vector<std::int32_t> ids;
  Vector upstream;  // dLoss / d pooled vector
};

/// Sum over the batch of parameter gradients (dropout disabled).
void encoder_grad(const EncoderParams& params, const EncoderConfig& config,
                  std::span<const EncoderExample> batch, EncoderParams& grads);

// SWAE checkpoint: "SWAE", u32 version, length-prefixed key=value config,
// then every tensor of EncoderParams::tensors() in order.
std::string save_encoder(const EncoderParams& params, const EncoderConfig& config);
void load_encoder(std::string_view bytes, EncoderParams& params, EncoderConfig& config);

std::string encoder_config_text(const EncoderConfig& config);
EncoderConfig parse_encoder_config_text(std::string_view text);

double gelu(double x);
double gelu_grad(double x);

}  // namespace opshield
