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

#include <cmath>

#include "opshield/encoder.hpp"

namespace opshield {
namespace {

// Backward of y = hat * gain + bias with hat = (x - mean) * inv_std.
Matrix layer_norm_backward(const Matrix& dy, const Matrix& hat, const RowVector& inv_std,
                           const Matrix& gain, Matrix& d_gain, Matrix& d_bias) {
  d_gain.row(0) += (dy.array() * hat.array()).colwise().sum().matrix();
  d_bias.row(0) += dy.colwise().sum();
  Matrix dhat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_dhat = dhat.row(i).mean();
    const double mean_dhat_hat = dhat.row(i).dot(hat.row(i)) / static_cast<double>(dy.cols());
    dx.row(i) = inv_std(i) * (dhat.row(i).array() - mean_dhat - hat.row(i).array() * mean_dhat_hat).matrix();
  }
  return dx;
}

void window_backward(const EncoderParams& params, const EncoderConfig& config, const WindowTrace& trace,
                     Matrix dx, EncoderParams& grads) {
  const auto dk = static_cast<Eigen::Index>(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (std::size_t li = config.n_layers; li-- > 0;) {
    const auto& p = params.layers[li];
    const auto& t = trace.layers[li];
    auto& g = grads.layers[li];

    // x_out = mid + dropout(ff_act * w2 + b2)
    Matrix dmid = dx;
    Matrix dff = dx;
    if (t.drop2.size()) dff.array() *= t.drop2.array();
    g.w2.noalias() += t.ff_act.transpose() * dff;
    g.b2.row(0) += dff.colwise().sum();
    Matrix dpre = dff * p.w2.transpose();
    dpre.array() *= t.ff_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    g.w1.noalias() += t.ln2_out.transpose() * dpre;
    g.b1.row(0) += dpre.colwise().sum();
    Matrix dln2 = dpre * p.w1.transpose();
    dmid += layer_norm_backward(dln2, t.ln2_hat, t.ln2_inv_std, p.ln2_gain, g.ln2_gain, g.ln2_bias);

    // mid = x_in + dropout(context * wo + bo)
    Matrix dx_in = dmid;
    Matrix dattn = dmid;
    if (t.drop1.size()) dattn.array() *= t.drop1.array();
    g.wo.noalias() += t.context.transpose() * dattn;
    g.bo.row(0) += dattn.colwise().sum();
    Matrix dcontext = dattn * p.wo.transpose();

    Matrix dq(t.q.rows(), t.q.cols());
    Matrix dk_all(t.k.rows(), t.k.cols());
    Matrix dv(t.v.rows(), t.v.cols());
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h) * dk;
      const Matrix& prob = t.probs[h];
      Matrix dctx = dcontext.middleCols(c0, dk);
      Matrix dprob = dctx * t.v.middleCols(c0, dk).transpose();
      dv.middleCols(c0, dk) = prob.transpose() * dctx;
      Eigen::VectorXd row_dot = (dprob.array() * prob.array()).rowwise().sum();
      Matrix dscore = (prob.array() * (dprob.array().colwise() - row_dot.array())) * scale;
      dq.middleCols(c0, dk) = dscore * t.k.middleCols(c0, dk);
      dk_all.middleCols(c0, dk) = dscore.transpose() * t.q.middleCols(c0, dk);
    }
    g.wq.noalias() += t.ln1_out.transpose() * dq;
    g.wk.noalias() += t.ln1_out.transpose() * dk_all;
    g.wv.noalias() += t.ln1_out.transpose() * dv;
    g.bq.row(0) += dq.colwise().sum();
    g.bk.row(0) += dk_all.colwise().sum();
    g.bv.row(0) += dv.colwise().sum();
    Matrix dln1 = dq * p.wq.transpose() + dk_all * p.wk.transpose() + dv * p.wv.transpose();
    dx_in += layer_norm_backward(dln1, t.ln1_hat, t.ln1_inv_std, p.ln1_gain, g.ln1_gain, g.ln1_bias);
    dx = std::move(dx_in);
  }
  for (std::size_t i = 0; i < trace.ids.size(); ++i) {
    grads.embedding.row(trace.ids[i]) += dx.row(static_cast<Eigen::Index>(i));
  }
}

}  // namespace

void encoder_backward(const EncoderParams& params, const EncoderConfig& config, const EncoderTape& tape,
                      const Vector& d_pooled, EncoderParams& grads) {
  const auto& layout = tape.layout;
  std::size_t total_rows = 0;
  for (std::size_t w = 0; w < layout.size(); ++w) total_rows += layout.length(w);
  for (std::size_t w = 0; w < layout.size(); ++w) {
    const auto n = static_cast<Eigen::Index>(layout.length(w));
    const double weight = config.pool == PoolMode::WindowMean
                              ? 1.0 / (static_cast<double>(layout.size()) * static_cast<double>(n))
                              : 1.0 / static_cast<double>(total_rows);
    Matrix dx = (weight * d_pooled.transpose()).replicate(n, 1);
    window_backward(params, config, tape.windows[w], std::move(dx), grads);
  }
}

void encoder_grad(const EncoderParams& params, const EncoderConfig& config,
                  std::span<const EncoderExample> batch, EncoderParams& grads) {
  EncoderTape tape;
  for (const auto& ex : batch) {
    encode(params, config, ex.ids, &tape, nullptr);
    encoder_backward(params, config, tape, ex.upstream, grads);
  }
}

}  // namespace opshield
