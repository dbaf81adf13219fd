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

#include "opshield/adamw.hpp"

#include <cmath>

#include "opshield/error.hpp"

namespace opshield {

void AdamWHyper::validate() const {
  if (!(lr > 0)) throw Error(ErrorCode::InvalidConfig, "adamw lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw Error(ErrorCode::InvalidConfig, "adamw betas must be in [0, 1)");
  }
  if (!(eps > 0)) throw Error(ErrorCode::InvalidConfig, "adamw eps must be positive");
  if (!(weight_decay >= 0)) throw Error(ErrorCode::InvalidConfig, "adamw weight_decay must be >= 0");
}

void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamWState& state) {
  if (params.size() != grads.size()) throw Error(ErrorCode::DimMismatch, "parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->array();
    const auto g = grads[i]->array();
    if (g.size() != theta.size()) throw Error(ErrorCode::DimMismatch, "gradient shape mismatch");
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.square();
    theta -= h.lr * ((m / c1) / ((v / c2).sqrt() + h.eps) + h.weight_decay * theta);
  }
}

}  // namespace opshield
