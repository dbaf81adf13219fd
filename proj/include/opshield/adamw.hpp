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

#include <cstddef>
#include <span>
#include <vector>

#include "opshield/tensor.hpp"

namespace opshield {

struct AdamWHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

struct AdamWState {
  std::size_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  AdamWHyper hyper;
};

/// One AdamW update with bias correction and decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
/// Moment buffers are created on the first call.
void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamWState& state);

}  // namespace opshield
