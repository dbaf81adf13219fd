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

#include "opshield/metrics.hpp"

namespace opshield {

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Metrics m{tp, fp, tn, fn};
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(tp + tn, tp + fp + tn + fn);
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

Metrics compute_metrics(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "prediction and label counts differ");
  }
  if (predicted.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred = predicted[i] == Label::Webshell;
    const bool real = truth[i] == Label::Webshell;
    if (pred && real) ++tp;
    else if (pred) ++fp;
    else if (real) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

}  // namespace opshield
