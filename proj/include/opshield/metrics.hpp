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

#include "opshield/odt.hpp"

namespace opshield {

/// Confusion counts with Webshell as the positive class.
struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Metrics&) const = default;
};

/// Throws Error{LengthMismatch} on unequal lengths, Error{EmptyInput} when empty.
Metrics compute_metrics(std::span<const Label> predicted, std::span<const Label> truth);

/// Fills the ratios from the counts (0 whenever a denominator is 0).
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

}  // namespace opshield
