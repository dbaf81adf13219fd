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
#include <vector>

#include "opshield/odt.hpp"

namespace opshield {

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 42;
  bool stratified = true;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

struct DatasetSplit {
  std::vector<TokenSequence> train, val, test;
};

/// Seeded shuffle, then per-split sizes floor(n * ratio) with the remainder
/// going to the largest split; every split gets at least one item. In
/// stratified mode each class is split separately and the parts are merged.
/// Throws TooFewSamples below 3 items.
SplitIndices split_indices(std::span<const Label> labels, const SplitSpec& spec);

/// Samples must be labelled. Partitions are disjoint and exhaustive.
DatasetSplit split_dataset(const std::vector<TokenSequence>& samples, const SplitSpec& spec);

}  // namespace opshield
