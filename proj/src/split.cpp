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

#include "opshield/split.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "opshield/rng.hpp"

namespace opshield {
namespace {

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  const std::array<double, 3> ratios{spec.train, spec.val, spec.test};
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    sizes[i] = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[i] + 1e-9));
    assigned += sizes[i];
  }
  const auto largest = static_cast<std::size_t>(std::max_element(ratios.begin(), ratios.end()) - ratios.begin());
  sizes[largest] += n - std::min(n, assigned);
  return sizes;
}

}  // namespace

void SplitSpec::validate() const {
  if (!(train > 0 && val > 0 && test > 0)) throw Error(ErrorCode::InvalidConfig, "split ratios must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw Error(ErrorCode::InvalidConfig, "split ratios must sum to 1");
}

SplitIndices split_indices(std::span<const Label> labels, const SplitSpec& spec) {
  spec.validate();
  if (labels.size() < 3) throw Error(ErrorCode::TooFewSamples, "need at least 3 samples to split");

  std::vector<std::vector<std::size_t>> groups;
  if (spec.stratified) {
    groups.resize(2);
    for (std::size_t i = 0; i < labels.size(); ++i) groups[static_cast<int>(labels[i])].push_back(i);
    if (groups[0].empty() || groups[1].empty()) {
      throw Error(ErrorCode::SingleClassDataset, "stratified split needs both classes");
    }
  } else {
    groups.emplace_back(labels.size());
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }

  SplitIndices out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.val, &out.test};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& items = groups[g];
    Rng rng = Rng::derive(spec.seed, g);
    rng.shuffle(items);
    const auto sizes = split_sizes(items.size(), spec);
    std::size_t pos = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      parts[p]->insert(parts[p]->end(), items.begin() + static_cast<std::ptrdiff_t>(pos),
                       items.begin() + static_cast<std::ptrdiff_t>(pos + sizes[p]));
      pos += sizes[p];
    }
  }
  // Never leave a split empty: borrow the last item of the largest one.
  for (auto* part : parts) {
    if (!part->empty()) continue;
    auto* donor = *std::max_element(parts.begin(), parts.end(),
                                    [](const auto* a, const auto* b) { return a->size() < b->size(); });
    part->push_back(donor->back());
    donor->pop_back();
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<TokenSequence>& samples, const SplitSpec& spec) {
  std::vector<Label> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.label) throw Error(ErrorCode::InvalidConfig, "cannot split unlabelled sample " + s.source_id);
    labels.push_back(*s.label);
  }
  const auto idx = split_indices(labels, spec);
  DatasetSplit out;
  for (auto i : idx.train) out.train.push_back(samples[i]);
  for (auto i : idx.val) out.val.push_back(samples[i]);
  for (auto i : idx.test) out.test.push_back(samples[i]);
  return out;
}

}  // namespace opshield
