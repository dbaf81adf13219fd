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

#include <string>
#include <string_view>
#include <vector>

#include "opshield/classifier.hpp"
#include "opshield/odt.hpp"
#include "opshield/split.hpp"

namespace opshield {

/// Every tunable of the pipeline. Loaded from flat `key = value` text with
/// `#` comments; unknown keys and out-of-range values are rejected.
struct RunConfig {
  FilterRules rules = FilterRules::defaults();
  DecodePolicy decode;
  ExtractMode mode = ExtractMode::ODT;
  SubwordConfig embed;
  EncoderConfig encoder;
  FusionConfig fusion;
  TrainConfig train;
  SplitSpec split;
  std::vector<double> lambda_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  /// Throws Error{InvalidConfig} for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  void validate() const;
  /// Canonical text, one `key = value` per line in keys() order.
  std::string to_text() const;
  static RunConfig from_text(std::string_view text);
  /// Applies `key = value` lines on top of the current values.
  void merge_text(std::string_view text);

  /// Sets the embedder, training and split seeds together.
  void set_seed(std::uint64_t seed);
};

std::vector<double> parse_double_list(std::string_view text);

}  // namespace opshield
