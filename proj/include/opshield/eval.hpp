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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "opshield/classifier.hpp"
#include "opshield/config.hpp"
#include "opshield/metrics.hpp"
#include "opshield/opdump.hpp"

namespace opshield {

struct LabeledDump {
  std::string source_id;
  OpcodeDump dump;
  Label label = Label::Benign;
};

/// Deterministic synthetic corpus. Benign dumps are ordinary scripts of
/// 20..400 instructions; malicious dumps carry one or two attack motifs at
/// random positions. Benign dumps carry decoys with the same opcode shape,
/// so only operand content tells the classes apart.
std::vector<LabeledDump> gen_corpus(std::uint64_t seed, std::size_t n_benign, std::size_t n_malicious);

/// 1 - total variation distance between the class-conditional opcode
/// unigram distributions.
double opcode_overlap(const std::vector<LabeledDump>& corpus);

/// `<source_id>.odump` per sample plus labels.csv (`source_id,label`).
void write_corpus(const std::filesystem::path& dir, const std::vector<LabeledDump>& corpus);
/// Reads labels.csv and the dumps it lists, in file order.
std::vector<LabeledDump> read_corpus(const std::filesystem::path& dir);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Labelled token sequences; samples that filter to nothing are skipped and
/// their ids appended to `skipped`.
std::vector<TokenSequence> extract_corpus(const std::vector<LabeledDump>& corpus, const FilterRules& rules,
                                          const DecodePolicy& policy, ExtractMode mode,
                                          std::vector<std::string>* skipped = nullptr, std::size_t jobs = 1);

struct PipelineResult {
  DatasetSplit split;
  TrainResult trained;
  Metrics test;
};

/// Split, embed the training part, train with validation, score the test
/// part. Throws EmptyDataset for an empty input.
PipelineResult run_pipeline(const std::vector<TokenSequence>& data, const RunConfig& config);

struct AblationReport {
  Metrics odt;
  Metrics ost;
  double delta = 0;  // accuracy(odt) - accuracy(ost)
  std::optional<std::string> warning;
};

/// Two pipeline runs that differ only in extraction mode.
AblationReport run_ablation(const std::vector<LabeledDump>& corpus, const RunConfig& config);

std::string ablation_csv(const AblationReport& report);
std::string ablation_table(const AblationReport& report);

/// Split and embed as run_pipeline does, then search the config's lambda grid.
LambdaSearch run_lambda_search(const std::vector<TokenSequence>& data, const RunConfig& config);

}  // namespace opshield
