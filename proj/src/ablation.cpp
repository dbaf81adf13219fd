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

#include <cstdio>

#include "opshield/eval.hpp"

namespace opshield {
namespace {

std::string metric_row(const char* mode, const Metrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", mode, m.accuracy, m.precision, m.recall, m.f1);
  return buf;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<TokenSequence>& data, const RunConfig& config) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no labelled sequences to train on");
  PipelineResult result;
  result.split = split_dataset(data, config.split);
  const EmbeddingModel embed = train_skipgram(result.split.train, config.embed);
  result.trained = train(result.split.train, result.split.val, embed, config.encoder, config.fusion, config.train);
  result.test = evaluate(result.trained.model, result.split.test);
  return result;
}

AblationReport run_ablation(const std::vector<LabeledDump>& corpus, const RunConfig& config) {
  const auto odt = extract_corpus(corpus, config.rules, config.decode, ExtractMode::ODT);
  const auto ost = extract_corpus(corpus, config.rules, config.decode, ExtractMode::OST);

  bool same = odt.size() == ost.size();
  for (std::size_t i = 0; same && i < odt.size(); ++i) same = odt[i].tokens == ost[i].tokens;

  AblationReport report;
  report.odt = run_pipeline(odt, config).test;
  if (same) {
    report.ost = report.odt;
    report.warning = "ODT and OST token sequences are identical; the comparison is void";
  } else {
    report.ost = run_pipeline(ost, config).test;
  }
  report.delta = report.odt.accuracy - report.ost.accuracy;
  return report;
}

std::string ablation_csv(const AblationReport& report) {
  return "mode,accuracy,precision,recall,f1\n" + metric_row("odt", report.odt) + metric_row("ost", report.ost);
}

std::string ablation_table(const AblationReport& report) {
  std::string out = "mode  accuracy  precision  recall  f1\n";
  char buf[128];
  for (const auto& [name, m] : {std::pair{"odt", report.odt}, std::pair{"ost", report.ost}}) {
    std::snprintf(buf, sizeof buf, "%-4s  %8.4f  %9.4f  %6.4f  %6.4f\n", name, m.accuracy, m.precision, m.recall,
                  m.f1);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "delta accuracy: %+.4f\n", report.delta);
  out += buf;
  return out;
}

LambdaSearch run_lambda_search(const std::vector<TokenSequence>& data, const RunConfig& config) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no labelled sequences to train on");
  const DatasetSplit split = split_dataset(data, config.split);
  const EmbeddingModel embed = train_skipgram(split.train, config.embed);
  return grid_search_lambda(config.lambda_grid, split.train, split.val, embed, config.encoder, config.train);
}

}  // namespace opshield
