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
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "opshield/adamw.hpp"
#include "opshield/encoder.hpp"
#include "opshield/fasttext.hpp"
#include "opshield/metrics.hpp"

namespace opshield {

/// E = lambda * E_encoder + (1 - lambda) * E_embedder.
struct FusionConfig {
  double lambda = 0.7;

  void validate() const;
};

/// Throws Error{DimMismatch} when the (projected) embedder vector and the
/// encoder vector differ in size. `projection` maps embedder dim -> d_model.
Vector fuse(const Vector& e_enc, const Vector& e_ft, const FusionConfig& config,
            const Matrix* projection = nullptr);

inline constexpr double kProbabilityClamp = 1e-7;

/// Binary cross-entropy with p clamped into [1e-7, 1 - 1e-7].
double bce_loss(double p, int y);
double bce_loss(std::span<const double> p, std::span<const int> y);

/// d_fused -> hidden (GELU) -> 1 (sigmoid).
struct ClassifierHead {
  Matrix w1, b1;  // d_fused x hidden, 1 x hidden
  Matrix w2, b2;  // hidden x 1, 1 x 1

  static ClassifierHead initialize(std::size_t d_fused, std::size_t hidden, Rng& rng);
  static ClassifierHead zeros(std::size_t d_fused, std::size_t hidden);
  std::vector<ParamRef> tensors();
  std::vector<ConstParamRef> tensors() const;
};

struct HeadTrace {
  RowVector input;
  RowVector pre;
  RowVector act;
};

/// Returns the logit.
double head_forward(const ClassifierHead& head, const Vector& fused, HeadTrace* trace = nullptr);
/// Accumulates parameter gradients and returns dLoss/dfused.
Vector head_backward(const ClassifierHead& head, const HeadTrace& trace, double d_logit,
                     ClassifierHead& grads);

/// Derivative of bce_loss(sigmoid(logit), y) w.r.t. the logit; 0 where the
/// probability clamp is active.
double bce_logit_grad(double logit, int y);
double sigmoid(double x);

/// Token -> encoder id. Id 0 is reserved for unknown tokens.
struct TokenVocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, std::int32_t> index;

  static constexpr std::string_view kUnknown = "<unk>";

  /// Tokens seen at least `min_count` times, ordered by count desc then text.
  static TokenVocab build(const std::vector<TokenSequence>& corpus, std::size_t min_count);
  static TokenVocab from_tokens(std::vector<std::string> tokens);
  std::int32_t id(const std::string& token) const;
  std::size_t size() const { return tokens.size(); }
  /// Ids of at most max_len leading tokens.
  std::vector<std::int32_t> encode(std::span<const std::string> tokens, std::size_t max_len) const;
};

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch = 16;
  std::uint64_t seed = 42;
  std::size_t head_hidden = 32;
  std::size_t vocab_min_count = 2;
  AdamWHyper adamw;

  void validate() const;
};

struct TrainedModel {
  EncoderConfig encoder_config;
  EncoderParams encoder;
  ClassifierHead head;
  Matrix projection;  // empty when the embedder dim equals d_model
  FusionConfig fusion;
  TokenVocab vocab;
  EmbeddingModel embed;

  bool has_projection() const { return projection.size() > 0; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_acc = 0;
  double val_f1 = 0;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochRecord> history;
};

/// Builds a model with freshly initialized encoder/head for `train_set`.
TrainedModel initialize_model(const std::vector<TokenSequence>& train_set, const EmbeddingModel& embed,
                              EncoderConfig encoder_config, const FusionConfig& fusion,
                              const TrainConfig& config);

/// Joint training of encoder, head and projection; the embedder stays
/// frozen. Validation metrics are recorded per epoch when val_set is
/// non-empty. Throws EmptyDataset or SingleClassDataset.
TrainResult train(const std::vector<TokenSequence>& train_set, const std::vector<TokenSequence>& val_set,
                  const EmbeddingModel& embed, const EncoderConfig& encoder_config,
                  const FusionConfig& fusion, const TrainConfig& config);

struct Prediction {
  double probability = 0.5;
  Label label = Label::Benign;
};

/// Deterministic forward pass (no dropout). Throws EmptySequence.
Prediction predict(const TrainedModel& model, std::span<const std::string> tokens);

/// Scores every labelled sequence in `data`.
Metrics evaluate(const TrainedModel& model, const std::vector<TokenSequence>& data);

/// Loss and full gradient of one labelled sample (dropout off); used by the
/// training loop tests and gradient checks.
struct ModelGrads {
  EncoderParams encoder;
  ClassifierHead head;
  Matrix projection;
};
ModelGrads zero_grads(const TrainedModel& model);
double sample_loss_and_grad(const TrainedModel& model, std::span<const std::string> tokens, int label,
                            double scale, ModelGrads* grads, Rng* dropout_rng = nullptr);

struct LambdaRow {
  double lambda = 0;
  Metrics val;
};

struct LambdaSearch {
  double best_lambda = 0;
  std::vector<LambdaRow> rows;
};

/// Trains one model per distinct candidate with identical seeds and picks
/// the best validation F1 (ties go to the larger lambda).
LambdaSearch grid_search_lambda(std::vector<double> candidates, const std::vector<TokenSequence>& train_set,
                                const std::vector<TokenSequence>& val_set, const EmbeddingModel& embed,
                                const EncoderConfig& encoder_config, const TrainConfig& config);

// Checkpoint directory: manifest.txt, encoder.swae, head.bin, vocab.txt,
// embed.vec and embed.ftbk. `extra_manifest` is appended to manifest.txt.
void save_model(const TrainedModel& model, const std::filesystem::path& dir,
                const std::string& extra_manifest = {});
TrainedModel load_model(const std::filesystem::path& dir);
std::string read_manifest_value(const std::filesystem::path& dir, const std::string& key);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

}  // namespace opshield
