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
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "opshield/odt.hpp"
#include "opshield/tensor.hpp"

namespace opshield {

struct SubwordConfig {
  int minn = 3;
  int maxn = 5;
  std::size_t buckets = 100000;
  std::size_t dim = 64;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.05;
  std::uint64_t seed = 42;

  void validate() const;
};

struct VocabEntry {
  std::string token;
  std::uint64_t count = 0;
};

/// Subword skip-gram parameters. Rows [0, vocab_size) of `input` are word
/// vectors, rows [vocab_size, vocab_size + buckets) are hashed n-gram
/// vectors. `output` holds one context vector per vocabulary word and is
/// empty for models restored from a .vec file.
struct EmbeddingModel {
  SubwordConfig config;
  std::vector<VocabEntry> vocab;
  std::unordered_map<std::string, std::int32_t> index;
  Matrix input;
  Matrix output;

  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t dim() const { return config.dim; }
  std::int32_t find(std::string_view token) const;

  /// Input-table rows composing a token: its word row when in vocabulary,
  /// followed by the bucket row of every character n-gram.
  std::vector<std::int32_t> subword_rows(std::string_view token) const;

  /// Builds the vocabulary (count desc, then token asc) and initializes the
  /// tables: input uniform in [-1/dim, 1/dim], output zero.
  static EmbeddingModel initialize(const std::vector<TokenSequence>& corpus,
                                   const SubwordConfig& config);
};

/// Character n-grams of "<token>" with lengths in [minn, maxn], ordered by
/// start position then length, followed by the whole wrapped token. The
/// wrapped token is emitted once even when it also fits the length range.
std::vector<std::string> char_ngrams(std::string_view token, int minn, int maxn);

/// 32-bit FNV-1a of the bytes, reduced modulo `buckets`.
std::uint32_t fnv1a32(std::string_view bytes);
std::uint32_t hash_ngram(std::string_view ngram, std::uint64_t buckets);

Vector token_vector(const EmbeddingModel& model, std::string_view token);
Vector doc_vector(const EmbeddingModel& model, std::span<const std::string> tokens);

/// Negative-sampling loss of one (center, context) pair:
///   -log s(u_ctx . h) - sum_k log s(-u_neg_k . h),  h = mean of input rows.
/// When the gradient pointers are non-null, the gradients with respect to
/// the input and output tables are accumulated into them (same shapes).
double skipgram_pair_loss(const EmbeddingModel& model, std::span<const std::int32_t> input_rows,
                          std::int32_t context, std::span<const std::int32_t> negatives,
                          Matrix* grad_input = nullptr, Matrix* grad_output = nullptr);

struct SkipgramStats {
  std::vector<double> epoch_loss;  // mean pair loss per epoch
};

/// Single-threaded SGD with linearly decaying learning rate. Same corpus,
/// config and seed give bit-identical tables.
EmbeddingModel train_skipgram(const std::vector<TokenSequence>& corpus, const SubwordConfig& config,
                              SkipgramStats* stats = nullptr);

// `.vec` text: "<count> <dim>" then "token v1 .. vdim" (6 decimals) for the
// word rows of the input table. Tokens are escaped with escape_token().
std::string save_vec(const EmbeddingModel& model);
// Bucket sidecar: "FTBK", u32 buckets, u32 dim, u32 reserved, then
// little-endian float32 rows.
std::string save_buckets(const EmbeddingModel& model);

/// Restores the vocabulary and word rows. The bucket rows stay zero until
/// load_buckets() fills them.
EmbeddingModel load_vec(std::string_view text, const SubwordConfig& config);
void load_buckets(std::string_view bytes, EmbeddingModel& model);

}  // namespace opshield
