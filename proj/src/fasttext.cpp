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

#include "opshield/fasttext.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "opshield/rng.hpp"

namespace opshield {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// -log(sigmoid(x)) without overflow.
double neg_log_sigmoid(double x) {
  return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

// Byte offsets of UTF-8 character starts, plus the end offset.
std::vector<std::size_t> char_offsets(std::string_view s) {
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xc0) != 0x80) offsets.push_back(i);
  }
  offsets.push_back(s.size());
  return offsets;
}

class NegativeSampler {
 public:
  explicit NegativeSampler(const std::vector<VocabEntry>& vocab) {
    double total = 0.0;
    cumulative_.reserve(vocab.size());
    for (const auto& e : vocab) {
      total += std::pow(static_cast<double>(e.count), 0.75);
      cumulative_.push_back(total);
    }
  }

  std::int32_t draw(Rng& rng, std::int32_t avoid) const {
    const auto n = static_cast<std::int32_t>(cumulative_.size());
    for (int attempt = 0; attempt < 64; ++attempt) {
      double u = rng.uniform() * cumulative_.back();
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      auto id = static_cast<std::int32_t>(std::min<std::ptrdiff_t>(it - cumulative_.begin(), n - 1));
      if (id != avoid || n == 1) return id;
    }
    return avoid;
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace

void SubwordConfig::validate() const {
  if (minn < 2 || maxn < minn) throw Error(ErrorCode::InvalidConfig, "subword n-gram bounds need 2 <= minn <= maxn");
  if (buckets < 1) throw Error(ErrorCode::InvalidConfig, "buckets must be >= 1");
  if (dim < 1) throw Error(ErrorCode::InvalidConfig, "embedding dim must be >= 1");
  if (window < 1) throw Error(ErrorCode::InvalidConfig, "context window must be >= 1");
  if (!(lr > 0)) throw Error(ErrorCode::InvalidConfig, "embedding lr must be positive");
}

std::int32_t EmbeddingModel::find(std::string_view token) const {
  auto it = index.find(std::string(token));
  return it == index.end() ? -1 : it->second;
}

std::vector<std::int32_t> EmbeddingModel::subword_rows(std::string_view token) const {
  std::vector<std::int32_t> rows;
  if (auto id = find(token); id >= 0) rows.push_back(id);
  const auto offset = static_cast<std::int32_t>(vocab.size());
  for (const auto& gram : char_ngrams(token, config.minn, config.maxn)) {
    rows.push_back(offset + static_cast<std::int32_t>(hash_ngram(gram, config.buckets)));
  }
  return rows;
}

EmbeddingModel EmbeddingModel::initialize(const std::vector<TokenSequence>& corpus,
                                          const SubwordConfig& config) {
  config.validate();
  std::map<std::string, std::uint64_t> counts;
  for (const auto& seq : corpus) {
    for (const auto& tok : seq.tokens) ++counts[tok];
  }
  EmbeddingModel model;
  model.config = config;
  model.vocab.reserve(counts.size());
  for (auto& [tok, n] : counts) model.vocab.push_back({tok, n});
  std::stable_sort(model.vocab.begin(), model.vocab.end(),
                   [](const VocabEntry& a, const VocabEntry& b) { return a.count > b.count; });
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    model.index.emplace(model.vocab[i].token, static_cast<std::int32_t>(i));
  }

  const auto rows = static_cast<Eigen::Index>(model.vocab.size() + config.buckets);
  const auto dim = static_cast<Eigen::Index>(config.dim);
  model.input.resize(rows, dim);
  Rng rng(config.seed);
  const double bound = 1.0 / static_cast<double>(config.dim);
  for (Eigen::Index i = 0; i < model.input.size(); ++i) {
    model.input.data()[i] = rng.uniform(-bound, bound);
  }
  model.output = Matrix::Zero(static_cast<Eigen::Index>(model.vocab.size()), dim);
  return model;
}

std::vector<std::string> char_ngrams(std::string_view token, int minn, int maxn) {
  const std::string wrapped = "<" + std::string(token) + ">";
  const auto offsets = char_offsets(wrapped);
  const std::size_t nchars = offsets.size() - 1;
  std::vector<std::string> grams;
  for (std::size_t start = 0; start < nchars; ++start) {
    for (int len = minn; len <= maxn; ++len) {
      std::size_t end = start + static_cast<std::size_t>(len);
      if (end > nchars) break;
      if (start == 0 && end == nchars) continue;
      grams.push_back(wrapped.substr(offsets[start], offsets[end] - offsets[start]));
    }
  }
  grams.push_back(wrapped);
  return grams;
}

std::uint32_t fnv1a32(std::string_view bytes) {
  std::uint32_t h = 2166136261u;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 16777619u;
  }
  return h;
}

std::uint32_t hash_ngram(std::string_view ngram, std::uint64_t buckets) {
  return static_cast<std::uint32_t>(fnv1a32(ngram) % buckets);
}

Vector token_vector(const EmbeddingModel& model, std::string_view token) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(model.dim()));
  const auto rows = model.subword_rows(token);
  if (rows.empty() || model.input.rows() == 0) return v;
  for (auto r : rows) v += model.input.row(r).transpose();
  return v / static_cast<double>(rows.size());
}

Vector doc_vector(const EmbeddingModel& model, std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::EmptySequence, "document has no tokens");
  Vector v = Vector::Zero(static_cast<Eigen::Index>(model.dim()));
  for (const auto& tok : tokens) v += token_vector(model, tok);
  return v / static_cast<double>(tokens.size());
}

double skipgram_pair_loss(const EmbeddingModel& model, std::span<const std::int32_t> input_rows,
                          std::int32_t context, std::span<const std::int32_t> negatives,
                          Matrix* grad_input, Matrix* grad_output) {
  const auto dim = static_cast<Eigen::Index>(model.dim());
  RowVector hidden = RowVector::Zero(dim);
  for (auto r : input_rows) hidden += model.input.row(r);
  const double inv = 1.0 / static_cast<double>(input_rows.size());
  hidden *= inv;

  RowVector grad_hidden = RowVector::Zero(dim);
  double loss = 0.0;
  auto term = [&](std::int32_t target, bool positive) {
    double score = model.output.row(target).dot(hidden);
    loss += neg_log_sigmoid(positive ? score : -score);
    // d/dscore of the term: sigmoid(score) - label
    double g = sigmoid(score) - (positive ? 1.0 : 0.0);
    grad_hidden += g * model.output.row(target);
    if (grad_output) grad_output->row(target) += g * hidden;
  };
  term(context, true);
  for (auto n : negatives) term(n, false);
  if (grad_input) {
    for (auto r : input_rows) grad_input->row(r) += inv * grad_hidden;
  }
  return loss;
}

EmbeddingModel train_skipgram(const std::vector<TokenSequence>& corpus, const SubwordConfig& config,
                              SkipgramStats* stats) {
  std::size_t total_tokens = 0;
  for (const auto& seq : corpus) total_tokens += seq.tokens.size();
  if (corpus.empty() || total_tokens == 0) throw Error(ErrorCode::EmptyCorpus, "skip-gram corpus is empty");

  EmbeddingModel model = EmbeddingModel::initialize(corpus, config);
  const auto dim = static_cast<Eigen::Index>(config.dim);

  // Per-token subword rows, computed once.
  std::vector<std::vector<std::int32_t>> rows_of(model.vocab_size());
  for (std::size_t i = 0; i < model.vocab_size(); ++i) {
    rows_of[i] = model.subword_rows(model.vocab[i].token);
  }
  std::vector<std::vector<std::int32_t>> ids(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (const auto& tok : corpus[s].tokens) ids[s].push_back(model.find(tok));
  }

  NegativeSampler sampler(model.vocab);
  Rng rng = Rng::derive(config.seed, 1);
  const double planned = static_cast<double>(config.epochs * total_tokens);
  std::size_t processed = 0;
  RowVector hidden(dim);
  RowVector grad_hidden(dim);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& line : ids) {
      for (std::size_t i = 0; i < line.size(); ++i, ++processed) {
        const double lr = config.lr * std::max(0.0, 1.0 - static_cast<double>(processed) / planned);
        const auto& rows = rows_of[static_cast<std::size_t>(line[i])];
        const double inv = 1.0 / static_cast<double>(rows.size());
        const std::size_t lo = i >= config.window ? i - config.window : 0;
        const std::size_t hi = std::min(line.size() - 1, i + config.window);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == i) continue;
          hidden.setZero();
          for (auto r : rows) hidden += model.input.row(r);
          hidden *= inv;
          grad_hidden.setZero();
          auto step = [&](std::int32_t target, bool positive) {
            double score = model.output.row(target).dot(hidden);
            loss_sum += neg_log_sigmoid(positive ? score : -score);
            double g = lr * ((positive ? 1.0 : 0.0) - sigmoid(score));
            grad_hidden += g * model.output.row(target);
            model.output.row(target) += g * hidden;
          };
          step(line[c], true);
          for (std::size_t k = 0; k < config.negatives; ++k) step(sampler.draw(rng, line[c]), false);
          grad_hidden *= inv;
          for (auto r : rows) model.input.row(r) += grad_hidden;
          ++pairs;
        }
      }
    }
    if (stats) stats->epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }
  return model;
}

}  // namespace opshield
