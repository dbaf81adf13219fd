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

#include "opshield/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace opshield {
namespace {

Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

template <typename Ref, typename Head>
std::vector<Ref> collect_head(Head& h) {
  return {{"head.w1", &h.w1, 2}, {"head.b1", &h.b1, 1}, {"head.w2", &h.w2, 2}, {"head.b2", &h.b2, 1}};
}

void check_labels(const std::vector<TokenSequence>& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  bool seen[2] = {false, false};
  for (const auto& s : data) {
    if (!s.label) throw Error(ErrorCode::InvalidConfig, "unlabelled training sample: " + s.source_id);
    seen[static_cast<int>(*s.label)] = true;
  }
  if (!seen[0] || !seen[1]) throw Error(ErrorCode::SingleClassDataset, "training set has a single class");
}

// Parameter and gradient tensors in matching order for the optimizer.
void collect_pairs(TrainedModel& model, ModelGrads& grads, std::vector<Matrix*>& params,
                   std::vector<const Matrix*>& grad_ptrs) {
  for (auto& t : model.encoder.tensors()) params.push_back(t.value);
  for (auto& t : grads.encoder.tensors()) grad_ptrs.push_back(t.value);
  for (auto& t : model.head.tensors()) params.push_back(t.value);
  for (auto& t : grads.head.tensors()) grad_ptrs.push_back(t.value);
  if (model.has_projection()) {
    params.push_back(&model.projection);
    grad_ptrs.push_back(&grads.projection);
  }
}

}  // namespace

void FusionConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidConfig, "fusion lambda must be in [0, 1]");
}

void TrainConfig::validate() const {
  if (batch < 1) throw Error(ErrorCode::InvalidConfig, "batch size must be >= 1");
  if (head_hidden < 1) throw Error(ErrorCode::InvalidConfig, "head hidden width must be >= 1");
  if (vocab_min_count < 1) throw Error(ErrorCode::InvalidConfig, "vocab_min_count must be >= 1");
  adamw.validate();
}

Vector fuse(const Vector& e_enc, const Vector& e_ft, const FusionConfig& config, const Matrix* projection) {
  Vector aligned;
  if (projection && projection->size() > 0) {
    if (projection->rows() != e_ft.size()) throw Error(ErrorCode::DimMismatch, "projection input dim mismatch");
    aligned = projection->transpose() * e_ft;
  } else {
    aligned = e_ft;
  }
  if (aligned.size() != e_enc.size()) {
    throw Error(ErrorCode::DimMismatch, "fusion operands have different dimensions");
  }
  return config.lambda * e_enc + (1.0 - config.lambda) * aligned;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_loss(double p, int y) {
  p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

double bce_loss(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "probability and label counts differ");
  if (p.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += bce_loss(p[i], y[i]);
  return sum / static_cast<double>(p.size());
}

double bce_logit_grad(double logit, int y) {
  const double p = sigmoid(logit);
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  return p - static_cast<double>(y);
}

ClassifierHead ClassifierHead::zeros(std::size_t d_fused, std::size_t hidden) {
  const auto d = static_cast<Eigen::Index>(d_fused);
  const auto h = static_cast<Eigen::Index>(hidden);
  return {Matrix::Zero(d, h), Matrix::Zero(1, h), Matrix::Zero(h, 1), Matrix::Zero(1, 1)};
}

ClassifierHead ClassifierHead::initialize(std::size_t d_fused, std::size_t hidden, Rng& rng) {
  auto head = zeros(d_fused, hidden);
  head.w1 = xavier(head.w1.rows(), head.w1.cols(), rng);
  head.w2 = xavier(head.w2.rows(), head.w2.cols(), rng);
  return head;
}

std::vector<ParamRef> ClassifierHead::tensors() { return collect_head<ParamRef>(*this); }
std::vector<ConstParamRef> ClassifierHead::tensors() const { return collect_head<ConstParamRef>(*this); }

double head_forward(const ClassifierHead& head, const Vector& fused, HeadTrace* trace) {
  if (fused.size() != head.w1.rows()) throw Error(ErrorCode::DimMismatch, "head input dimension mismatch");
  RowVector input = fused.transpose();
  RowVector pre = input * head.w1 + head.b1.row(0);
  RowVector act = pre.unaryExpr([](double v) { return gelu(v); });
  const double logit = act.dot(head.w2.col(0)) + head.b2(0, 0);
  if (trace) *trace = {std::move(input), std::move(pre), std::move(act)};
  return logit;
}

Vector head_backward(const ClassifierHead& head, const HeadTrace& trace, double d_logit, ClassifierHead& grads) {
  grads.w2.col(0) += d_logit * trace.act.transpose();
  grads.b2(0, 0) += d_logit;
  RowVector d_pre = d_logit * head.w2.col(0).transpose();
  d_pre.array() *= trace.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  grads.w1.noalias() += trace.input.transpose() * d_pre;
  grads.b1.row(0) += d_pre;
  return (d_pre * head.w1.transpose()).transpose();
}

TokenVocab TokenVocab::from_tokens(std::vector<std::string> tokens) {
  TokenVocab v;
  v.tokens = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens.size(); ++i) v.index.emplace(v.tokens[i], static_cast<std::int32_t>(i));
  return v;
}

TokenVocab TokenVocab::build(const std::vector<TokenSequence>& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus) {
    for (const auto& t : s.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != kUnknown) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{std::string(kUnknown)};
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

std::int32_t TokenVocab::id(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? 0 : it->second;
}

std::vector<std::int32_t> TokenVocab::encode(std::span<const std::string> toks, std::size_t max_len) const {
  std::vector<std::int32_t> ids;
  const std::size_t n = std::min(toks.size(), max_len);
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(id(toks[i]));
  return ids;
}

TrainedModel initialize_model(const std::vector<TokenSequence>& train_set, const EmbeddingModel& embed,
                              EncoderConfig encoder_config, const FusionConfig& fusion,
                              const TrainConfig& config) {
  fusion.validate();
  config.validate();
  TrainedModel model;
  model.vocab = TokenVocab::build(train_set, config.vocab_min_count);
  encoder_config.vocab_size = model.vocab.size();
  encoder_config.validate();
  model.encoder_config = encoder_config;
  Rng rng = Rng::derive(config.seed, 7);
  model.encoder = EncoderParams::initialize(encoder_config, rng);
  model.head = ClassifierHead::initialize(encoder_config.d_model, config.head_hidden, rng);
  if (embed.dim() != encoder_config.d_model) {
    model.projection = xavier(static_cast<Eigen::Index>(embed.dim()),
                              static_cast<Eigen::Index>(encoder_config.d_model), rng);
  }
  model.fusion = fusion;
  model.embed = embed;
  return model;
}

ModelGrads zero_grads(const TrainedModel& model) {
  ModelGrads g;
  g.encoder = EncoderParams::zeros(model.encoder_config);
  g.head = ClassifierHead::zeros(static_cast<std::size_t>(model.head.w1.rows()),
                                 static_cast<std::size_t>(model.head.w1.cols()));
  g.projection = Matrix::Zero(model.projection.rows(), model.projection.cols());
  return g;
}

double sample_loss_and_grad(const TrainedModel& model, std::span<const std::string> tokens, int label,
                            double scale, ModelGrads* grads, Rng* dropout_rng) {
  if (tokens.empty()) throw Error(ErrorCode::EmptySequence, "sample has no tokens");
  const auto& cfg = model.encoder_config;
  const double lambda = model.fusion.lambda;
  const Vector e_ft = doc_vector(model.embed, tokens);

  EncoderTape tape;
  Vector pooled = Vector::Zero(static_cast<Eigen::Index>(cfg.d_model));
  if (lambda > 0.0) {
    const auto ids = model.vocab.encode(tokens, cfg.max_len);
    auto hiddens = encode(model.encoder, cfg, ids, grads ? &tape : nullptr, dropout_rng);
    pooled = pool_global(hiddens, window_layout(ids.size(), cfg.window, cfg.stride), cfg.pool);
  }
  const Vector fused = fuse(pooled, e_ft, model.fusion, model.has_projection() ? &model.projection : nullptr);
  HeadTrace trace;
  const double logit = head_forward(model.head, fused, &trace);
  const double loss = bce_loss(sigmoid(logit), label);
  if (grads) {
    const double d_logit = scale * bce_logit_grad(logit, label);
    const Vector d_fused = head_backward(model.head, trace, d_logit, grads->head);
    if (lambda > 0.0) encoder_backward(model.encoder, cfg, tape, lambda * d_fused, grads->encoder);
    if (model.has_projection()) grads->projection.noalias() += (1.0 - lambda) * e_ft * d_fused.transpose();
  }
  return loss;
}

Prediction predict(const TrainedModel& model, std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::EmptySequence, "sample has no tokens");
  const auto& cfg = model.encoder_config;
  Vector pooled = Vector::Zero(static_cast<Eigen::Index>(cfg.d_model));
  if (model.fusion.lambda > 0.0) {
    const auto ids = model.vocab.encode(tokens, cfg.max_len);
    auto hiddens = encode(model.encoder, cfg, ids);
    pooled = pool_global(hiddens, window_layout(ids.size(), cfg.window, cfg.stride), cfg.pool);
  }
  const Vector e_ft = doc_vector(model.embed, tokens);
  const Vector fused = fuse(pooled, e_ft, model.fusion, model.has_projection() ? &model.projection : nullptr);
  Prediction p;
  p.probability = sigmoid(head_forward(model.head, fused));
  p.label = p.probability >= 0.5 ? Label::Webshell : Label::Benign;
  return p;
}

Metrics evaluate(const TrainedModel& model, const std::vector<TokenSequence>& data) {
  std::vector<Label> predicted;
  std::vector<Label> truth;
  for (const auto& s : data) {
    if (!s.label) continue;
    predicted.push_back(predict(model, s.tokens).label);
    truth.push_back(*s.label);
  }
  return compute_metrics(predicted, truth);
}

TrainResult train(const std::vector<TokenSequence>& train_set, const std::vector<TokenSequence>& val_set,
                  const EmbeddingModel& embed, const EncoderConfig& encoder_config,
                  const FusionConfig& fusion, const TrainConfig& config) {
  check_labels(train_set);
  TrainResult result{initialize_model(train_set, embed, encoder_config, fusion, config), {}};
  TrainedModel& model = result.model;
  if (config.epochs == 0) return result;

  ModelGrads grads = zero_grads(model);
  std::vector<Matrix*> params;
  std::vector<const Matrix*> grad_ptrs;
  collect_pairs(model, grads, params, grad_ptrs);
  AdamWState state;
  state.hyper = config.adamw;

  const std::size_t n = train_set.size();
  std::uint64_t sample_counter = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::derive(config.seed, 1000 + epoch);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch) {
      const std::size_t end = std::min(n, start + config.batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.encoder.set_zero();
      for (auto& t : grads.head.tensors()) t.value->setZero();
      grads.projection.setZero();
      for (std::size_t i = start; i < end; ++i) {
        const auto& sample = train_set[order[i]];
        Rng dropout_rng = Rng::derive(config.seed ^ 0xd50b0e7ULL, sample_counter++);
        loss_sum += sample_loss_and_grad(model, sample.tokens, static_cast<int>(*sample.label), scale, &grads,
                                         &dropout_rng);
      }
      adamw_step(params, grad_ptrs, state);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(n);
    if (!val_set.empty()) {
      Metrics m = evaluate(model, val_set);
      rec.val_acc = m.accuracy;
      rec.val_f1 = m.f1;
    }
    result.history.push_back(rec);
  }
  return result;
}

LambdaSearch grid_search_lambda(std::vector<double> candidates, const std::vector<TokenSequence>& train_set,
                                const std::vector<TokenSequence>& val_set, const EmbeddingModel& embed,
                                const EncoderConfig& encoder_config, const TrainConfig& config) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidConfig, "lambda grid is empty");
  for (double c : candidates) FusionConfig{c}.validate();
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  LambdaSearch search;
  double best_f1 = -1.0;
  for (double lambda : candidates) {
    auto trained = train(train_set, val_set, embed, encoder_config, FusionConfig{lambda}, config);
    Metrics m = val_set.empty() ? Metrics{} : evaluate(trained.model, val_set);
    search.rows.push_back({lambda, m});
    if (m.f1 >= best_f1) {
      best_f1 = m.f1;
      search.best_lambda = lambda;
    }
  }
  return search;
}

}  // namespace opshield
