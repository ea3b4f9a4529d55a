#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "postural/ingest.hpp"

namespace postural {

struct Corpus {
  std::vector<std::vector<std::string>> documents;
  std::vector<std::string> source_tags;  // parallel to documents

  std::size_t token_count() const noexcept;
};

/// One document per CVE description plus one per extra text.
Corpus build_corpus(const std::vector<CveRecord>& records, const std::vector<std::string>& extra_docs);

/// Every regular file below `dir`, in path order.
std::vector<std::string> read_corpus_dir(const std::filesystem::path& dir);

struct TrainingSample {
  std::string center;
  std::vector<std::string> context;

  bool operator==(const TrainingSample&) const = default;
};

/// Sliding-window sampler: one sample per token position, context is every
/// in-bounds neighbour within `window` on either side of the center.
class WindowSampler {
public:
  WindowSampler(const Corpus& corpus, std::size_t window);

  /// False once the corpus is exhausted.
  bool next(TrainingSample& out);

private:
  const Corpus& corpus_;
  std::size_t window_;
  std::size_t doc_ = 0;
  std::size_t pos_ = 0;
};

std::vector<TrainingSample> sample_windows(const Corpus& corpus, std::size_t window);

enum class Architecture { CBOW, SkipGram };

struct TrainConfig {
  Architecture architecture = Architecture::CBOW;
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;  // linearly decayed to 1e-4 of the start value
  std::size_t negative_samples = 5;
  std::size_t min_count = 2;
  std::uint64_t seed = 1;
  /// Single-threaded, fixed update order. When false, OpenMP workers update
  /// shared vectors without locks and results vary run to run.
  bool deterministic = true;

  bool operator==(const TrainConfig&) const = default;
};

class EmbeddingModel {
public:
  EmbeddingModel() = default;
  EmbeddingModel(std::vector<std::string> tokens, std::size_t dim, std::vector<float> vectors,
                 TrainConfig config);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<float>& vectors() const noexcept { return vectors_; }
  const TrainConfig& config() const noexcept { return config_; }

  std::optional<std::size_t> index_of(std::string_view token) const;
  std::span<const float> vector(std::size_t index) const;
  std::optional<std::span<const float>> vector(std::string_view token) const;

  /// Mean loss per training sample for each epoch (empty for loaded models).
  std::vector<double> epoch_losses;

  bool operator==(const EmbeddingModel& o) const {
    return tokens_ == o.tokens_ && dim_ == o.dim_ && vectors_ == o.vectors_ && config_ == o.config_;
  }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
  std::vector<float> vectors_;
  TrainConfig config_;
};

EmbeddingModel train_embeddings(const Corpus& corpus, const TrainConfig& config);

/// Binary model file: "PSTV" magic, format version, |vocab|, dim, training
/// config, then per row a length-prefixed token and `dim` float32 values.
std::string serialize_model(const EmbeddingModel& model);
EmbeddingModel deserialize_model(std::string_view bytes);
void save_model(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_model(const std::filesystem::path& path);

struct PhraseVector {
  std::vector<double> values;
  double coverage = 0.0;

  bool is_zero() const noexcept;
};

PhraseVector phrase_vector(const EmbeddingModel& model, std::string_view phrase);

/// Cosine similarity; 0 when either vector is zero.
double similarity(const PhraseVector& a, const PhraseVector& b);

/// Max over phrase pairs of the cosine clamped below at 0.
double port_similarity(const EmbeddingModel& model, const std::vector<std::string>& out_port,
                       const std::vector<std::string>& in_port);

// ---------------------------------------------------------------------------
// Negative-sampling objective. Exposed so the gradient check exercises the
// exact update routine the trainer runs.

namespace w2v {

template <class Real>
struct Params {
  std::size_t vocab = 0;
  std::size_t dim = 0;
  std::vector<Real> input;   // vocab x dim, the embeddings
  std::vector<Real> output;  // vocab x dim, negative-sampling weights

  Params() = default;
  Params(std::size_t v, std::size_t d) : vocab(v), dim(d), input(v * d), output(v * d) {}
  Real* in_row(std::size_t i) { return input.data() + i * dim; }
  Real* out_row(std::size_t i) { return output.data() + i * dim; }
  const Real* in_row(std::size_t i) const { return input.data() + i * dim; }
  const Real* out_row(std::size_t i) const { return output.data() + i * dim; }
};

template <class Real>
Real log_sigmoid(Real x) {
  // log(1/(1+e^-x)) without overflow for large |x|
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <class Real>
Real sigmoid(Real x) {
  return x >= 0 ? Real(1) / (Real(1) + std::exp(-x)) : std::exp(x) / (Real(1) + std::exp(x));
}

template <class Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// -log s(u_pos.h) - sum_n log s(-u_n.h) for hidden vector h.
template <class Real>
Real ns_loss(const Params<Real>& p, const Real* hidden, std::size_t positive,
             std::span<const std::size_t> negatives) {
  Real loss = -log_sigmoid(dot(p.out_row(positive), hidden, p.dim));
  for (auto n : negatives) loss -= log_sigmoid(-dot(p.out_row(n), hidden, p.dim));
  return loss;
}

/// Loss plus its gradient at the current parameters. `coeffs[t]` receives
/// dL/d(u_t.h) for target t (positive first); dL/dh is added to grad_hidden.
template <class Real>
Real ns_gradient(const Params<Real>& p, const Real* hidden, std::size_t positive,
                 std::span<const std::size_t> negatives, Real* grad_hidden, Real* coeffs) {
  Real loss = 0;
  for (std::size_t t = 0; t <= negatives.size(); ++t) {
    const Real* u = p.out_row(t == 0 ? positive : negatives[t - 1]);
    const Real score = dot(u, hidden, p.dim);
    loss -= t == 0 ? log_sigmoid(score) : log_sigmoid(-score);
    coeffs[t] = sigmoid(score) - (t == 0 ? Real(1) : Real(0));
    for (std::size_t k = 0; k < p.dim; ++k) grad_hidden[k] += coeffs[t] * u[k];
  }
  return loss;
}

template <class Real>
void ns_apply_output(Params<Real>& p, const Real* hidden, std::size_t positive,
                     std::span<const std::size_t> negatives, const Real* coeffs, Real lr) {
  for (std::size_t t = 0; t <= negatives.size(); ++t) {
    Real* u = p.out_row(t == 0 ? positive : negatives[t - 1]);
    for (std::size_t k = 0; k < p.dim; ++k) u[k] -= lr * coeffs[t] * hidden[k];
  }
}

/// Reusable buffers for the update routines.
template <class Real>
struct Workspace {
  std::vector<Real> hidden;
  std::vector<Real> grad_hidden;
  std::vector<Real> coeffs;
};

/// CBOW: the hidden vector is the mean of the context input vectors.
template <class Real>
Real cbow_loss(const Params<Real>& p, std::size_t center, std::span<const std::size_t> context,
               std::span<const std::size_t> negatives) {
  std::vector<Real> h(p.dim, Real(0));
  for (auto c : context) {
    const Real* v = p.in_row(c);
    for (std::size_t k = 0; k < p.dim; ++k) h[k] += v[k];
  }
  for (auto& x : h) x /= static_cast<Real>(context.size());
  return ns_loss(p, h.data(), center, negatives);
}

/// One SGD step on cbow_loss, every gradient taken at the pre-update
/// parameters. Returns the loss before the update.
template <class Real>
Real cbow_update(Params<Real>& p, std::size_t center, std::span<const std::size_t> context,
                 std::span<const std::size_t> negatives, Real lr, Workspace<Real>& ws) {
  const std::size_t d = p.dim;
  ws.hidden.assign(d, Real(0));
  ws.grad_hidden.assign(d, Real(0));
  ws.coeffs.assign(negatives.size() + 1, Real(0));
  for (auto c : context) {
    const Real* v = p.in_row(c);
    for (std::size_t k = 0; k < d; ++k) ws.hidden[k] += v[k];
  }
  const Real inv = Real(1) / static_cast<Real>(context.size());
  for (auto& x : ws.hidden) x *= inv;
  const Real loss = ns_gradient(p, ws.hidden.data(), center, negatives, ws.grad_hidden.data(), ws.coeffs.data());
  ns_apply_output(p, ws.hidden.data(), center, negatives, ws.coeffs.data(), lr);
  for (auto c : context) {
    Real* v = p.in_row(c);
    for (std::size_t k = 0; k < d; ++k) v[k] -= lr * inv * ws.grad_hidden[k];
  }
  return loss;
}

/// Skip-Gram: each context word's input vector predicts the center word.
/// `negatives` holds the same number of entries for every context word.
template <class Real>
Real skipgram_loss(const Params<Real>& p, std::size_t center, std::span<const std::size_t> context,
                   std::span<const std::size_t> negatives) {
  const std::size_t per = context.empty() ? 0 : negatives.size() / context.size();
  Real loss = 0;
  for (std::size_t j = 0; j < context.size(); ++j) {
    loss += ns_loss(p, p.in_row(context[j]), center, negatives.subspan(j * per, per));
  }
  return loss;
}

template <class Real>
Real skipgram_update(Params<Real>& p, std::size_t center, std::span<const std::size_t> context,
                     std::span<const std::size_t> negatives, Real lr, Workspace<Real>& ws) {
  const std::size_t d = p.dim;
  const std::size_t per = context.empty() ? 0 : negatives.size() / context.size();
  ws.grad_hidden.assign(d * context.size(), Real(0));
  ws.coeffs.assign((per + 1) * context.size(), Real(0));
  ws.hidden.assign(d * context.size(), Real(0));
  Real loss = 0;
  for (std::size_t j = 0; j < context.size(); ++j) {
    std::copy_n(p.in_row(context[j]), d, ws.hidden.data() + j * d);
    loss += ns_gradient(p, ws.hidden.data() + j * d, center, negatives.subspan(j * per, per),
                        ws.grad_hidden.data() + j * d, ws.coeffs.data() + j * (per + 1));
  }
  for (std::size_t j = 0; j < context.size(); ++j) {
    ns_apply_output(p, ws.hidden.data() + j * d, center, negatives.subspan(j * per, per),
                    ws.coeffs.data() + j * (per + 1), lr);
  }
  for (std::size_t j = 0; j < context.size(); ++j) {
    Real* v = p.in_row(context[j]);
    for (std::size_t k = 0; k < d; ++k) v[k] -= lr * ws.grad_hidden[j * d + k];
  }
  return loss;
}

}  // namespace w2v
}  // namespace postural
