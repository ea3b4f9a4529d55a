#include "postural/semantics.hpp"

#include <omp.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <random>

#include "postural/error.hpp"
#include "postural/io.hpp"
#include "postural/kernels.hpp"
#include "postural/text.hpp"

namespace postural {

// ---- corpus --------------------------------------------------------------------

std::size_t Corpus::token_count() const noexcept {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.size();
  return n;
}

Corpus build_corpus(const std::vector<CveRecord>& records, const std::vector<std::string>& extra_docs) {
  Corpus corpus;
  for (const auto& r : records) {
    corpus.documents.push_back(text::tokenize(r.description));
    corpus.source_tags.push_back(r.id);
  }
  for (std::size_t i = 0; i < extra_docs.size(); ++i) {
    corpus.documents.push_back(text::tokenize(extra_docs[i]));
    corpus.source_tags.push_back("extra:" + std::to_string(i));
  }
  return corpus;
}

std::vector<std::string> read_corpus_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::NotFound, "corpus directory " + dir.string() + " not found");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::string> docs;
  for (const auto& f : files) docs.push_back(io::read_file(f));
  return docs;
}

// ---- sampling --------------------------------------------------------------------

WindowSampler::WindowSampler(const Corpus& corpus, std::size_t window)
    : corpus_(corpus), window_(window) {}

bool WindowSampler::next(TrainingSample& out) {
  while (doc_ < corpus_.documents.size() && pos_ >= corpus_.documents[doc_].size()) {
    ++doc_;
    pos_ = 0;
  }
  if (doc_ >= corpus_.documents.size()) return false;
  const auto& doc = corpus_.documents[doc_];
  out.center = doc[pos_];
  out.context.clear();
  const std::size_t lo = pos_ >= window_ ? pos_ - window_ : 0;
  const std::size_t hi = std::min(doc.size(), pos_ + window_ + 1);
  for (std::size_t j = lo; j < hi; ++j) {
    if (j != pos_) out.context.push_back(doc[j]);
  }
  ++pos_;
  return true;
}

std::vector<TrainingSample> sample_windows(const Corpus& corpus, std::size_t window) {
  std::vector<TrainingSample> out;
  WindowSampler sampler(corpus, window);
  TrainingSample s;
  while (sampler.next(s)) out.push_back(s);
  return out;
}

// ---- model --------------------------------------------------------------------

EmbeddingModel::EmbeddingModel(std::vector<std::string> tokens, std::size_t dim,
                               std::vector<float> vectors, TrainConfig config)
    : tokens_(std::move(tokens)), dim_(dim), vectors_(std::move(vectors)), config_(config) {
  if (vectors_.size() != tokens_.size() * dim_) {
    throw Error(ErrorCode::DimensionMismatch, "vector matrix does not match vocabulary x dim");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

std::optional<std::size_t> EmbeddingModel::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingModel::vector(std::size_t index) const {
  return {vectors_.data() + index * dim_, dim_};
}

std::optional<std::span<const float>> EmbeddingModel::vector(std::string_view token) const {
  auto idx = index_of(token);
  if (!idx) return std::nullopt;
  return vector(*idx);
}

// ---- training --------------------------------------------------------------------

namespace {

/// Uniform double in [0,1) from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class NegativeSampler {
public:
  explicit NegativeSampler(const std::vector<std::size_t>& counts) {
    cumulative_.reserve(counts.size());
    double total = 0.0;
    for (auto c : counts) {
      total += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(total);
    }
  }

  std::size_t draw(std::mt19937_64& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

private:
  std::vector<double> cumulative_;
};

struct Vocabulary {
  std::vector<std::string> tokens;
  std::vector<std::size_t> counts;
  std::vector<std::vector<std::size_t>> documents;  // corpus re-encoded, rare words dropped
};

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus.documents) {
    for (const auto& t : doc) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  // Frequency descending, token ascending: dense, reproducible indices.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  std::unordered_map<std::string, std::size_t> index;
  for (auto& [tok, n] : kept) {
    index.emplace(tok, v.tokens.size());
    v.tokens.push_back(tok);
    v.counts.push_back(n);
  }
  for (const auto& doc : corpus.documents) {
    std::vector<std::size_t> ids;
    for (const auto& t : doc) {
      if (auto it = index.find(t); it != index.end()) ids.push_back(it->second);
    }
    v.documents.push_back(std::move(ids));
  }
  return v;
}

struct EpochStats {
  double loss = 0.0;
  std::size_t samples = 0;
};

// Trains on one document. `processed` counts positions seen so far across
// the whole run and drives the linear learning-rate decay.
EpochStats train_document(w2v::Params<float>& params, const std::vector<std::size_t>& doc,
                          const TrainConfig& cfg, const NegativeSampler& negatives,
                          std::mt19937_64& rng, std::size_t processed, std::size_t total_positions,
                          w2v::Workspace<float>& ws) {
  EpochStats stats;
  std::vector<std::size_t> context;
  std::vector<std::size_t> negs;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const double progress = static_cast<double>(processed + i) / static_cast<double>(total_positions);
    const float lr = static_cast<float>(cfg.learning_rate * std::max(1e-4, 1.0 - progress));
    const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
    const std::size_t hi = std::min(doc.size(), i + cfg.window + 1);
    context.clear();
    for (std::size_t j = lo; j < hi; ++j) {
      if (j != i) context.push_back(doc[j]);
    }
    if (context.empty()) continue;
    const std::size_t center = doc[i];
    const std::size_t draws = cfg.architecture == Architecture::CBOW
                                  ? cfg.negative_samples
                                  : cfg.negative_samples * context.size();
    negs.clear();
    while (negs.size() < draws) {
      const auto n = negatives.draw(rng);
      if (n != center) negs.push_back(n);
    }
    const float loss = cfg.architecture == Architecture::CBOW
                           ? w2v::cbow_update<float>(params, center, context, negs, lr, ws)
                           : w2v::skipgram_update<float>(params, center, context, negs, lr, ws);
    stats.loss += loss;
    ++stats.samples;
  }
  return stats;
}

}  // namespace

EmbeddingModel train_embeddings(const Corpus& corpus, const TrainConfig& cfg) {
  if (cfg.dim == 0 || cfg.window == 0 || cfg.epochs == 0) {
    throw Error(ErrorCode::BadRequest, "dim, window and epochs must be positive");
  }
  Vocabulary vocab = build_vocabulary(corpus, std::max<std::size_t>(cfg.min_count, 1));
  if (vocab.tokens.size() < 2) {
    throw Error(ErrorCode::CorpusTooSmall,
                "need at least 2 distinct tokens occurring >= min_count times, have " +
                    std::to_string(vocab.tokens.size()));
  }

  const std::size_t V = vocab.tokens.size();
  const std::size_t D = cfg.dim;
  w2v::Params<float> params(V, D);
  std::mt19937_64 init_rng(cfg.seed);
  for (auto& x : params.input) {
    x = static_cast<float>((uniform01(init_rng) - 0.5) / static_cast<double>(D));
  }

  const NegativeSampler negatives(vocab.counts);
  std::size_t positions_per_epoch = 0;
  for (const auto& d : vocab.documents) positions_per_epoch += d.size();
  const std::size_t total_positions = std::max<std::size_t>(1, positions_per_epoch * cfg.epochs);

  std::vector<double> losses;
  if (cfg.deterministic) {
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    w2v::Workspace<float> ws;
    std::size_t processed = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      EpochStats total;
      for (const auto& doc : vocab.documents) {
        const auto s = train_document(params, doc, cfg, negatives, rng, processed, total_positions, ws);
        total.loss += s.loss;
        total.samples += s.samples;
        processed += doc.size();
      }
      losses.push_back(total.samples ? total.loss / static_cast<double>(total.samples) : 0.0);
    }
  } else {
    // Hogwild: workers update the shared matrices without synchronisation.
    std::vector<std::size_t> doc_offsets(vocab.documents.size() + 1, 0);
    for (std::size_t i = 0; i < vocab.documents.size(); ++i) {
      doc_offsets[i + 1] = doc_offsets[i] + vocab.documents[i].size();
    }
    const auto ndocs = static_cast<std::ptrdiff_t>(vocab.documents.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      double loss_sum = 0.0;
      std::size_t sample_sum = 0;
#pragma omp parallel reduction(+ : loss_sum, sample_sum)
      {
        std::mt19937_64 rng(cfg.seed + 7919ULL * static_cast<std::uint64_t>(omp_get_thread_num() + 1) +
                            epoch);
        w2v::Workspace<float> ws;
#pragma omp for schedule(dynamic, 4)
        for (std::ptrdiff_t d = 0; d < ndocs; ++d) {
          const auto& doc = vocab.documents[static_cast<std::size_t>(d)];
          const std::size_t processed = epoch * positions_per_epoch + doc_offsets[static_cast<std::size_t>(d)];
          const auto s = train_document(params, doc, cfg, negatives, rng, processed, total_positions, ws);
          loss_sum += s.loss;
          sample_sum += s.samples;
        }
      }
      losses.push_back(sample_sum ? loss_sum / static_cast<double>(sample_sum) : 0.0);
    }
  }

  EmbeddingModel model(std::move(vocab.tokens), D, std::move(params.input), cfg);
  model.epoch_losses = std::move(losses);
  return model;
}

// ---- model file --------------------------------------------------------------------

namespace {

constexpr char kModelMagic[4] = {'P', 'S', 'T', 'V'};
constexpr std::uint32_t kModelFormat = 1;

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::MalformedModel, "model file truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const EmbeddingModel& model) {
  std::string out(kModelMagic, sizeof kModelMagic);
  put<std::uint32_t>(out, kModelFormat);
  put<std::uint64_t>(out, model.size());
  put<std::uint64_t>(out, model.dim());
  const auto& c = model.config();
  put<std::uint8_t>(out, c.architecture == Architecture::CBOW ? 0 : 1);
  put<std::uint64_t>(out, c.window);
  put<std::uint64_t>(out, c.epochs);
  put<double>(out, c.learning_rate);
  put<std::uint64_t>(out, c.negative_samples);
  put<std::uint64_t>(out, c.min_count);
  put<std::uint64_t>(out, c.seed);
  put<std::uint8_t>(out, c.deterministic ? 1 : 0);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& tok = model.tokens()[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tok.size()));
    out += tok;
    for (float x : model.vector(i)) put<float>(out, x);
  }
  return out;
}

EmbeddingModel deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4) != std::string_view(kModelMagic, 4)) {
    throw Error(ErrorCode::MalformedModel, "bad model magic");
  }
  if (const auto v = r.get<std::uint32_t>(); v != kModelFormat) {
    throw Error(ErrorCode::MalformedModel, "unsupported model format version " + std::to_string(v));
  }
  const auto vocab = r.get<std::uint64_t>();
  const auto dim = r.get<std::uint64_t>();
  TrainConfig c;
  c.dim = dim;
  c.architecture = r.get<std::uint8_t>() == 0 ? Architecture::CBOW : Architecture::SkipGram;
  c.window = r.get<std::uint64_t>();
  c.epochs = r.get<std::uint64_t>();
  c.learning_rate = r.get<double>();
  c.negative_samples = r.get<std::uint64_t>();
  c.min_count = r.get<std::uint64_t>();
  c.seed = r.get<std::uint64_t>();
  c.deterministic = r.get<std::uint8_t>() != 0;
  if (dim == 0 || vocab > bytes.size() || dim > bytes.size()) {
    throw Error(ErrorCode::MalformedModel, "implausible model header");
  }
  std::vector<std::string> tokens;
  std::vector<float> vectors;
  tokens.reserve(vocab);
  vectors.reserve(vocab * dim);
  for (std::uint64_t i = 0; i < vocab; ++i) {
    const auto len = r.get<std::uint32_t>();
    tokens.emplace_back(r.take(len));
    for (std::uint64_t k = 0; k < dim; ++k) vectors.push_back(r.get<float>());
  }
  if (!r.done()) throw Error(ErrorCode::MalformedModel, "trailing bytes after model rows");
  return EmbeddingModel(std::move(tokens), dim, std::move(vectors), c);
}

void save_model(const EmbeddingModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_model(model));
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  return deserialize_model(io::read_file(path));
}

// ---- similarity --------------------------------------------------------------------

bool PhraseVector::is_zero() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double x) { return x == 0.0; });
}

PhraseVector phrase_vector(const EmbeddingModel& model, std::string_view phrase) {
  PhraseVector pv;
  pv.values.assign(model.dim(), 0.0);
  const auto tokens = text::tokenize(phrase);
  std::size_t found = 0;
  for (const auto& t : tokens) {
    auto v = model.vector(t);
    if (!v) continue;
    ++found;
    for (std::size_t k = 0; k < model.dim(); ++k) pv.values[k] += (*v)[k];
  }
  if (found > 0) {
    for (auto& x : pv.values) x /= static_cast<double>(found);
  }
  pv.coverage = tokens.empty() ? 0.0 : static_cast<double>(found) / static_cast<double>(tokens.size());
  return pv;
}

double similarity(const PhraseVector& a, const PhraseVector& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "phrase vectors of dim " + std::to_string(a.values.size()) +
                                                  " and " + std::to_string(b.values.size()));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    ab += a.values[k] * b.values[k];
    aa += a.values[k] * a.values[k];
    bb += b.values[k] * b.values[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  // sqrt(aa*bb) rather than sqrt(aa)*sqrt(bb): cos(a,a) comes out exactly 1.
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double port_similarity(const EmbeddingModel& model, const std::vector<std::string>& out_port,
                       const std::vector<std::string>& in_port) {
  return kernels::port_similarity(kernels::make_port_vectors(model, out_port),
                                  kernels::make_port_vectors(model, in_port));
}

}  // namespace postural
