#pragma once

// Post sentiment: character-bigram TF-IDF features, an L2-regularised
// logistic-regression classifier trained by full-batch gradient descent,
// and per-movie positive/negative aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "boxoffice/corpus.hpp"
#include "boxoffice/error.hpp"
#include "boxoffice/io.hpp"

namespace boxoffice::sentiment {

/// Two adjacent unicode code points.
using Bigram = std::u32string;

/// All adjacent code-point pairs of the trimmed text, repeats included.
inline std::vector<Bigram> extract_bigrams(std::string_view text) {
  const auto cps = io::utf8_decode(io::trim(text));
  std::vector<Bigram> out;
  if (cps.size() < 2) return out;
  out.reserve(cps.size() - 1);
  for (std::size_t i = 0; i + 1 < cps.size(); ++i) out.push_back(cps.substr(i, 2));
  return out;
}

struct BigramVocabulary {
  std::map<Bigram, std::size_t> grams;  // bigram -> dense feature index
  std::vector<std::uint64_t> doc_freq;  // by feature index
  std::uint64_t n_docs = 0;

  std::size_t size() const { return grams.size(); }
  bool operator==(const BigramVocabulary&) const = default;
};

/// Keeps the bigrams that occur in at least `min_df` documents. Indices
/// follow code-point order of the bigrams.
inline BigramVocabulary fit_vocabulary(const std::vector<std::string>& docs, std::uint64_t min_df = 1) {
  if (min_df < 1) throw UsageError("min_df must be at least 1");
  if (docs.empty()) throw DataError("cannot fit a vocabulary on an empty corpus");
  std::map<Bigram, std::uint64_t> df;
  for (const auto& d : docs) {
    const auto grams = extract_bigrams(d);
    for (const auto& g : std::set<Bigram>(grams.begin(), grams.end())) df[g] += 1;
  }
  BigramVocabulary v;
  v.n_docs = docs.size();
  for (const auto& [g, count] : df) {
    if (count < min_df) continue;
    v.grams.emplace(g, v.doc_freq.size());
    v.doc_freq.push_back(count);
  }
  return v;
}

/// Sparse (index, weight) pairs sorted by index.
struct TfIdfVector {
  std::vector<std::pair<std::size_t, double>> entries;

  bool empty() const { return entries.empty(); }
  double norm() const {
    double s = 0.0;
    for (const auto& [i, w] : entries) s += w * w;
    return std::sqrt(s);
  }
};

/// Smoothed inverse document frequency ln((1 + N) / (1 + df)) + 1.
inline double idf(const BigramVocabulary& vocab, std::size_t index) {
  const auto n = static_cast<double>(vocab.n_docs);
  const auto df = static_cast<double>(vocab.doc_freq.at(index));
  return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

/// Raw-count tf times smoothed idf, L2-normalised. Out-of-vocabulary
/// bigrams are dropped.
inline TfIdfVector tfidf(std::string_view text, const BigramVocabulary& vocab) {
  std::map<std::size_t, double> tf;
  for (const auto& g : extract_bigrams(text)) {
    if (auto it = vocab.grams.find(g); it != vocab.grams.end()) tf[it->second] += 1.0;
  }
  TfIdfVector v;
  double sq = 0.0;
  for (const auto& [i, count] : tf) {
    const double w = count * idf(vocab, i);
    v.entries.emplace_back(i, w);
    sq += w * w;
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& e : v.entries) e.second *= inv;
  }
  return v;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct SentimentModel {
  BigramVocabulary vocabulary;
  std::vector<double> weights;  // one per vocabulary index
  double bias = 0.0;

  bool operator==(const SentimentModel&) const = default;
};

struct TrainHyper {
  double lr = 0.1;
  std::size_t epochs = 500;
  double l2 = 1e-4;
  std::uint64_t min_df = 1;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

inline double dot(const TfIdfVector& x, const std::vector<double>& w) {
  double s = 0.0;
  for (const auto& [i, v] : x.entries) s += v * w[i];
  return s;
}

/// Mean logistic loss plus l2 * |w|^2 (bias unpenalised) and its gradient.
inline LossAndGradient logistic_loss(const std::vector<TfIdfVector>& xs, const std::vector<bool>& ys,
                                     const std::vector<double>& w, double b, double l2) {
  LossAndGradient out;
  out.grad_w.assign(w.size(), 0.0);
  const auto n = static_cast<double>(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double z = dot(xs[k], w) + b;
    const double y = ys[k] ? 1.0 : 0.0;
    // log(1 + e^z) - y z, evaluated without overflow
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.loss += (softplus - y * z) / n;
    const double r = (sigmoid(z) - y) / n;
    for (const auto& [i, v] : xs[k].entries) out.grad_w[i] += r * v;
    out.grad_b += r;
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    out.loss += l2 * w[i] * w[i];
    out.grad_w[i] += 2.0 * l2 * w[i];
  }
  return out;
}

struct TrainResult {
  SentimentModel model;
  std::vector<double> loss_history;  // loss before each epoch's update
};

/// Fits the vocabulary on the training texts, then runs full-batch
/// gradient descent from zero weights.
inline TrainResult train_sentiment(const std::vector<corpus::LabeledText>& labeled, const TrainHyper& hyper = {}) {
  if (!(hyper.lr > 0.0) || hyper.l2 < 0.0) throw UsageError("sentiment: lr must be positive and l2 non-negative");
  bool any_pos = false;
  bool any_neg = false;
  for (const auto& e : labeled) (e.positive ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) throw DataError("sentiment training needs both pos and neg examples");

  std::vector<std::string> docs;
  std::vector<bool> ys;
  for (const auto& e : labeled) {
    docs.push_back(e.text);
    ys.push_back(e.positive);
  }
  TrainResult r;
  r.model.vocabulary = fit_vocabulary(docs, hyper.min_df);
  r.model.weights.assign(r.model.vocabulary.size(), 0.0);
  std::vector<TfIdfVector> xs;
  xs.reserve(docs.size());
  for (const auto& d : docs) xs.push_back(tfidf(d, r.model.vocabulary));

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto g = logistic_loss(xs, ys, r.model.weights, r.model.bias, hyper.l2);
    if (!std::isfinite(g.loss)) throw NumericError("sentiment: non-finite loss at epoch " + std::to_string(epoch));
    r.loss_history.push_back(g.loss);
    for (std::size_t i = 0; i < r.model.weights.size(); ++i) r.model.weights[i] -= hyper.lr * g.grad_w[i];
    r.model.bias -= hyper.lr * g.grad_b;
  }
  return r;
}

struct Prediction {
  bool positive = false;
  double probability = 0.5;  // P(pos)
};

/// pos iff sigmoid(w . tfidf(text) + b) >= 0.5.
inline Prediction classify(const SentimentModel& model, std::string_view text) {
  const auto x = tfidf(text, model.vocabulary);
  const double p = sigmoid(dot(x, model.weights) + model.bias);
  return {p >= 0.5, p};
}

// ---------------------------------------------------------------- aggregation

struct SentimentSummary {
  corpus::MovieId movie_id = 0;
  std::uint64_t positive = 0;
  std::uint64_t negative = 0;
  std::uint64_t total = 0;
  double ratio = 0.0;  // positive / max(negative, 1)

  bool operator==(const SentimentSummary&) const = default;
};

inline SentimentSummary make_summary(corpus::MovieId id, std::uint64_t positive, std::uint64_t negative) {
  SentimentSummary s;
  s.movie_id = id;
  s.positive = positive;
  s.negative = negative;
  s.total = positive + negative;
  s.ratio = static_cast<double>(positive) / static_cast<double>(std::max<std::uint64_t>(negative, 1));
  return s;
}

/// A post belongs to a movie through its movie_id, or, when that field is
/// null, by the movie name appearing in the text.
inline bool post_mentions(const corpus::Post& p, const corpus::Movie& m) {
  if (p.movie_id) return *p.movie_id == m.id;
  return !m.name.empty() && p.text.find(m.name) != std::string::npos;
}

/// Counts `is_positive(text)` over the movie's posts.
template <typename Classifier>
SentimentSummary summarize_movie(const corpus::Movie& movie, const std::vector<corpus::Post>& posts,
                                 Classifier&& is_positive) {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  for (const auto& p : posts) {
    if (!post_mentions(p, movie)) continue;
    if (is_positive(p.text)) {
      ++pos;
    } else {
      ++neg;
    }
  }
  return make_summary(movie.id, pos, neg);
}

inline SentimentSummary summarize_movie(const SentimentModel& model, const corpus::Movie& movie,
                                        const std::vector<corpus::Post>& posts) {
  return summarize_movie(movie, posts, [&](const std::string& t) { return classify(model, t).positive; });
}

inline std::map<corpus::MovieId, SentimentSummary> summarize_corpus(const SentimentModel& model,
                                                                    const corpus::Corpus& c) {
  // Classify each post once, then attribute it.
  std::vector<bool> label(c.posts.size());
  for (std::size_t k = 0; k < c.posts.size(); ++k) label[k] = classify(model, c.posts[k].text).positive;
  std::map<corpus::MovieId, SentimentSummary> out;
  for (const auto& m : c.movies) {
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    for (std::size_t k = 0; k < c.posts.size(); ++k) {
      if (!post_mentions(c.posts[k], m)) continue;
      (label[k] ? pos : neg) += 1;
    }
    out.emplace(m.id, make_summary(m.id, pos, neg));
  }
  return out;
}

inline const std::vector<std::string> kSummaryHeader = {"movie_id", "positive", "negative", "total", "ratio"};

inline void write_summaries(const std::map<corpus::MovieId, SentimentSummary>& summaries, const std::string& path) {
  std::string out = io::csv_line(kSummaryHeader);
  for (const auto& [id, s] : summaries) {
    out += io::csv_line({std::to_string(id), std::to_string(s.positive), std::to_string(s.negative),
                         std::to_string(s.total), io::format_double(s.ratio)});
  }
  io::write_file(path, out);
}

inline std::map<corpus::MovieId, SentimentSummary> read_summaries(const std::string& path) {
  std::map<corpus::MovieId, SentimentSummary> out;
  for (const auto& row : io::read_csv_with_header(path, kSummaryHeader)) {
    corpus::MovieId id{};
    std::uint64_t pos{};
    std::uint64_t neg{};
    if (!io::parse_number(row.fields[0], id) || !io::parse_number(row.fields[1], pos) ||
        !io::parse_number(row.fields[2], neg)) {
      throw ParseError(path, row.line, "invalid summary row");
    }
    out[id] = make_summary(id, pos, neg);
  }
  return out;
}

// ---------------------------------------------------------------- persistence

inline constexpr std::string_view kModelMagic = "CNSM";
inline constexpr std::uint8_t kModelVersion = 0x01;

inline std::string serialize_model(const SentimentModel& m) {
  io::BinaryWriter w;
  w.bytes(kModelMagic);
  w.u8(kModelVersion);
  w.u64(m.vocabulary.n_docs);
  w.u64(m.vocabulary.size());
  for (const auto& [gram, index] : m.vocabulary.grams) {
    w.str(io::utf8_encode(gram));
    w.u64(index);
    w.u64(m.vocabulary.doc_freq[index]);
  }
  w.f64s(m.weights);
  w.f64(m.bias);
  return w.data();
}

inline SentimentModel deserialize_model(std::string bytes, const std::string& name) {
  io::BinaryReader r(std::move(bytes), name);
  r.expect_magic(kModelMagic, kModelVersion);
  SentimentModel m;
  m.vocabulary.n_docs = r.u64();
  const auto v = r.u64();
  if (v > r.remaining()) throw FormatError(name + ": truncated vocabulary");
  m.vocabulary.doc_freq.assign(v, 0);
  std::vector<bool> seen(v, false);
  for (std::uint64_t k = 0; k < v; ++k) {
    auto gram = io::utf8_decode(r.str());
    const auto index = r.u64();
    const auto df = r.u64();
    if (gram.size() != 2 || index >= v || seen[index]) throw FormatError(name + ": corrupt vocabulary entry");
    seen[index] = true;
    m.vocabulary.grams.emplace(std::move(gram), index);
    m.vocabulary.doc_freq[index] = df;
  }
  m.weights = r.f64s(v);
  m.bias = r.f64();
  r.expect_end();
  return m;
}

inline void save_model(const SentimentModel& m, const std::string& path) { io::write_file(path, serialize_model(m)); }

inline SentimentModel load_model(const std::string& path) { return deserialize_model(io::read_file(path), path); }

}  // namespace boxoffice::sentiment
