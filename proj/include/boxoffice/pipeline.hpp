#pragma once

// Feature assembly for a whole corpus: labels, the train/test split,
// per-movie model inputs, normalisation fitted on the training split, and
// the tabular matrix used by the CART baseline. Also the on-disk features
// directory (features.bin + norm_stats.bin) and the CART baseline run.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "boxoffice/actor_repr.hpp"
#include "boxoffice/cart.hpp"
#include "boxoffice/corpus.hpp"
#include "boxoffice/error.hpp"
#include "boxoffice/graph.hpp"
#include "boxoffice/io.hpp"
#include "boxoffice/sentiment.hpp"

namespace boxoffice::pipeline {

using corpus::MovieId;
using repr::MovieInput;

struct FeatureOptions {
  std::size_t max_cast = 16;
  std::optional<double> threshold;  // default: corpus median
  double train_ratio = 0.8;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct MovieRecord {
  MovieInput input;  // raw (not normalised)
  std::string name;
  double box_office = 0.0;
};

struct FeatureSet {
  std::size_t max_cast = 0;
  std::size_t path_dims = 0;
  double threshold = 0.0;
  corpus::DatasetSplit split;
  std::vector<MovieRecord> movies;  // ascending movie id
  repr::NormStats norm;
  std::size_t truncated = 0;  // casts cut to max_cast

  const MovieRecord& movie(MovieId id) const {
    auto it = std::lower_bound(movies.begin(), movies.end(), id,
                               [](const MovieRecord& r, MovieId v) { return r.input.movie_id < v; });
    if (it == movies.end() || it->input.movie_id != id) throw UsageError("unknown movie id " + std::to_string(id));
    return *it;
  }

  std::vector<MovieInput> normalized(const std::vector<MovieId>& ids) const {
    std::vector<MovieInput> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(repr::apply_normalization(movie(id).input, norm));
    return out;
  }

  std::vector<MovieInput> train_inputs() const { return normalized(split.train); }
  std::vector<MovieInput> test_inputs() const { return normalized(split.test); }

  bool operator==(const FeatureSet&) const = default;
};

inline bool operator==(const MovieRecord& a, const MovieRecord& b) {
  return a.input == b.input && a.name == b.name && a.box_office == b.box_office;
}

/// Art features are computed from training-split grosses only. Every
/// actor's representation uses the full social graph.
inline FeatureSet build_feature_set(corpus::Corpus c,
                                    const std::map<MovieId, sentiment::SentimentSummary>& summaries,
                                    const FeatureOptions& opt) {
  if (c.movies.size() < 2) throw DataError("need at least two movies to build features");
  if (opt.max_cast < 1) throw UsageError("max cast length must be at least 1");
  FeatureSet fs;
  fs.max_cast = opt.max_cast;
  fs.threshold = opt.threshold ? *opt.threshold : corpus::median_box_office(c);
  const auto labels = corpus::label_movies(c, fs.threshold);

  std::vector<MovieId> ids;
  for (const auto& m : c.movies) ids.push_back(m.id);
  fs.split = corpus::split_dataset(ids, opt.train_ratio, opt.seed);

  const std::unordered_set<MovieId> train_ids(fs.split.train.begin(), fs.split.train.end());
  corpus::apply_art_features(c, corpus::compute_art_features(c, &train_ids));

  const auto gf = graph::compute_graph_features(c, opt.threads);
  fs.path_dims = gf.distances.size();
  if (fs.path_dims == 0) throw DataError("the social graph has no nodes; path features need at least one account");

  std::map<std::string, repr::ActorRepresentation> reps;
  for (const auto& a : c.actors) {
    reps.emplace(a.name, repr::build_actor_representation(a, gf.measurements, gf.distances, gf.graph));
  }

  auto movies = c.movies;
  std::sort(movies.begin(), movies.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& m : movies) {
    auto built = repr::build_movie_input(m, summaries, reps, opt.max_cast, labels.at(m.id));
    if (built.truncated) ++fs.truncated;
    fs.movies.push_back({std::move(built.input), m.name, m.box_office});
  }

  std::vector<MovieInput> train_raw;
  for (auto id : fs.split.train) train_raw.push_back(fs.movie(id).input);
  fs.norm = repr::fit_normalization(train_raw);
  return fs;
}

// ---------------------------------------------------------------- tabular features

/// Meta (5) followed by the cast mean of the 11 actor dimensions.
inline std::vector<std::string> cart_feature_names() {
  std::vector<std::string> names{"release_year", "positive", "negative", "total", "ratio"};
  for (auto* n : graph::MeasurementVector::kNames) names.push_back(std::string("mean_") + n);
  names.emplace_back("mean_art");
  return names;
}

inline std::vector<double> cart_row(const MovieInput& in) {
  std::vector<double> row(in.meta.begin(), in.meta.end());
  std::vector<double> mean(repr::kActorDims, 0.0);
  for (auto r = in.first_real_row(); r < in.max_cast; ++r) {
    for (std::size_t d = 0; d < repr::kActorDims; ++d) mean[d] += in.actor_seq[r * repr::kActorDims + d];
  }
  for (auto& v : mean) v /= static_cast<double>(std::max<std::size_t>(in.cast_len, 1));
  row.insert(row.end(), mean.begin(), mean.end());
  return row;
}

struct CartData {
  cart::Matrix x;
  std::vector<double> y;
};

inline CartData cart_data(const FeatureSet& fs, const std::vector<MovieId>& ids) {
  CartData d;
  for (auto id : ids) {
    const auto& m = fs.movie(id);
    d.x.push_back(cart_row(m.input));
    d.y.push_back(m.box_office);
  }
  return d;
}

struct CartReport {
  cart::Tree tree;
  double train_r2 = 0.0;
  double test_r2 = 0.0;
  double test_mad = 0.0;
  double train_mad = 0.0;
  std::string dump;
};

/// Regression tree on box office over the tabular features.
inline CartReport run_cart_baseline(const FeatureSet& fs, const cart::TreeParams& params) {
  const auto train = cart_data(fs, fs.split.train);
  const auto test = cart_data(fs, fs.split.test);
  CartReport r;
  r.tree = cart::fit_tree(train.x, train.y, params);
  const auto p_train = cart::predict_rows(r.tree, train.x);
  const auto p_test = cart::predict_rows(r.tree, test.x);
  r.train_r2 = cart::r_squared(train.y, p_train);
  r.test_r2 = cart::r_squared(test.y, p_test);
  r.train_mad = cart::mean_abs_dev(train.y, p_train);
  r.test_mad = cart::mean_abs_dev(test.y, p_test);
  r.dump = cart::dump_tree(r.tree, cart_feature_names());
  return r;
}

/// key = value text with max_depth (a count or "inf") and min_samples_leaf.
inline cart::TreeParams parse_tree_params(const std::map<std::string, std::string>& kv) {
  cart::TreeParams p;
  for (const auto& [k, v] : kv) {
    if (k == "max_depth") {
      if (v == "inf" || v == "none") {
        p.max_depth.reset();
      } else {
        std::size_t d{};
        if (!io::parse_number(v, d)) throw UsageError("config: invalid value for max_depth: '" + v + "'");
        p.max_depth = d;
      }
    } else if (k == "min_samples_leaf") {
      if (!io::parse_number(v, p.min_samples_leaf) || p.min_samples_leaf < 1) {
        throw UsageError("config: invalid value for min_samples_leaf: '" + v + "'");
      }
    } else {
      throw UsageError("config: unknown key '" + k + "'");
    }
  }
  return p;
}

// ---------------------------------------------------------------- persistence

inline constexpr std::string_view kFeaturesMagic = "CNFS";
inline constexpr std::uint8_t kFeaturesVersion = 0x01;
inline constexpr const char* kFeaturesFile = "features.bin";
inline constexpr const char* kNormFile = "norm_stats.bin";

inline std::string serialize_features(const FeatureSet& fs) {
  io::BinaryWriter w;
  w.bytes(kFeaturesMagic);
  w.u8(kFeaturesVersion);
  w.u64(fs.max_cast);
  w.u64(fs.path_dims);
  w.f64(fs.threshold);
  w.u64(fs.split.seed);
  w.u64(fs.truncated);
  for (const auto* ids : {&fs.split.train, &fs.split.test}) {
    w.u64(ids->size());
    for (auto id : *ids) w.i64(id);
  }
  w.u64(fs.movies.size());
  for (const auto& m : fs.movies) {
    const auto& in = m.input;
    w.i64(in.movie_id);
    w.str(m.name);
    w.f64(m.box_office);
    w.u8(static_cast<std::uint8_t>(in.label));
    w.u64(in.cast_len);
    w.f64s(in.meta);
    w.f64s(in.actor_seq);
    w.f64s(in.path_block);
  }
  return w.data();
}

inline FeatureSet deserialize_features(io::BinaryReader& r) {
  r.expect_magic(kFeaturesMagic, kFeaturesVersion);
  FeatureSet fs;
  fs.max_cast = r.u64();
  fs.path_dims = r.u64();
  fs.threshold = r.f64();
  fs.split.seed = r.u64();
  fs.truncated = r.u64();
  if (fs.max_cast == 0 || fs.path_dims == 0) throw FormatError(r.name() + ": zero feature dimensions");
  for (auto* ids : {&fs.split.train, &fs.split.test}) {
    const auto n = r.u64();
    if (n > r.remaining() / 8) throw FormatError(r.name() + ": truncated split");
    for (std::uint64_t k = 0; k < n; ++k) ids->push_back(r.i64());
  }
  const auto n = r.u64();
  if (n > r.remaining()) throw FormatError(r.name() + ": truncated movie table");
  for (std::uint64_t k = 0; k < n; ++k) {
    MovieRecord m;
    auto& in = m.input;
    in.movie_id = r.i64();
    m.name = r.str();
    m.box_office = r.f64();
    const auto label = r.u8();
    if (label > 1) throw FormatError(r.name() + ": bad class label");
    in.label = static_cast<corpus::ClassLabel>(label);
    in.cast_len = r.u64();
    if (in.cast_len == 0 || in.cast_len > fs.max_cast) throw FormatError(r.name() + ": bad cast length");
    in.max_cast = fs.max_cast;
    in.path_dims = fs.path_dims;
    const auto meta = r.f64s(repr::kMetaDims);
    std::copy(meta.begin(), meta.end(), in.meta.begin());
    in.actor_seq = r.f64s(fs.max_cast * repr::kActorDims);
    in.path_block = r.f64s(fs.max_cast * fs.path_dims);
    fs.movies.push_back(std::move(m));
  }
  for (const auto* ids : {&fs.split.train, &fs.split.test}) {
    for (auto id : *ids) {
      try {
        (void)fs.movie(id);
      } catch (const UsageError&) {
        throw FormatError(r.name() + ": split references unknown movie " + std::to_string(id));
      }
    }
  }
  return fs;
}

inline void save_feature_set(const FeatureSet& fs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_file((dir / kFeaturesFile).string(), serialize_features(fs));
  io::BinaryWriter w;
  repr::write_norm_stats(w, fs.norm);
  w.save((dir / kNormFile).string());
}

inline FeatureSet load_feature_set(const std::filesystem::path& dir) {
  auto r = io::BinaryReader::open((dir / kFeaturesFile).string());
  auto fs = deserialize_features(r);
  r.expect_end();
  auto nr = io::BinaryReader::open((dir / kNormFile).string());
  fs.norm = repr::read_norm_stats(nr);
  nr.expect_end();
  if (fs.norm.path_min.size() != fs.path_dims) throw FormatError(nr.name() + ": path dimension mismatch");
  return fs;
}

}  // namespace boxoffice::pipeline
