#pragma once

// Actor representation vectors (10 measurement dims, P shortest-path dims,
// 1 art dim) and the per-movie model inputs built from them: a 5-dim
// metadata/sentiment vector, a front-padded L x 11 actor sequence and a
// front-padded L x P path block.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "boxoffice/corpus.hpp"
#include "boxoffice/error.hpp"
#include "boxoffice/graph.hpp"
#include "boxoffice/io.hpp"
#include "boxoffice/sentiment.hpp"

namespace boxoffice::repr {

inline constexpr std::size_t kMeasurementDims = graph::MeasurementVector::kDims;
inline constexpr std::size_t kActorDims = kMeasurementDims + 1;  // measurement + art
inline constexpr std::size_t kMetaDims = 5;
inline constexpr std::size_t kReferenceMaxCast = 225;

struct ActorRepresentation {
  std::array<double, kMeasurementDims> measurement{};
  std::vector<double> path;  // one entry per graph node
  double art = 0.0;

  std::size_t dimension() const { return kMeasurementDims + path.size() + 1; }
  bool operator==(const ActorRepresentation&) const = default;
};

/// Unknown actors (no account) get zero measurement and path parts; the
/// art part always comes from the filmography.
inline ActorRepresentation build_actor_representation(
    const corpus::ActorRecord& actor, const std::map<std::string, graph::MeasurementVector>& measurements,
    const graph::DistanceMatrix& distances, const graph::ActorGraph& g) {
  ActorRepresentation r;
  r.path.assign(distances.size(), 0.0);
  r.art = actor.art_feature;
  if (!actor.has_social()) return r;
  const auto node = g.index_of(*actor.account_id);
  if (!node) throw DataError("account '" + *actor.account_id + "' has no graph node");
  auto it = measurements.find(*actor.account_id);
  if (it == measurements.end()) throw DataError("no measurements for account '" + *actor.account_id + "'");
  r.measurement = it->second.to_array();
  const auto row = distances.row(*node);
  std::copy(row.begin(), row.end(), r.path.begin());
  return r;
}

struct MovieInput {
  corpus::MovieId movie_id = 0;
  std::array<double, kMetaDims> meta{};  // year, positive, negative, total, ratio
  std::size_t max_cast = 0;              // L
  std::size_t path_dims = 0;             // P
  std::size_t cast_len = 0;              // real rows, occupying the last cast_len positions
  std::vector<double> actor_seq;         // L x 11
  std::vector<double> path_block;        // L x P
  corpus::ClassLabel label = corpus::ClassLabel::A;

  std::size_t first_real_row() const { return max_cast - cast_len; }
  bool operator==(const MovieInput&) const = default;
};

struct BuiltInput {
  MovieInput input;
  bool truncated = false;
};

/// Meta = (release year, positive, negative, total, ratio). Cast rows are
/// in billing order and front-padded with zeros to L; casts longer than L
/// keep the first L billed actors.
inline BuiltInput build_movie_input(const corpus::Movie& movie,
                                    const std::map<corpus::MovieId, sentiment::SentimentSummary>& summaries,
                                    const std::map<std::string, ActorRepresentation>& representations,
                                    std::size_t max_cast, corpus::ClassLabel label) {
  if (max_cast < 1) throw UsageError("max cast length must be at least 1");
  BuiltInput out;
  auto& in = out.input;
  in.movie_id = movie.id;
  in.max_cast = max_cast;
  in.label = label;
  sentiment::SentimentSummary s;
  if (auto it = summaries.find(movie.id); it != summaries.end()) s = it->second;
  in.meta = {static_cast<double>(movie.release_year), static_cast<double>(s.positive),
             static_cast<double>(s.negative), static_cast<double>(s.total), s.ratio};

  std::vector<const ActorRepresentation*> rows;
  for (const auto& name : movie.cast) {
    auto it = representations.find(io::trim(name));
    if (it == representations.end()) throw DataError("no representation for cast member '" + name + "'");
    rows.push_back(&it->second);
  }
  if (rows.empty()) throw DataError("movie " + std::to_string(movie.id) + " has an empty cast");
  in.path_dims = rows.front()->path.size();
  if (rows.size() > max_cast) {
    rows.resize(max_cast);
    out.truncated = true;
  }
  in.cast_len = rows.size();
  in.actor_seq.assign(max_cast * kActorDims, 0.0);
  in.path_block.assign(max_cast * in.path_dims, 0.0);
  const auto offset = max_cast - rows.size();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = *rows[k];
    if (r.path.size() != in.path_dims) throw DataError("inconsistent path dimension across actors");
    double* a = &in.actor_seq[(offset + k) * kActorDims];
    std::copy(r.measurement.begin(), r.measurement.end(), a);
    a[kMeasurementDims] = r.art;
    std::copy(r.path.begin(), r.path.end(), in.path_block.begin() + static_cast<std::ptrdiff_t>((offset + k) * in.path_dims));
  }
  return out;
}

// ---------------------------------------------------------------- normalisation

struct NormStats {
  std::vector<double> meta_min, meta_max;    // kMetaDims
  std::vector<double> actor_min, actor_max;  // kActorDims
  std::vector<double> path_min, path_max;    // P

  bool operator==(const NormStats&) const = default;
};

namespace detail {

inline void widen(std::vector<double>& lo, std::vector<double>& hi, const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = std::min(lo[i], v[i]);
    hi[i] = std::max(hi[i], v[i]);
  }
}

inline void scale(double* v, const std::vector<double>& lo, const std::vector<double>& hi) {
  for (std::size_t i = 0; i < lo.size(); ++i) {
    const double range = hi[i] - lo[i];
    v[i] = range > 0.0 ? (v[i] - lo[i]) / range : 0.0;
  }
}

}  // namespace detail

/// Per-dimension min and max over the given inputs, skipping padding rows.
inline NormStats fit_normalization(const std::vector<MovieInput>& inputs) {
  if (inputs.empty()) throw DataError("cannot fit normalisation on no inputs");
  const auto P = inputs.front().path_dims;
  constexpr double inf = std::numeric_limits<double>::infinity();
  NormStats s{std::vector<double>(kMetaDims, inf), std::vector<double>(kMetaDims, -inf),
              std::vector<double>(kActorDims, inf), std::vector<double>(kActorDims, -inf),
              std::vector<double>(P, inf), std::vector<double>(P, -inf)};
  for (const auto& in : inputs) {
    if (in.path_dims != P) throw DataError("inconsistent path dimension across inputs");
    detail::widen(s.meta_min, s.meta_max, in.meta.data(), kMetaDims);
    for (auto row = in.first_real_row(); row < in.max_cast; ++row) {
      detail::widen(s.actor_min, s.actor_max, &in.actor_seq[row * kActorDims], kActorDims);
      detail::widen(s.path_min, s.path_max, &in.path_block[row * P], P);
    }
  }
  // Dimensions never observed (no real rows at all) scale to 0.
  for (auto* pair : {&s.actor_min, &s.actor_max, &s.path_min, &s.path_max}) {
    for (auto& v : *pair) {
      if (!std::isfinite(v)) v = 0.0;
    }
  }
  return s;
}

/// Min-max scaling of the non-padding rows and the meta vector. Padding
/// rows stay exactly zero. Constant dimensions map to 0.
inline MovieInput apply_normalization(MovieInput in, const NormStats& s) {
  if (s.meta_min.size() != kMetaDims || s.actor_min.size() != kActorDims || s.path_min.size() != in.path_dims) {
    throw DataError("normalisation stats do not match the input dimensions");
  }
  detail::scale(in.meta.data(), s.meta_min, s.meta_max);
  for (auto row = in.first_real_row(); row < in.max_cast; ++row) {
    detail::scale(&in.actor_seq[row * kActorDims], s.actor_min, s.actor_max);
    detail::scale(&in.path_block[row * in.path_dims], s.path_min, s.path_max);
  }
  return in;
}

/// Fits on `inputs` and returns them scaled together with the stats.
inline std::pair<std::vector<MovieInput>, NormStats> normalize_features(const std::vector<MovieInput>& inputs) {
  auto stats = fit_normalization(inputs);
  std::vector<MovieInput> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(apply_normalization(in, stats));
  return {std::move(out), std::move(stats)};
}

inline constexpr std::string_view kNormMagic = "CNNS";
inline constexpr std::uint8_t kNormVersion = 0x01;

inline void write_norm_stats(io::BinaryWriter& w, const NormStats& s) {
  w.bytes(kNormMagic);
  w.u8(kNormVersion);
  w.u64(s.path_min.size());
  for (const auto* v : {&s.meta_min, &s.meta_max, &s.actor_min, &s.actor_max, &s.path_min, &s.path_max}) w.f64s(*v);
}

inline NormStats read_norm_stats(io::BinaryReader& r) {
  r.expect_magic(kNormMagic, kNormVersion);
  const auto P = r.u64();
  NormStats s;
  s.meta_min = r.f64s(kMetaDims);
  s.meta_max = r.f64s(kMetaDims);
  s.actor_min = r.f64s(kActorDims);
  s.actor_max = r.f64s(kActorDims);
  s.path_min = r.f64s(P);
  s.path_max = r.f64s(P);
  return s;
}

}  // namespace boxoffice::repr
