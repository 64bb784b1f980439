#pragma once

// Actor social graph and the structural features derived from it:
// sentinel-clamped all-pairs hop distances, Brandes betweenness,
// Wasserman-Faust closeness and post co-occurrence counts.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "boxoffice/corpus.hpp"
#include "boxoffice/error.hpp"
#include "boxoffice/io.hpp"

namespace boxoffice::graph {

/// Distance recorded for unreachable pairs and for any hop count >= 9.
inline constexpr std::uint8_t kUnreachable = 9;

/// Undirected simple graph over social accounts.
class ActorGraph {
 public:
  ActorGraph() = default;

  explicit ActorGraph(std::vector<std::string> nodes) : nodes_(std::move(nodes)), adj_(nodes_.size()) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!index_.emplace(nodes_[i], i).second) throw DataError("duplicate graph node '" + nodes_[i] + "'");
    }
  }

  /// Adds an undirected edge. Self-loops and repeats are ignored.
  void add_edge(std::size_t u, std::size_t v) {
    if (u >= size() || v >= size()) throw UsageError("edge endpoint out of range");
    if (u == v) return;
    auto insert_sorted = [](std::vector<std::size_t>& list, std::size_t x) {
      auto it = std::lower_bound(list.begin(), list.end(), x);
      if (it == list.end() || *it != x) list.insert(it, x);
    };
    insert_sorted(adj_[u], v);
    insert_sorted(adj_[v], u);
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return adj_[v]; }

  bool adjacent(std::size_t u, std::size_t v) const {
    return std::binary_search(adj_[u].begin(), adj_[u].end(), v);
  }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& a : adj_) twice += a.size();
    return twice / 2;
  }

  std::optional<std::size_t> index_of(const std::string& account) const {
    auto it = index_.find(account);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> nodes_;
  std::vector<std::vector<std::size_t>> adj_;
  std::map<std::string, std::size_t> index_;
};

/// Nodes are the corpus accounts in file order; edges are symmetrised and
/// de-duplicated.
inline ActorGraph build_graph(const corpus::Corpus& c) {
  std::vector<std::string> ids;
  ids.reserve(c.accounts.size());
  for (const auto& a : c.accounts) ids.push_back(a.account_id);
  ActorGraph g(std::move(ids));
  for (const auto& e : c.edges) {
    auto u = g.index_of(e.src);
    auto v = g.index_of(e.dst);
    if (!u || !v) throw DataError("edge references unknown account");
    g.add_edge(*u, *v);
  }
  return g;
}

/// n x n grid of clamped hop distances, row-major.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), entries_(n * n, kUnreachable) {
    for (std::size_t i = 0; i < n; ++i) entries_[i * n + i] = 0;
  }

  std::size_t size() const { return n_; }
  std::uint8_t operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::uint8_t& operator()(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }
  std::span<const std::uint8_t> row(std::size_t i) const { return {entries_.data() + i * n_, n_}; }
  const std::vector<std::uint8_t>& entries() const { return entries_; }

  bool operator==(const DistanceMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> entries_;
};

/// Unclamped BFS hop distances from `source`; -1 marks unreachable nodes.
inline std::vector<std::int64_t> bfs_distances(const ActorGraph& g, std::size_t source) {
  std::vector<std::int64_t> dist(g.size(), -1);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (auto w : g.neighbors(v)) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

namespace detail {

/// Calls `body(k)` for every k in [0, count), spreading indices over
/// `threads` workers by striding. Each index is handled exactly once.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&body, count, threads, t] {
      for (std::size_t k = t; k < count; k += threads) body(k);
    });
  }
}

/// Sources per betweenness partial sum. Fixed so the floating-point
/// reduction order does not depend on the thread count.
inline constexpr std::size_t kSourceBlock = 32;

}  // namespace detail

/// BFS from every source. Entry (i, j) is min(hops, 9), 9 when unreachable.
/// Sources are independent and may run on `threads` workers.
inline DistanceMatrix all_pairs_shortest_paths(const ActorGraph& g, unsigned threads = 1) {
  const auto n = g.size();
  DistanceMatrix m(n);
  detail::parallel_for(n, threads, [&](std::size_t s) {
    const auto dist = bfs_distances(g, s);
    for (std::size_t t = 0; t < n; ++t) {
      m(s, t) = dist[t] < 0 || dist[t] >= kUnreachable ? kUnreachable : static_cast<std::uint8_t>(dist[t]);
    }
  });
  return m;
}

/// Unnormalised shortest-path betweenness by Brandes' dependency
/// accumulation, halved because every pair is seen from both ends.
inline std::vector<double> betweenness(const ActorGraph& g, unsigned threads = 1) {
  const auto n = g.size();
  const auto blocks = (n + detail::kSourceBlock - 1) / detail::kSourceBlock;
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(n, 0.0));
  detail::parallel_for(blocks, threads, [&](std::size_t block) {
    auto& acc = partial[block];
    const auto first = block * detail::kSourceBlock;
    const auto last = std::min(n, first + detail::kSourceBlock);
    std::vector<std::int64_t> dist(n);
    std::vector<double> sigma(n);
    std::vector<double> delta(n);
    std::vector<std::vector<std::size_t>> preds(n);
    std::vector<std::size_t> order;
    for (auto s = first; s < last; ++s) {
      std::fill(dist.begin(), dist.end(), -1);
      std::fill(sigma.begin(), sigma.end(), 0.0);
      std::fill(delta.begin(), delta.end(), 0.0);
      for (auto& p : preds) p.clear();
      order.clear();
      dist[s] = 0;
      sigma[s] = 1.0;
      std::deque<std::size_t> queue{s};
      while (!queue.empty()) {
        const auto v = queue.front();
        queue.pop_front();
        order.push_back(v);
        for (auto w : g.neighbors(v)) {
          if (dist[w] < 0) {
            dist[w] = dist[v] + 1;
            queue.push_back(w);
          }
          if (dist[w] == dist[v] + 1) {
            sigma[w] += sigma[v];
            preds[w].push_back(v);
          }
        }
      }
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto w = *it;
        for (auto v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        if (w != s) acc[w] += delta[w];
      }
    }
  });
  std::vector<double> out(n, 0.0);
  for (const auto& p : partial) {
    for (std::size_t v = 0; v < n; ++v) out[v] += p[v];
  }
  for (auto& x : out) x *= 0.5;
  return out;
}

/// Wasserman-Faust closeness: (r / (n - 1)) * (r / D) for r reachable
/// others at total distance D; 0 for isolated nodes. Uses true hop counts,
/// not the clamped matrix.
inline std::vector<double> closeness(const ActorGraph& g) {
  const auto n = g.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  for (std::size_t v = 0; v < n; ++v) {
    const auto dist = bfs_distances(g, v);
    std::int64_t reachable = 0;
    std::int64_t total = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (t != v && dist[t] > 0) {
        ++reachable;
        total += dist[t];
      }
    }
    if (reachable == 0) continue;
    const auto r = static_cast<double>(reachable);
    out[v] = (r / static_cast<double>(n - 1)) * (r / static_cast<double>(total));
  }
  return out;
}

/// For each dictionary name, the number of posts whose text contains that
/// name and at least one other dictionary name (plain substring match).
inline std::map<std::string, std::uint64_t> co_occurrence_counts(const std::vector<corpus::Post>& posts,
                                                                 const std::vector<std::string>& dictionary) {
  if (dictionary.empty()) throw UsageError("co-occurrence needs a non-empty dictionary");
  std::map<std::string, std::uint64_t> counts;
  std::vector<std::string> names;
  for (const auto& raw : dictionary) {
    auto name = io::trim(raw);
    if (name.empty() || counts.contains(name)) continue;
    counts[name] = 0;
    names.push_back(name);
  }
  std::vector<std::size_t> hits;
  for (const auto& p : posts) {
    hits.clear();
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (p.text.find(names[k]) != std::string::npos) hits.push_back(k);
    }
    if (hits.size() < 2) continue;
    for (auto k : hits) counts[names[k]] += 1;
  }
  return counts;
}

/// The ten measurement dimensions, in canonical order.
struct MeasurementVector {
  double fans = 0;
  double betweenness = 0;
  double closeness = 0;
  double followers = 0;
  double post_count = 0;
  double avg_post_interval = 0;
  double avg_post_chars = 0;
  double retweet_count = 0;
  double movie_mention_count = 0;
  double co_occurrence = 0;

  static constexpr std::size_t kDims = 10;
  static constexpr std::array<const char*, kDims> kNames = {
      "fans",           "betweenness",   "closeness",           "followers",    "post_count",
      "avg_post_interval", "avg_post_chars", "retweet_count", "movie_mention_count", "co_occurrence"};

  std::array<double, kDims> to_array() const {
    return {fans,           betweenness,   closeness,           followers,    post_count,
            avg_post_interval, avg_post_chars, retweet_count, movie_mention_count, co_occurrence};
  }

  bool operator==(const MeasurementVector&) const = default;
};

inline std::map<std::string, MeasurementVector> assemble_measurements(
    const corpus::Corpus& c, const ActorGraph& g, const std::vector<double>& betweenness_values,
    const std::vector<double>& closeness_values, const std::map<std::string, std::uint64_t>& co_occurrence) {
  if (betweenness_values.size() != g.size() || closeness_values.size() != g.size()) {
    throw UsageError("centrality vectors do not match the graph size");
  }
  std::map<std::string, MeasurementVector> out;
  for (const auto& a : c.accounts) {
    const auto node = g.index_of(a.account_id);
    if (!node) throw DataError("account '" + a.account_id + "' is not a graph node");
    MeasurementVector m;
    m.fans = static_cast<double>(a.fans);
    m.betweenness = betweenness_values[*node];
    m.closeness = closeness_values[*node];
    m.followers = static_cast<double>(a.followers);
    m.post_count = static_cast<double>(a.post_count);
    m.avg_post_interval = a.avg_post_interval_hours;
    m.avg_post_chars = a.avg_post_chars;
    m.retweet_count = static_cast<double>(a.retweet_count);
    m.movie_mention_count = static_cast<double>(a.movie_mention_count);
    auto it = co_occurrence.find(io::trim(a.actor_name));
    m.co_occurrence = it == co_occurrence.end() ? 0.0 : static_cast<double>(it->second);
    out.emplace(a.account_id, m);
  }
  return out;
}

/// Everything graph-derived that downstream modules need.
struct GraphFeatures {
  ActorGraph graph;
  DistanceMatrix distances;
  std::map<std::string, MeasurementVector> measurements;  // by account id
};

inline GraphFeatures compute_graph_features(const corpus::Corpus& c, unsigned threads = 1) {
  GraphFeatures f;
  f.graph = build_graph(c);
  f.distances = all_pairs_shortest_paths(f.graph, threads);
  std::vector<std::string> dictionary;
  for (const auto& a : c.actors) dictionary.push_back(a.name);
  std::map<std::string, std::uint64_t> co;
  if (!dictionary.empty()) co = co_occurrence_counts(c.posts, dictionary);
  f.measurements = assemble_measurements(c, f.graph, betweenness(f.graph, threads), closeness(f.graph), co);
  return f;
}

// ---------------------------------------------------------------- persistence

inline constexpr std::string_view kDistanceMagic = "CNDM";
inline constexpr std::uint8_t kDistanceVersion = 0x01;

inline std::string serialize_distance_matrix(const DistanceMatrix& m) {
  io::BinaryWriter w;
  w.bytes(kDistanceMagic);
  w.u8(kDistanceVersion);
  w.u64(m.size());
  w.bytes(std::string_view(reinterpret_cast<const char*>(m.entries().data()), m.entries().size()));
  return w.data();
}

inline DistanceMatrix deserialize_distance_matrix(std::string bytes, const std::string& name) {
  io::BinaryReader r(std::move(bytes), name);
  r.expect_magic(kDistanceMagic, kDistanceVersion);
  const auto n = r.u64();
  if (n > 0 && n > r.remaining() / n) throw FormatError(name + ": truncated distance payload");
  if (r.remaining() < n * n) {
    throw FormatError(name + ": truncated distance payload, expected " + std::to_string(n * n) + " bytes, found " +
                      std::to_string(r.remaining()));
  }
  if (r.remaining() > n * n) throw FormatError(name + ": trailing bytes after distance payload");
  DistanceMatrix m(n);
  const auto payload = r.bytes(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = static_cast<std::uint8_t>(payload[i * n + j]);
      if (v > kUnreachable) throw FormatError(name + ": distance entry out of range");
      m(i, j) = v;
    }
  }
  return m;
}

inline void save_distance_matrix(const DistanceMatrix& m, const std::string& path) {
  io::write_file(path, serialize_distance_matrix(m));
}

inline DistanceMatrix load_distance_matrix(const std::string& path) {
  return deserialize_distance_matrix(io::read_file(path), path);
}

/// measurements.csv: account_id followed by the ten dimensions.
inline std::string measurements_csv(const std::map<std::string, MeasurementVector>& measurements,
                                    const ActorGraph& g) {
  std::vector<std::string> header{"account_id"};
  for (auto* n : MeasurementVector::kNames) header.emplace_back(n);
  std::string out = io::csv_line(header);
  for (const auto& id : g.nodes()) {
    auto it = measurements.find(id);
    if (it == measurements.end()) continue;
    std::vector<std::string> row{id};
    for (double v : it->second.to_array()) row.push_back(io::format_double(v));
    out += io::csv_line(row);
  }
  return out;
}

}  // namespace boxoffice::graph
