#pragma once

// Test-only oracles and helpers. Nothing here calls the library's own
// graph algorithms, so comparisons against it are independent.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "boxoffice/graph.hpp"
#include "boxoffice/nn.hpp"
#include "boxoffice/rng.hpp"

namespace testing_support {

using boxoffice::Rng;
using boxoffice::graph::ActorGraph;

/// G(n, p) with nodes named "n0".."n{n-1}".
inline ActorGraph random_graph(std::size_t n, double p, Rng& rng) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("n" + std::to_string(i));
  ActorGraph g(ids);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) g.add_edge(i, j);
    }
  }
  return g;
}

inline ActorGraph graph_from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("n" + std::to_string(i));
  ActorGraph g(ids);
  for (auto [u, v] : edges) g.add_edge(u, v);
  return g;
}

/// Floyd-Warshall over the adjacency test, then the clamp at 9.
inline std::vector<std::vector<int>> floyd_warshall_clamped(const ActorGraph& g) {
  const auto n = g.size();
  constexpr int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && g.adjacent(i, j)) d[i][j] = 1;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  }
  for (auto& row : d) {
    for (auto& v : row) v = std::min(v, 9);
  }
  return d;
}

/// Betweenness by listing every simple s-t path, keeping the shortest ones
/// and counting interior vertices. Ordered pairs, halved at the end.
inline std::vector<double> brute_force_betweenness(const ActorGraph& g) {
  const auto n = g.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      if (s == t) continue;
      std::vector<std::vector<std::size_t>> paths;
      std::vector<std::size_t> path{s};
      std::vector<bool> on_path(n, false);
      on_path[s] = true;
      std::function<void(std::size_t)> dfs = [&](std::size_t v) {
        if (v == t) {
          paths.push_back(path);
          return;
        }
        for (std::size_t w = 0; w < n; ++w) {
          if (on_path[w] || !g.adjacent(v, w)) continue;
          on_path[w] = true;
          path.push_back(w);
          dfs(w);
          path.pop_back();
          on_path[w] = false;
        }
      };
      dfs(s);
      if (paths.empty()) continue;
      std::size_t shortest = std::numeric_limits<std::size_t>::max();
      for (const auto& p : paths) shortest = std::min(shortest, p.size());
      double sigma = 0.0;
      std::vector<double> through(n, 0.0);
      for (const auto& p : paths) {
        if (p.size() != shortest) continue;
        sigma += 1.0;
        for (std::size_t k = 1; k + 1 < p.size(); ++k) through[p[k]] += 1.0;
      }
      for (std::size_t v = 0; v < n; ++v) out[v] += through[v] / sigma;
    }
  }
  for (auto& v : out) v *= 0.5;
  return out;
}

/// Fills every parameter with uniform values in [-scale, scale].
inline void randomize(const std::vector<boxoffice::nn::Param>& params, Rng& rng, double scale = 0.5) {
  for (const auto& p : params) {
    for (auto& v : p.value->data) v = rng.uniform(-scale, scale);
  }
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// Sum of w_i * y_i, a generic scalar loss used to pull gradients through a
/// layer with an arbitrary upstream gradient.
inline double weighted_sum(const std::vector<double>& y, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

/// A fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("boxoffice_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
