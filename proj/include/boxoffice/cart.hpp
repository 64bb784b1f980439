#pragma once

// CART decision trees (variance-reduction regression, Gini classification)
// and the regression metrics used to score them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "boxoffice/error.hpp"
#include "boxoffice/io.hpp"

namespace boxoffice::cart {

/// 1 - sum p_k^2. Zero for a pure node.
inline double gini_impurity(std::span<const std::uint64_t> class_counts) {
  const auto total = std::accumulate(class_counts.begin(), class_counts.end(), std::uint64_t{0});
  if (total == 0) throw UsageError("gini impurity of an empty node");
  double sum_sq = 0.0;
  for (auto c : class_counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

enum class SplitCriterion : std::uint8_t { variance_reduction = 0, gini = 1 };

struct TreeParams {
  std::optional<std::size_t> max_depth = 8;  // nullopt: unlimited
  std::size_t min_samples_leaf = 5;
  SplitCriterion criterion = SplitCriterion::variance_reduction;
};

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  double value = 0.0;                        // regression mean or majority class
  std::vector<std::uint64_t> class_counts;  // classification only
  std::size_t samples = 0;

  bool operator==(const TreeNode&) const = default;
};

/// Flat tree; node 0 is the root.
struct Tree {
  SplitCriterion criterion = SplitCriterion::variance_reduction;
  std::size_t n_features = 0;
  std::vector<TreeNode> nodes;

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].leaf) {
        stack.emplace_back(nodes[i].left, d + 1);
        stack.emplace_back(nodes[i].right, d + 1);
      }
    }
    return best;
  }

  bool operator==(const Tree&) const = default;
};

using Matrix = std::vector<std::vector<double>>;

namespace detail {

struct Builder {
  const Matrix& x;
  const std::vector<double>& y;
  TreeParams params;
  std::size_t n_classes = 0;
  Tree tree;

  double node_impurity(std::span<const std::size_t> idx) const {
    if (params.criterion == SplitCriterion::gini) {
      std::vector<std::uint64_t> counts(n_classes, 0);
      for (auto i : idx) counts[static_cast<std::size_t>(y[i])] += 1;
      return gini_impurity(counts) * static_cast<double>(idx.size());
    }
    double mean = 0.0;
    for (auto i : idx) mean += y[i];
    mean /= static_cast<double>(idx.size());
    double sse = 0.0;
    for (auto i : idx) sse += (y[i] - mean) * (y[i] - mean);
    return sse;
  }

  // Exact test; the summed impurity can be a rounding residue above zero.
  bool pure(std::span<const std::size_t> idx) const {
    for (auto i : idx) {
      if (y[i] != y[idx.front()]) return false;
    }
    return true;
  }

  void make_leaf(TreeNode& node, std::span<const std::size_t> idx) const {
    node.leaf = true;
    node.samples = idx.size();
    if (params.criterion == SplitCriterion::gini) {
      node.class_counts.assign(n_classes, 0);
      for (auto i : idx) node.class_counts[static_cast<std::size_t>(y[i])] += 1;
      auto it = std::max_element(node.class_counts.begin(), node.class_counts.end());
      node.value = static_cast<double>(it - node.class_counts.begin());
    } else {
      double s = 0.0;
      for (auto i : idx) s += y[i];
      node.value = s / static_cast<double>(idx.size());
    }
  }

  struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double decrease = 0.0;
  };

  // Weighted impurity (sum over members) of a side given running stats.
  double side_cost(double sum, double sum_sq, std::size_t n, const std::vector<std::uint64_t>& counts) const {
    if (params.criterion == SplitCriterion::gini) {
      double sq = 0.0;
      for (auto c : counts) sq += static_cast<double>(c) * static_cast<double>(c);
      return static_cast<double>(n) - sq / static_cast<double>(n);
    }
    return std::max(0.0, sum_sq - sum * sum / static_cast<double>(n));
  }

  Split best_split(std::span<const std::size_t> idx, double parent_cost) const {
    Split best;
    const auto n = idx.size();
    std::vector<std::size_t> order(idx.begin(), idx.end());
    // Targets are centred on the node mean to limit cancellation in
    // sum_sq - sum^2 / n.
    double centre = 0.0;
    if (params.criterion == SplitCriterion::variance_reduction) {
      for (auto i : idx) centre += y[i];
      centre /= static_cast<double>(n);
    }
    auto yc = [&](std::size_t i) { return n_classes ? y[i] : y[i] - centre; };
    for (std::size_t f = 0; f < tree.n_features; ++f) {
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a][f] < x[b][f]; });
      double total = 0.0;
      double total_sq = 0.0;
      std::vector<std::uint64_t> total_counts(n_classes, 0);
      for (auto i : order) {
        total += yc(i);
        total_sq += yc(i) * yc(i);
        if (n_classes) total_counts[static_cast<std::size_t>(y[i])] += 1;
      }
      double left = 0.0;
      double left_sq = 0.0;
      std::vector<std::uint64_t> left_counts(n_classes, 0);
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto i = order[k];
        left += yc(i);
        left_sq += yc(i) * yc(i);
        if (n_classes) left_counts[static_cast<std::size_t>(y[i])] += 1;
        const double a = x[i][f];
        const double b = x[order[k + 1]][f];
        if (!(a < b)) continue;
        const auto n_left = k + 1;
        const auto n_right = n - n_left;
        if (n_left < params.min_samples_leaf || n_right < params.min_samples_leaf) continue;
        std::vector<std::uint64_t> right_counts(n_classes, 0);
        for (std::size_t c = 0; c < n_classes; ++c) right_counts[c] = total_counts[c] - left_counts[c];
        const double cost = side_cost(left, left_sq, n_left, left_counts) +
                            side_cost(total - left, total_sq - left_sq, n_right, right_counts);
        const double decrease = parent_cost - cost;
        const double tol = 1e-12 * std::max(1.0, std::abs(best.decrease));
        // Ascending feature and threshold scan: only a strictly better
        // decrease displaces the incumbent.
        if (!best.found || decrease > best.decrease + tol) {
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          best = {true, f, mid, decrease};
        }
      }
    }
    return best;
  }

  std::size_t grow(std::vector<std::size_t> idx, std::size_t depth) {
    const auto id = tree.nodes.size();
    tree.nodes.emplace_back();
    const double cost = node_impurity(idx);
    const bool depth_exhausted = params.max_depth && depth >= *params.max_depth;
    Split split;
    if (!depth_exhausted && !pure(idx) && idx.size() >= 2 * params.min_samples_leaf) split = best_split(idx, cost);
    if (!split.found) {
      make_leaf(tree.nodes[id], idx);
      return id;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : idx) (x[i][split.feature] <= split.threshold ? left : right).push_back(i);
    {
      auto& node = tree.nodes[id];
      node.leaf = false;
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.samples = idx.size();
      node.value = 0.0;
    }
    const auto l = grow(std::move(left), depth + 1);
    const auto r = grow(std::move(right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace detail

/// Greedy CART. Candidate thresholds are midpoints between consecutive
/// distinct sorted values; ties in impurity decrease keep the lowest
/// feature index, then the lowest threshold. For classification, y holds
/// class indices 0..K-1.
inline Tree fit_tree(const Matrix& x, const std::vector<double>& y, const TreeParams& params = {}) {
  if (x.empty() || x.size() != y.size()) throw DataError("fit_tree: need equal, non-zero numbers of rows and targets");
  if (params.min_samples_leaf < 1) throw UsageError("fit_tree: min_samples_leaf must be at least 1");
  const auto d = x.front().size();
  for (const auto& row : x) {
    if (row.size() != d) throw DataError("fit_tree: ragged feature matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw DataError("fit_tree: non-finite feature value");
    }
  }
  std::size_t n_classes = 0;
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("fit_tree: non-finite target");
    if (params.criterion == SplitCriterion::gini) {
      if (v < 0.0 || v != std::floor(v)) throw DataError("fit_tree: class targets must be non-negative integers");
      n_classes = std::max(n_classes, static_cast<std::size_t>(v) + 1);
    }
  }
  detail::Builder b{x, y, params, n_classes, {}};
  b.tree.criterion = params.criterion;
  b.tree.n_features = d;
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  b.grow(std::move(idx), 0);
  return std::move(b.tree);
}

/// Value at the leaf reached by routing x left iff x[feature] <= threshold.
inline double predict_tree(const Tree& tree, std::span<const double> x) {
  if (x.size() != tree.n_features) {
    throw UsageError("predict_tree: expected " + std::to_string(tree.n_features) + " features, got " +
                     std::to_string(x.size()));
  }
  std::size_t i = 0;
  while (!tree.nodes[i].leaf) {
    const auto& n = tree.nodes[i];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return tree.nodes[i].value;
}

inline std::vector<double> predict_rows(const Tree& tree, const Matrix& x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) out.push_back(predict_tree(tree, row));
  return out;
}

/// Indented text rendering of the fitted tree.
inline std::string dump_tree(const Tree& tree, const std::vector<std::string>& feature_names = {}) {
  std::ostringstream out;
  auto name = [&](std::size_t f) {
    return f < feature_names.size() ? feature_names[f] : "x[" + std::to_string(f) + "]";
  };
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, depth] = stack.back();
    stack.pop_back();
    const auto& n = tree.nodes[i];
    out << std::string(2 * depth, ' ');
    if (n.leaf) {
      out << "leaf value=" << io::format_double(n.value) << " samples=" << n.samples << "\n";
    } else {
      out << name(n.feature) << " <= " << io::format_double(n.threshold) << " samples=" << n.samples << "\n";
      stack.emplace_back(n.right, depth + 1);
      stack.emplace_back(n.left, depth + 1);
    }
  }
  return out.str();
}

// ---------------------------------------------------------------- metrics

inline void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.empty() || a.size() != b.size()) throw UsageError(std::string(what) + ": need equal, non-zero lengths");
}

/// 1 - SS_res / SS_tot. Undefined (rejected) for constant y_true.
inline double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  check_pair(y_true, y_pred, "r_squared");
  const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / static_cast<double>(y_true.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (ss_tot == 0.0) throw DataError("r_squared is undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

inline double mean_abs_dev(std::span<const double> y_true, std::span<const double> y_pred) {
  check_pair(y_true, y_pred, "mean_abs_dev");
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]);
  return s / static_cast<double>(y_true.size());
}

/// Pearson correlation; rejects constant inputs.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "pearson");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw DataError("pearson correlation is undefined for a constant input");
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------- persistence

inline constexpr std::string_view kTreeMagic = "CNCT";
inline constexpr std::uint8_t kTreeVersion = 0x01;

inline std::string serialize_tree(const Tree& t) {
  io::BinaryWriter w;
  w.bytes(kTreeMagic);
  w.u8(kTreeVersion);
  w.u8(static_cast<std::uint8_t>(t.criterion));
  w.u64(t.n_features);
  w.u64(t.nodes.size());
  for (const auto& n : t.nodes) {
    w.u8(n.leaf ? 1 : 0);
    w.u64(n.feature);
    w.f64(n.threshold);
    w.u64(n.left);
    w.u64(n.right);
    w.f64(n.value);
    w.u64(n.samples);
    w.u64(n.class_counts.size());
    for (auto c : n.class_counts) w.u64(c);
  }
  return w.data();
}

inline Tree deserialize_tree(io::BinaryReader& r) {
  r.expect_magic(kTreeMagic, kTreeVersion);
  Tree t;
  const auto crit = r.u8();
  if (crit > 1) throw FormatError(r.name() + ": unknown split criterion");
  t.criterion = static_cast<SplitCriterion>(crit);
  t.n_features = r.u64();
  const auto count = r.u64();
  if (count == 0 || count > r.remaining()) throw FormatError(r.name() + ": bad node count");
  for (std::uint64_t k = 0; k < count; ++k) {
    TreeNode n;
    n.leaf = r.u8() != 0;
    n.feature = r.u64();
    n.threshold = r.f64();
    n.left = r.u64();
    n.right = r.u64();
    n.value = r.f64();
    n.samples = r.u64();
    const auto k_classes = r.u64();
    if (k_classes > r.remaining() / 8) throw FormatError(r.name() + ": truncated class counts");
    for (std::uint64_t c = 0; c < k_classes; ++c) n.class_counts.push_back(r.u64());
    if (!n.leaf && (n.left >= count || n.right >= count || n.feature >= t.n_features)) {
      throw FormatError(r.name() + ": corrupt tree node");
    }
    t.nodes.push_back(std::move(n));
  }
  return t;
}

}  // namespace boxoffice::cart
