#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "hfr/matrix.hpp"
#include "hfr/rng.hpp"

namespace hfr {

inline constexpr int tree_unlimited_depth = std::numeric_limits<int>::max();

// Node in a flat tree arena. feature < 0 marks a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf: mean of its training rows
  int count = 0;       // training rows that reached the node
  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    int at = 0;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
      const TreeNode& n = nodes[static_cast<std::size_t>(at)];
      at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }
};

struct TreeParams {
  int max_depth = tree_unlimited_depth;
  int min_leaf = 1;    // minimum rows per child (RF nodesize / GBT min_child_weight)
  int mtry = 0;        // features sampled per split; 0 = all allowed features
  double min_gain = 0.0;  // required SSE reduction (GBT gamma)
  std::vector<int> features;  // allowed feature subset; empty = all columns
};

namespace detail {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Greedy best split by SSE reduction over the candidate features.
// Thresholds are midpoints between consecutive distinct sorted values; ties
// in gain go to the lowest feature index, then the lowest threshold.
inline SplitChoice best_split(const Matrix& x, std::span<const double> y,
                              std::span<const int> rows, std::span<const int> features,
                              int min_leaf, double parent_sse) {
  SplitChoice best;
  const std::size_t n = rows.size();
  std::vector<std::pair<double, double>> sorted(n);  // (feature value, target)

  for (int f : features) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(rows[i]);
      sorted[i] = {x(r, static_cast<std::size_t>(f)), y[r]};
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    double left_sum = 0.0, left_sq = 0.0;
    double total_sum = 0.0, total_sq = 0.0;
    for (const auto& [v, t] : sorted) {
      total_sum += t;
      total_sq += t * t;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += sorted[i].second;
      left_sq += sorted[i].second * sorted[i].second;
      if (sorted[i].first == sorted[i + 1].first) continue;  // not a boundary
      const auto left_n = static_cast<double>(i + 1);
      const auto right_n = static_cast<double>(n - i - 1);
      if (i + 1 < static_cast<std::size_t>(min_leaf) ||
          n - i - 1 < static_cast<std::size_t>(min_leaf))
        continue;
      const double right_sum = total_sum - left_sum;
      const double right_sq = total_sq - left_sq;
      const double sse_left = left_sq - left_sum * left_sum / left_n;
      const double sse_right = right_sq - right_sum * right_sum / right_n;
      const double gain = parent_sse - sse_left - sse_right;
      if (gain > best.gain) {
        best.found = true;
        best.feature = f;
        best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        best.gain = gain;
      }
    }
  }
  return best;
}

inline double node_sse(std::span<const double> y, std::span<const int> rows, double mean) {
  double acc = 0.0;
  for (int r : rows) {
    const double d = y[static_cast<std::size_t>(r)] - mean;
    acc += d * d;
  }
  return acc;
}

inline double node_mean(std::span<const double> y, std::span<const int> rows) {
  double acc = 0.0;
  for (int r : rows) acc += y[static_cast<std::size_t>(r)];
  return acc / static_cast<double>(rows.size());
}

// Draws `want` distinct entries of `pool` and returns them in ascending
// order so that gain ties resolve by feature index.
inline std::vector<int> sample_features(std::span<const int> pool, int want, Rng& rng) {
  std::vector<int> chosen(pool.begin(), pool.end());
  if (want > 0 && static_cast<std::size_t>(want) < chosen.size()) {
    for (int i = 0; i < want; ++i) {
      const auto j =
          static_cast<std::size_t>(i) + rng.below(chosen.size() - static_cast<std::size_t>(i));
      std::swap(chosen[static_cast<std::size_t>(i)], chosen[j]);
    }
    chosen.resize(static_cast<std::size_t>(want));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline int grow_tree(Tree& tree, const Matrix& x, std::span<const double> y,
                     std::vector<int>& rows, std::span<const int> feature_pool,
                     const TreeParams& params, int depth, Rng& rng) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes.back().count = static_cast<int>(rows.size());
  const double mean = node_mean(y, rows);
  tree.nodes.back().value = mean;

  if (depth >= params.max_depth || rows.size() < 2 * static_cast<std::size_t>(std::max(1, params.min_leaf)))
    return index;
  const double sse = node_sse(y, rows, mean);
  if (sse <= 0.0) return index;

  std::vector<int> sampled;
  std::span<const int> candidates = feature_pool;
  if (params.mtry > 0 && static_cast<std::size_t>(params.mtry) < feature_pool.size()) {
    sampled = sample_features(feature_pool, params.mtry, rng);
    candidates = sampled;
  }

  const SplitChoice split =
      best_split(x, y, rows, candidates, std::max(1, params.min_leaf), sse);
  if (!split.found || !(split.gain > params.min_gain)) return index;

  std::vector<int> left_rows, right_rows;
  left_rows.reserve(rows.size());
  right_rows.reserve(rows.size());
  for (int r : rows) {
    if (x(static_cast<std::size_t>(r), static_cast<std::size_t>(split.feature)) <= split.threshold)
      left_rows.push_back(r);
    else
      right_rows.push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();

  const int left = grow_tree(tree, x, y, left_rows, feature_pool, params, depth + 1, rng);
  const int right = grow_tree(tree, x, y, right_rows, feature_pool, params, depth + 1, rng);
  auto& node = tree.nodes[static_cast<std::size_t>(index)];
  node.feature = split.feature;
  node.threshold = split.threshold;
  node.left = left;
  node.right = right;
  return index;
}

}  // namespace detail

// Greedy SSE-minimizing regression tree on the given rows (bootstrap
// repeats allowed). Leaf values are row means; recursion stops at
// max_depth, min_leaf, or when no split reduces SSE by more than min_gain.
inline Tree fit_tree(const Matrix& x, std::span<const double> y, std::span<const int> rows,
                     const TreeParams& params, Rng& rng) {
  Tree tree;
  if (rows.empty()) {
    tree.nodes.push_back(TreeNode{});
    return tree;
  }
  std::vector<int> all_features;
  std::span<const int> pool = params.features;
  if (pool.empty()) {
    all_features.resize(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) all_features[f] = static_cast<int>(f);
    pool = all_features;
  }
  std::vector<int> row_vec(rows.begin(), rows.end());
  detail::grow_tree(tree, x, y, row_vec, pool, params, 0, rng);
  return tree;
}

inline Tree fit_tree(const Matrix& x, std::span<const double> y, const TreeParams& params,
                     Rng& rng) {
  std::vector<int> rows(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) rows[i] = static_cast<int>(i);
  return fit_tree(x, y, rows, params, rng);
}

}  // namespace hfr
