/*
 * Copyright 2026 The ObesEye Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Regression trees grown by exact variance-reduction split search, random
// forests over them, and impurity-based feature importance.

#ifndef OBESEYE_TREE_HPP_
#define OBESEYE_TREE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "obeseye/common.hpp"

namespace obeseye {

struct TreeNode {
  int feature = -1;  // -1 on leaves
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the node's samples
  std::size_t count = 0;
  double impurity_decrease = 0.0;  // SSE(parent) - SSE(children); 0 on leaves

  bool is_leaf() const { return left < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Flat, index-linked binary tree. Node 0 is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::size_t num_features = 0;

  std::size_t leaf_index(std::span<const double> x) const {
    check_dimension(num_features, x.size());
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
      const auto& n = nodes[at];
      at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                           : n.right);
    }
    return at;
  }

  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].is_leaf()) {
        deepest = std::max(deepest, d[i]);
        continue;
      }
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
    return deepest;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

inline double predict_tree(const DecisionTree& tree, std::span<const double> x) {
  return tree.predict(x);
}

struct TreeParams {
  int max_depth = -1;                 // -1: unlimited; 0: root leaf only
  std::size_t min_samples_leaf = 1;
  std::size_t max_leaves = 0;         // 0: unlimited
  std::size_t features_per_split = 0; // 0: every feature at every split
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;

  bool valid() const { return feature >= 0; }
};

// Higher gain wins; ties go to the lower feature index, then lower threshold.
inline bool better_split(const SplitCandidate& a, const SplitCandidate& b) {
  if (!b.valid()) return a.valid();
  if (a.gain != b.gain) return a.gain > b.gain;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

namespace internal {

struct XY {
  double x;
  double y;
  bool operator<(const XY& o) const { return x != o.x ? x < o.x : y < o.y; }
};

// Best threshold on one feature. Rows are sorted by (x, y), so the result does
// not depend on the order in which samples were supplied.
inline SplitCandidate best_split_on_feature(const Matrix& features, std::span<const double> targets,
                                            std::span<const std::size_t> rows, std::size_t feature,
                                            std::size_t min_leaf, std::vector<XY>& scratch) {
  scratch.clear();
  for (auto r : rows) scratch.push_back({features(r, feature), targets[r]});
  std::sort(scratch.begin(), scratch.end());
  SplitCandidate best;
  const std::size_t n = scratch.size();
  double total = 0.0;
  for (const auto& p : scratch) total += p.y;
  const double parent = total * total / static_cast<double>(n);
  double left_sum = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    left_sum += scratch[k].y;
    const std::size_t nl = k + 1, nr = n - nl;
    if (scratch[k].x == scratch[k + 1].x) continue;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double right_sum = total - left_sum;
    const double gain = left_sum * left_sum / static_cast<double>(nl) +
                        right_sum * right_sum / static_cast<double>(nr) - parent;
    if (!(gain > 0.0)) continue;
    const double lo = scratch[k].x, hi = scratch[k + 1].x;
    double threshold = lo + (hi - lo) / 2.0;
    if (!(threshold < hi)) threshold = lo;
    SplitCandidate c{static_cast<int>(feature), threshold, gain};
    if (better_split(c, best)) best = c;
  }
  return best;
}

inline double leaf_mean(std::span<const double> targets, std::span<const std::size_t> rows) {
  std::vector<double> ys;
  ys.reserve(rows.size());
  for (auto r : rows) ys.push_back(targets[r]);
  std::sort(ys.begin(), ys.end());
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  return std::clamp(mean, ys.front(), ys.back());
}

struct Frontier {
  std::size_t node;
  std::vector<std::size_t> rows;
  std::size_t depth;
  SplitCandidate split;
};

}  // namespace internal

// Exact best split of `rows` over the given features.
inline SplitCandidate find_best_split(const Matrix& features, std::span<const double> targets,
                                      std::span<const std::size_t> rows, std::size_t min_leaf,
                                      std::size_t features_per_split = 0, Rng* rng = nullptr) {
  std::vector<internal::XY> scratch;
  SplitCandidate best;
  const std::size_t d = features.cols();
  bool constant_targets = true;
  for (auto r : rows) constant_targets &= targets[r] == targets[rows.front()];
  if (rows.size() < 2 || constant_targets) return best;

  if (features_per_split == 0 || features_per_split >= d || rng == nullptr) {
    for (std::size_t f = 0; f < d; ++f) {
      auto c = internal::best_split_on_feature(features, targets, rows, f, min_leaf, scratch);
      if (better_split(c, best)) best = c;
    }
    return best;
  }
  // Draw features in random order; keep going past the quota until some
  // valid split is found or every feature has been looked at.
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  rng->shuffle(order);
  std::size_t examined = 0;
  for (auto f : order) {
    bool constant = true;
    for (auto r : rows) constant &= features(r, f) == features(rows.front(), f);
    if (constant) continue;
    auto c = internal::best_split_on_feature(features, targets, rows, f, min_leaf, scratch);
    if (better_split(c, best)) best = c;
    if (++examined >= features_per_split && best.valid()) break;
  }
  return best;
}

// Best-first growth: repeatedly expands the frontier leaf with the largest
// gain (ties: lowest node id) until no leaf can split or max_leaves is reached.
// Without a leaf cap this yields the same tree as depth-first CART.
inline DecisionTree grow_tree(const Matrix& features, std::span<const double> targets,
                              std::vector<std::size_t> rows, const TreeParams& params,
                              Rng* rng = nullptr) {
  if (rows.empty()) throw ValidationError("features", "cannot grow a tree on 0 rows");
  check_dimension(features.rows(), targets.size());
  const std::size_t min_leaf = std::max<std::size_t>(1, params.min_samples_leaf);

  DecisionTree tree;
  tree.num_features = features.cols();
  auto can_split = [&](std::size_t depth, std::size_t n) {
    return (params.max_depth < 0 || depth < static_cast<std::size_t>(params.max_depth)) &&
           n >= 2 * min_leaf;
  };
  auto make_leaf = [&](const std::vector<std::size_t>& node_rows) {
    TreeNode node;
    node.value = internal::leaf_mean(targets, node_rows);
    node.count = node_rows.size();
    tree.nodes.push_back(node);
    return tree.nodes.size() - 1;
  };
  auto evaluate = [&](internal::Frontier& f) {
    if (can_split(f.depth, f.rows.size())) {
      f.split = find_best_split(features, targets, f.rows, min_leaf, params.features_per_split, rng);
    }
  };

  std::vector<internal::Frontier> frontier;
  frontier.push_back({make_leaf(rows), std::move(rows), 0, {}});
  evaluate(frontier.back());
  std::size_t leaves = 1;

  while (params.max_leaves == 0 || leaves < params.max_leaves) {
    std::size_t pick = frontier.size();
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      if (!frontier[k].split.valid()) continue;
      if (pick == frontier.size() || frontier[k].split.gain > frontier[pick].split.gain ||
          (frontier[k].split.gain == frontier[pick].split.gain &&
           frontier[k].node < frontier[pick].node)) {
        pick = k;
      }
    }
    if (pick == frontier.size()) break;

    internal::Frontier parent = std::move(frontier[pick]);
    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
    std::vector<std::size_t> left_rows, right_rows;
    const auto f = static_cast<std::size_t>(parent.split.feature);
    for (auto r : parent.rows) {
      (features(r, f) <= parent.split.threshold ? left_rows : right_rows).push_back(r);
    }
    const std::size_t left = make_leaf(left_rows);
    const std::size_t right = make_leaf(right_rows);
    auto& node = tree.nodes[parent.node];
    node.feature = parent.split.feature;
    node.threshold = parent.split.threshold;
    node.left = static_cast<int>(left);
    node.right = static_cast<int>(right);
    node.impurity_decrease = parent.split.gain;
    ++leaves;

    frontier.push_back({left, std::move(left_rows), parent.depth + 1, {}});
    evaluate(frontier.back());
    frontier.push_back({right, std::move(right_rows), parent.depth + 1, {}});
    evaluate(frontier.back());
  }
  return tree;
}

inline DecisionTree fit_cart(const Matrix& features, std::span<const double> targets,
                             const TreeParams& params = {}) {
  if (features.rows() == 0) throw ValidationError("features", "empty input");
  std::vector<std::size_t> rows(features.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return grow_tree(features, targets, std::move(rows), params);
}

// ---------------------------------------------------------------------------

struct ForestParams {
  std::size_t n_trees = 100;
  std::uint64_t seed = 0;
  std::optional<std::size_t> features_per_split;  // default ceil(d / 3)
  bool bootstrap = true;
  std::size_t min_samples_leaf = 1;
  int max_depth = -1;
  std::size_t threads = 1;  // 0: hardware concurrency
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::uint64_t seed = 0;
  std::size_t features_per_split = 0;
  bool bootstrap = true;

  double predict(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(x);
    return sum / static_cast<double>(trees.size());
  }
  friend bool operator==(const RandomForest&, const RandomForest&) = default;
};

inline double predict_forest(const RandomForest& forest, std::span<const double> x) {
  return forest.predict(x);
}

inline std::size_t default_features_per_split(std::size_t d) { return std::max<std::size_t>(1, (d + 2) / 3); }

// Tree t draws its bootstrap sample and split features from its own stream
// mix_seed(seed, t), so the forest is identical at any thread count.
inline RandomForest fit_random_forest(const Matrix& features, std::span<const double> targets,
                                      const ForestParams& params) {
  if (params.n_trees < 1) throw ValidationError("n_trees", "must be >= 1");
  if (features.rows() < 2) throw ValidationError("features", "random forest needs at least 2 rows");
  check_dimension(features.rows(), targets.size());
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();

  RandomForest forest;
  forest.seed = params.seed;
  forest.bootstrap = params.bootstrap;
  forest.features_per_split =
      std::clamp<std::size_t>(params.features_per_split.value_or(default_features_per_split(d)), 1, d);
  forest.trees.resize(params.n_trees);

  TreeParams tree_params;
  tree_params.max_depth = params.max_depth;
  tree_params.min_samples_leaf = params.min_samples_leaf;
  tree_params.features_per_split = forest.features_per_split == d ? 0 : forest.features_per_split;

  parallel_for(params.n_trees, params.threads, [&](std::size_t t) {
    Rng rng(mix_seed(params.seed, t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.below(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees[t] = grow_tree(features, targets, std::move(rows), tree_params, &rng);
  });
  return forest;
}

// ---------------------------------------------------------------------------

struct FeatureImportance {
  std::vector<double> scores;  // >= 0, sums to 1 unless no tree ever split
};

// Impurity decrease per feature, averaged over trees, normalised to sum 1.
inline FeatureImportance feature_importance(std::span<const DecisionTree> trees, std::size_t num_features) {
  FeatureImportance out;
  out.scores.assign(num_features, 0.0);
  for (const auto& tree : trees) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) out.scores[static_cast<std::size_t>(node.feature)] += node.impurity_decrease;
    }
  }
  double total = std::accumulate(out.scores.begin(), out.scores.end(), 0.0);
  if (total > 0.0) {
    for (auto& s : out.scores) s /= total;
  }
  return out;
}

inline FeatureImportance feature_importance(const RandomForest& forest) {
  const std::size_t d = forest.trees.empty() ? 0 : forest.trees.front().num_features;
  return feature_importance(forest.trees, d);
}

}  // namespace obeseye

#endif  // OBESEYE_TREE_HPP_
