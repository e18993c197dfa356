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

// Squared-error gradient boosting over best-first regression trees.

#ifndef OBESEYE_BOOSTING_HPP_
#define OBESEYE_BOOSTING_HPP_

#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "obeseye/common.hpp"
#include "obeseye/tree.hpp"

namespace obeseye {

enum class Growth { bestfirst_small, leafwise };

struct BoostParams {
  Growth growth = Growth::leafwise;
  std::size_t max_leaves = 10;
  std::size_t n_stages = 100;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 1;
  // Reads the leaf cap as a total node count instead: (nodes + 1) / 2 leaves.
  std::optional<std::size_t> max_total_nodes;

  std::size_t leaf_cap() const { return max_total_nodes ? (*max_total_nodes + 1) / 2 : max_leaves; }

  void validate() const {
    if (leaf_cap() < 2) throw ValidationError("max_leaves", "must allow at least 2 leaves");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
      throw ValidationError("learning_rate", "must be in (0, 1]");
    }
    if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf", "must be >= 1");
  }
};

enum class BoostKind { xgb_like, lgbm_like };

inline BoostParams preset_config(BoostKind kind) {
  BoostParams p;
  if (kind == BoostKind::xgb_like) {
    p.growth = Growth::bestfirst_small;
    p.max_leaves = 3;
    p.n_stages = 500;
    p.learning_rate = 0.1;
    p.min_samples_leaf = 1;
  } else {
    p.growth = Growth::leafwise;
    p.max_leaves = 10;
    p.n_stages = 100;
    p.learning_rate = 0.05;
    p.min_samples_leaf = 20;  // LightGBM's min_data_in_leaf default
  }
  return p;
}

struct BoostedEnsemble {
  double init = 0.0;  // training-target mean
  std::vector<DecisionTree> stages;
  double learning_rate = 0.1;

  double predict(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : stages) sum += t.predict(x);
    return init + learning_rate * sum;
  }
  friend bool operator==(const BoostedEnsemble&, const BoostedEnsemble&) = default;
};

inline double predict_boosted(const BoostedEnsemble& ensemble, std::span<const double> x) {
  return ensemble.predict(x);
}

// `loss_trace`, when given, receives the training MSE before the first stage
// and after every stage.
inline BoostedEnsemble fit_gbdt(const Matrix& features, std::span<const double> targets,
                                const BoostParams& params, std::vector<double>* loss_trace = nullptr) {
  params.validate();
  const std::size_t n = features.rows();
  if (n < 2) throw ValidationError("features", "boosting needs at least 2 rows");
  check_dimension(n, targets.size());

  BoostedEnsemble model;
  model.learning_rate = params.learning_rate;
  model.init = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);

  std::vector<double> residual(targets.begin(), targets.end());
  for (auto& r : residual) r -= model.init;
  auto mse = [&] {
    double s = 0.0;
    for (double r : residual) s += r * r;
    return s / static_cast<double>(n);
  };
  if (loss_trace) {
    loss_trace->clear();
    loss_trace->push_back(mse());
  }

  TreeParams tree_params;
  tree_params.max_leaves = params.leaf_cap();
  tree_params.min_samples_leaf = params.min_samples_leaf;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);

  for (std::size_t stage = 0; stage < params.n_stages; ++stage) {
    bool all_zero = true;
    for (double r : residual) all_zero &= r == 0.0;
    if (all_zero) break;
    DecisionTree tree = grow_tree(features, residual, all, tree_params);
    for (std::size_t i = 0; i < n; ++i) residual[i] -= params.learning_rate * tree.predict(features.row(i));
    model.stages.push_back(std::move(tree));
    if (loss_trace) loss_trace->push_back(mse());
  }
  return model;
}

}  // namespace obeseye

#endif  // OBESEYE_BOOSTING_HPP_
