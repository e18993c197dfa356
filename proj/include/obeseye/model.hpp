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

// The six regression families behind one value type.

#ifndef OBESEYE_MODEL_HPP_
#define OBESEYE_MODEL_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "obeseye/boosting.hpp"
#include "obeseye/common.hpp"
#include "obeseye/linear.hpp"
#include "obeseye/tree.hpp"

namespace obeseye {

enum class Family { linear, svm, ds, rf, xgb_like, lgbm_like };
inline constexpr std::array<Family, 6> kAllFamilies = {Family::linear, Family::svm,      Family::ds,
                                                       Family::rf,     Family::xgb_like, Family::lgbm_like};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::linear: return "Linear";
    case Family::svm: return "SVM";
    case Family::ds: return "DS";
    case Family::rf: return "RF";
    case Family::xgb_like: return "XGB-like";
    case Family::lgbm_like: return "LGBM-like";
  }
  return "?";
}

inline std::optional<Family> parse_family(std::string_view name) {
  for (auto f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

// Named numeric hyperparameters; ordered so serialisation is stable.
using ParamMap = std::map<std::string, double>;

inline double param_or(const ParamMap& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline std::size_t count_param(const ParamMap& p, const std::string& key, std::size_t fallback) {
  const double v = param_or(p, key, static_cast<double>(fallback));
  if (!(v >= 0.0) || v != std::floor(v)) throw ValidationError(key, "must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

using ModelImpl = std::variant<LinearModel, SvrModel, DecisionTree, RandomForest, BoostedEnsemble>;

struct TrainedModel {
  Family family = Family::linear;
  ParamMap params;
  ModelImpl impl;

  double predict(std::span<const double> x) const {
    return std::visit([&](const auto& m) { return m.predict(x); }, impl);
  }

  std::vector<double> predict(const Matrix& rows) const {
    std::vector<double> out;
    out.reserve(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) out.push_back(predict(rows.row(i)));
    return out;
  }

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

inline BoostParams boost_params(Family family, const ParamMap& p) {
  BoostParams b = preset_config(family == Family::xgb_like ? BoostKind::xgb_like : BoostKind::lgbm_like);
  b.learning_rate = param_or(p, "learning_rate", b.learning_rate);
  b.max_leaves = count_param(p, "max_leaves", b.max_leaves);
  b.n_stages = count_param(p, "n_stages", b.n_stages);
  b.min_samples_leaf = count_param(p, "min_samples_leaf", b.min_samples_leaf);
  if (p.contains("max_total_nodes")) b.max_total_nodes = count_param(p, "max_total_nodes", 0);
  return b;
}

// Fits `family` with the default hyperparameters, overridden by `params`.
// `seed` feeds the only stochastic family (RF).
inline TrainedModel fit_family(Family family, const ParamMap& params, const Matrix& features,
                               std::span<const double> targets, std::uint64_t seed,
                               std::size_t threads = 1) {
  TrainedModel m;
  m.family = family;
  m.params = params;
  switch (family) {
    case Family::linear:
      m.impl = fit_ols(features, targets);
      break;
    case Family::svm: {
      SvrOptions o;
      o.c = param_or(params, "C", 2.0);
      o.epsilon = param_or(params, "epsilon", 0.1);
      o.max_iterations = count_param(params, "max_iterations", o.max_iterations);
      m.impl = fit_svr_linear(features, targets, o);
      break;
    }
    case Family::ds: {
      TreeParams t;
      t.max_depth = static_cast<int>(param_or(params, "max_depth", -1));
      t.min_samples_leaf = count_param(params, "min_samples_leaf", 1);
      t.max_leaves = count_param(params, "max_leaves", 0);
      m.impl = fit_cart(features, targets, t);
      break;
    }
    case Family::rf: {
      ForestParams f;
      f.n_trees = count_param(params, "n_trees", 100);
      f.seed = seed;
      if (params.contains("features_per_split")) {
        f.features_per_split = count_param(params, "features_per_split", 1);
      }
      f.min_samples_leaf = count_param(params, "min_samples_leaf", 1);
      f.threads = threads;
      m.impl = fit_random_forest(features, targets, f);
      break;
    }
    case Family::xgb_like:
    case Family::lgbm_like:
      m.impl = fit_gbdt(features, targets, boost_params(family, params));
      break;
  }
  return m;
}

}  // namespace obeseye

#endif  // OBESEYE_MODEL_HPP_
