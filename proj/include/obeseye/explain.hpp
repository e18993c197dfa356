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

// Local and global attributions for single predictions.
//
// Shapley values use interventional semantics against an explicit
// background set: the value of a feature subset S is the mean over
// background rows z of f(x on S, z elsewhere).

#ifndef OBESEYE_EXPLAIN_HPP_
#define OBESEYE_EXPLAIN_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "obeseye/cohort.hpp"
#include "obeseye/common.hpp"
#include "obeseye/model.hpp"

namespace obeseye {

using PredictFn = std::function<double(std::span<const double>)>;

struct ShapExplanation {
  double base_value = 0.0;
  std::vector<double> phi;
  std::size_t background_size = 0;
  double prediction = 0.0;
};

inline constexpr std::size_t kMaxExactFeatures = 12;

// Brute-force enumeration over all 2^d subsets. Reference for the fast paths.
inline ShapExplanation shap_exact(const PredictFn& predict, std::span<const double> sample,
                                  const Matrix& background) {
  const std::size_t d = sample.size();
  if (d > kMaxExactFeatures) {
    throw ValidationError("features", "shap_exact enumerates 2^d subsets and accepts d <= 12 (got " +
                                          std::to_string(d) + "); use shap_tree or shap_linear");
  }
  if (background.rows() == 0) throw ValidationError("background", "must be non-empty");
  check_dimension(d, background.cols());

  const std::size_t subsets = std::size_t{1} << d;
  std::vector<double> value(subsets, 0.0);
  std::vector<double> hybrid(d);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    double sum = 0.0;
    for (std::size_t b = 0; b < background.rows(); ++b) {
      const auto z = background.row(b);
      for (std::size_t j = 0; j < d; ++j) hybrid[j] = (mask >> j) & 1U ? sample[j] : z[j];
      sum += predict(hybrid);
    }
    value[mask] = sum / static_cast<double>(background.rows());
  }

  // weight(s) = s! (d - s - 1)! / d!
  std::vector<double> weight(d, 1.0);
  for (std::size_t s = 0; s < d; ++s) {
    double w = 1.0 / static_cast<double>(d);
    for (std::size_t k = 1; k <= s; ++k) {
      w *= static_cast<double>(k) / static_cast<double>(d - k);
    }
    weight[s] = w;
  }

  ShapExplanation out;
  out.phi.assign(d, 0.0);
  out.base_value = value[0];
  out.prediction = predict(sample);
  out.background_size = background.rows();
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      out.phi[i] += weight[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
  }
  return out;
}

// A weighted sum of trees plus a constant: single tree, forest mean, or
// boosted ensemble.
struct TreeSum {
  std::vector<const DecisionTree*> trees;
  std::vector<double> weights;
  double offset = 0.0;

  static TreeSum of(const DecisionTree& t) { return {{&t}, {1.0}, 0.0}; }
  static TreeSum of(const RandomForest& f) {
    TreeSum s;
    for (const auto& t : f.trees) {
      s.trees.push_back(&t);
      s.weights.push_back(1.0 / static_cast<double>(f.trees.size()));
    }
    return s;
  }
  static TreeSum of(const BoostedEnsemble& e) {
    TreeSum s;
    s.offset = e.init;
    for (const auto& t : e.stages) {
      s.trees.push_back(&t);
      s.weights.push_back(e.learning_rate);
    }
    return s;
  }

  double predict(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < trees.size(); ++k) acc += weights[k] * trees[k]->predict(x);
    return offset + acc;
  }
};

namespace internal {

// coef(p, q) = p! q! / (p + q + 1)!
class ShapleyCoefficients {
 public:
  explicit ShapleyCoefficients(std::size_t d) : d_(d + 1), table_(d_ * d_, 0.0) {
    for (std::size_t p = 0; p < d_; ++p) {
      for (std::size_t q = 0; p + q < d_; ++q) {
        double c = 1.0 / static_cast<double>(p + q + 1);
        for (std::size_t k = 1; k <= p; ++k) c *= static_cast<double>(k) / static_cast<double>(q + k);
        table_[p * d_ + q] = c;
      }
    }
  }
  double operator()(std::size_t p, std::size_t q) const { return table_[p * d_ + q]; }

 private:
  std::size_t d_;
  std::vector<double> table_;
};

// Baseline Shapley values of one tree for the pair (x, z). Each reachable
// leaf of the hybrid inputs is characterised by the features that must come
// from x (from_x) and those that must come from z (from_z); it contributes
// +v (a-1)! b! / (a+b)! to every from_x feature and -v a! (b-1)! / (a+b)! to
// every from_z feature, with a = |from_x| and b = |from_z|.
class PairwiseTreeShap {
 public:
  PairwiseTreeShap(const DecisionTree& tree, std::span<const double> x, std::span<const double> z,
                   const ShapleyCoefficients& coef, double scale, std::span<double> phi)
      : tree_(tree), x_(x), z_(z), coef_(coef), scale_(scale), phi_(phi),
        in_x_(x.size(), 0), in_z_(x.size(), 0) {}

  void run() { visit(0); }

 private:
  void visit(std::size_t at) {
    const auto& node = tree_.nodes[at];
    if (node.is_leaf()) {
      const std::size_t a = from_x_.size(), b = from_z_.size();
      const double v = scale_ * node.value;
      if (a > 0) {
        const double gain = v * coef_(a - 1, b);
        for (auto f : from_x_) phi_[f] += gain;
      }
      if (b > 0) {
        const double loss = v * coef_(a, b - 1);
        for (auto f : from_z_) phi_[f] -= loss;
      }
      return;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    const auto x_child = static_cast<std::size_t>(x_[f] <= node.threshold ? node.left : node.right);
    const auto z_child = static_cast<std::size_t>(z_[f] <= node.threshold ? node.left : node.right);
    if (x_child == z_child) return visit(x_child);
    if (in_x_[f]) return visit(x_child);
    if (in_z_[f]) return visit(z_child);

    in_x_[f] = 1;
    from_x_.push_back(f);
    visit(x_child);
    from_x_.pop_back();
    in_x_[f] = 0;

    in_z_[f] = 1;
    from_z_.push_back(f);
    visit(z_child);
    from_z_.pop_back();
    in_z_[f] = 0;
  }

  const DecisionTree& tree_;
  std::span<const double> x_, z_;
  const ShapleyCoefficients& coef_;
  double scale_;
  std::span<double> phi_;
  std::vector<char> in_x_, in_z_;
  std::vector<std::size_t> from_x_, from_z_;
};

}  // namespace internal

// Same semantics as shap_exact, in time linear in the number of reachable
// leaves per (tree, background row) rather than exponential in d.
inline ShapExplanation shap_tree(const TreeSum& model, std::span<const double> sample, const Matrix& background) {
  if (background.rows() == 0) throw ValidationError("background", "must be non-empty");
  const std::size_t d = sample.size();
  check_dimension(d, background.cols());
  for (const auto* t : model.trees) check_dimension(t->num_features, d);

  internal::ShapleyCoefficients coef(d);
  ShapExplanation out;
  out.phi.assign(d, 0.0);
  out.background_size = background.rows();
  const double inv_m = 1.0 / static_cast<double>(background.rows());
  double base = 0.0;
  for (std::size_t b = 0; b < background.rows(); ++b) {
    const auto z = background.row(b);
    base += model.predict(z);
    for (std::size_t k = 0; k < model.trees.size(); ++k) {
      internal::PairwiseTreeShap(*model.trees[k], sample, z, coef, model.weights[k] * inv_m, out.phi).run();
    }
  }
  out.base_value = base * inv_m;
  out.prediction = model.predict(sample);
  return out;
}

template <typename M>
  requires requires(const M& m) { TreeSum::of(m); }
inline ShapExplanation shap_tree(const M& model, std::span<const double> sample, const Matrix& background) {
  return shap_tree(TreeSum::of(model), sample, background);
}

// Closed form for a linear model with independent features:
// phi_i = w_i (x_i - mean_i), base = w . mean + b.
inline ShapExplanation shap_linear(std::span<const double> weights, double intercept,
                                   std::span<const double> sample, std::span<const double> means,
                                   std::size_t background_size = 0) {
  check_dimension(weights.size(), sample.size());
  check_dimension(weights.size(), means.size());
  ShapExplanation out;
  out.base_value = intercept;
  out.prediction = intercept;
  out.background_size = background_size;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.phi.push_back(weights[i] * (sample[i] - means[i]));
    out.base_value += weights[i] * means[i];
    out.prediction += weights[i] * sample[i];
  }
  return out;
}

inline ShapExplanation shap_linear(const LinearModel& model, std::span<const double> sample,
                                   std::span<const double> means) {
  return shap_linear(model.weights, model.intercept, sample, means);
}

inline std::vector<double> column_means(const Matrix& m) {
  std::vector<double> means(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) means[c] += m(r, c);
  }
  for (auto& v : means) v /= static_cast<double>(m.rows());
  return means;
}

class ShapUnsupported : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Routes a trained model to its Shapley path. SVR is linear, but its
// explanations are served through LIME unless `allow_svr` is set.
inline ShapExplanation shap_for(const TrainedModel& model, std::span<const double> sample,
                                const Matrix& background, bool allow_svr = false) {
  if (background.rows() == 0) throw ValidationError("background", "must be non-empty");
  if (const auto* lin = std::get_if<LinearModel>(&model.impl)) {
    auto e = shap_linear(*lin, sample, column_means(background));
    e.background_size = background.rows();
    return e;
  }
  if (const auto* svr = std::get_if<SvrModel>(&model.impl)) {
    if (!allow_svr) throw ShapUnsupported("SHAP is not served for SVM models; use method=lime");
    auto e = shap_linear(svr->weights, svr->intercept, sample, column_means(background), background.rows());
    return e;
  }
  return std::visit(
      [&](const auto& m) -> ShapExplanation {
        if constexpr (requires { TreeSum::of(m); }) {
          return shap_tree(m, sample, background);
        } else {
          throw ShapUnsupported("unsupported model");
        }
      },
      model.impl);
}

// ---------------------------------------------------------------------------

struct SummaryPoint {
  std::size_t sample;
  std::size_t feature;
  double phi;
  double value;
};

struct SummaryData {
  std::vector<double> mean_abs_phi;
  std::vector<std::size_t> ranking;  // features by descending mean |phi|
  std::vector<SummaryPoint> points;  // samples x features
};

inline SummaryData global_summary(std::span<const ShapExplanation> explanations, const Matrix& samples) {
  if (explanations.empty()) throw ValidationError("explanations", "need at least one explanation");
  check_dimension(explanations.size(), samples.rows());
  const std::size_t d = explanations.front().phi.size();
  check_dimension(d, samples.cols());
  SummaryData out;
  out.mean_abs_phi.assign(d, 0.0);
  for (std::size_t s = 0; s < explanations.size(); ++s) {
    check_dimension(d, explanations[s].phi.size());
    for (std::size_t f = 0; f < d; ++f) {
      out.mean_abs_phi[f] += std::abs(explanations[s].phi[f]);
      out.points.push_back({s, f, explanations[s].phi[f], samples(s, f)});
    }
  }
  for (auto& v : out.mean_abs_phi) v /= static_cast<double>(explanations.size());
  out.ranking.resize(d);
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return out.mean_abs_phi[a] > out.mean_abs_phi[b]; });
  return out;
}

// ---------------------------------------------------------------------------
// LIME.

struct FeatureStats {
  FeatureKind kind = FeatureKind::continuous;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> values;       // categorical: observed codes
  std::vector<double> frequencies;  // matching probabilities
};

struct TrainingStats {
  std::vector<FeatureStats> features;
};

inline TrainingStats compute_training_stats(const Matrix& rows, const EncodingSchema& schema) {
  check_dimension(schema.size(), rows.cols());
  TrainingStats stats;
  const double n = static_cast<double>(rows.rows());
  for (std::size_t f = 0; f < rows.cols(); ++f) {
    FeatureStats s;
    s.kind = schema.features[f].kind;
    const auto col = rows.column(f);
    s.mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double var = 0.0;
    for (double v : col) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / n);
    if (s.kind != FeatureKind::continuous) {
      auto sorted = col;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        s.values.push_back(sorted[i]);
        s.frequencies.push_back(static_cast<double>(j - i) / n);
        i = j;
      }
    }
    stats.features.push_back(std::move(s));
  }
  return stats;
}

struct LimeConfig {
  std::size_t n_perturbations = 5000;
  std::optional<double> kernel_width;  // default 0.75 * sqrt(d)
  double ridge = 1.0;
  std::size_t top_k = 8;
  std::uint64_t seed = 0;
};

struct LimeExplanation {
  double predicted_value = 0.0;
  double intercept = 0.0;
  double kernel_width = 0.0;
  std::size_t n_perturbations = 0;
  double score = 0.0;             // weighted R² of the surrogate
  double local_prediction = 0.0;  // surrogate evaluated at the sample
  std::vector<double> weights;    // every feature
  std::vector<std::size_t> top;   // top_k features by |weight|
};

// Perturbs around `sample` (Gaussian noise scaled by the training stddev for
// continuous features, training-frequency resampling for categorical ones),
// weights draws by exp(-distance^2 / width^2) and fits a weighted ridge
// surrogate. Continuous features enter the surrogate standardised;
// categorical ones as "equals the sample's value" indicators.
inline LimeExplanation lime_explain(const PredictFn& predict, std::span<const double> sample,
                                    const TrainingStats& stats, const LimeConfig& config = {}) {
  const std::size_t d = sample.size();
  check_dimension(stats.features.size(), d);
  if (config.n_perturbations < 2) throw ValidationError("n_perturbations", "must be >= 2");
  bool any_spread = false;
  for (const auto& f : stats.features) {
    any_spread |= f.kind == FeatureKind::continuous ? f.stddev > 0.0 : f.values.size() > 1;
  }
  if (!any_spread) {
    throw ValidationError("training_stats", "degenerate statistics: no feature varies, nothing to perturb");
  }

  const double width = config.kernel_width.value_or(0.75 * std::sqrt(static_cast<double>(d)));
  const std::size_t n = config.n_perturbations;
  Rng rng(config.seed);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd response(static_cast<Eigen::Index>(n));
  Eigen::VectorXd weight(static_cast<Eigen::Index>(n));
  std::vector<double> draw(d);
  for (std::size_t k = 0; k < n; ++k) {
    double dist_sq = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
      const auto& s = stats.features[f];
      double z;
      if (s.kind == FeatureKind::continuous) {
        draw[f] = k == 0 || s.stddev == 0.0 ? sample[f] : sample[f] + s.stddev * rng.normal();
        z = s.stddev > 0.0 ? (draw[f] - s.mean) / s.stddev : 0.0;
        const double dz = s.stddev > 0.0 ? (draw[f] - sample[f]) / s.stddev : 0.0;
        dist_sq += dz * dz;
      } else {
        if (k == 0 || s.values.empty()) {
          draw[f] = sample[f];
        } else {
          double u = rng.uniform();
          std::size_t c = 0;
          while (c + 1 < s.values.size() && u >= s.frequencies[c]) u -= s.frequencies[c++];
          draw[f] = s.values[c];
        }
        z = draw[f] == sample[f] ? 1.0 : 0.0;
        dist_sq += (1.0 - z) * (1.0 - z);
      }
      design(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(f)) = z;
    }
    response(static_cast<Eigen::Index>(k)) = predict(draw);
    weight(static_cast<Eigen::Index>(k)) = std::exp(-dist_sq / (width * width));
  }

  const double wsum = weight.sum();
  const Eigen::RowVectorXd x_mean = (weight.transpose() * design) / wsum;
  const double y_mean = weight.dot(response) / wsum;
  const Eigen::MatrixXd xc = design.rowwise() - x_mean;
  const Eigen::VectorXd yc = response.array() - y_mean;
  const Eigen::MatrixXd gram = xc.transpose() * weight.asDiagonal() * xc +
                               config.ridge * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                                        static_cast<Eigen::Index>(d));
  const Eigen::VectorXd coef = gram.ldlt().solve(xc.transpose() * (weight.array() * yc.array()).matrix());

  LimeExplanation out;
  out.predicted_value = response(0);
  out.kernel_width = width;
  out.n_perturbations = n;
  out.weights.assign(coef.data(), coef.data() + d);
  out.intercept = y_mean - x_mean.dot(coef);
  out.local_prediction = out.intercept + design.row(0).dot(coef);
  const Eigen::VectorXd fitted = (design * coef).array() + out.intercept;
  const double ss_res = (weight.array() * (response - fitted).array().square()).sum();
  const double ss_tot = (weight.array() * yc.array().square()).sum();
  out.score = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

  out.top.resize(d);
  std::iota(out.top.begin(), out.top.end(), 0);
  std::stable_sort(out.top.begin(), out.top.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(out.weights[a]) > std::abs(out.weights[b]);
  });
  out.top.resize(std::min(config.top_k, d));
  return out;
}

// ---------------------------------------------------------------------------
// JSON shapes consumed by the UI and the CLI.

inline std::string sign_of(double v) { return v > 0.0 ? "+" : (v < 0.0 ? "-" : "0"); }

inline nlohmann::ordered_json explanation_json(const ShapExplanation& e, std::span<const double> sample,
                                               const EncodingSchema& schema, Target target) {
  nlohmann::ordered_json j;
  j["method"] = "shap";
  j["target"] = target_name(target);
  j["unit"] = target_unit(target);
  j["predicted_value"] = e.prediction;
  j["base_value"] = e.base_value;
  j["background_size"] = e.background_size;
  auto& features = j["features"] = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < e.phi.size(); ++f) {
    features.push_back({{"name", schema.features[f].name},
                        {"value", sample[f]},
                        {"phi", e.phi[f]},
                        {"sign", sign_of(e.phi[f])}});
  }
  return j;
}

inline nlohmann::ordered_json explanation_json(const LimeExplanation& e, std::span<const double> sample,
                                               const EncodingSchema& schema, Target target) {
  nlohmann::ordered_json j;
  j["method"] = "lime";
  j["target"] = target_name(target);
  j["unit"] = target_unit(target);
  j["predicted_value"] = e.predicted_value;
  j["intercept"] = e.intercept;
  j["local_prediction"] = e.local_prediction;
  j["score"] = e.score;
  j["kernel_width"] = e.kernel_width;
  j["n_perturbations"] = e.n_perturbations;
  auto& features = j["features"] = nlohmann::ordered_json::array();
  for (auto f : e.top) {
    features.push_back({{"name", schema.features[f].name},
                        {"value", sample[f]},
                        {"weight", e.weights[f]},
                        {"sign", sign_of(e.weights[f])}});
  }
  return j;
}

}  // namespace obeseye

#endif  // OBESEYE_EXPLAIN_HPP_
