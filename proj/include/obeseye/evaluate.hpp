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

// Train/test splitting, the three reported metrics, k-fold grid search and
// the six-family benchmark with per-target model selection.

#ifndef OBESEYE_EVALUATE_HPP_
#define OBESEYE_EVALUATE_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "obeseye/cohort.hpp"
#include "obeseye/common.hpp"
#include "obeseye/model.hpp"

namespace obeseye {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle; the first floor(ratio * n) rows train, the rest test.
inline SplitIndices train_test_split(std::size_t n, std::uint64_t seed, double ratio = 0.8) {
  if (n < 5) throw ValidationError("cohort", "train/test split needs at least 5 rows");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("ratio", "must be in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5EED5));
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

inline SplitIndices train_test_split(const Cohort& cohort, std::uint64_t seed, double ratio = 0.8) {
  return train_test_split(cohort.size(), seed, ratio);
}

// ---------------------------------------------------------------------------

inline void check_lengths(std::span<const double> pred, std::span<const double> actual, std::size_t min_len) {
  if (pred.size() != actual.size()) {
    throw std::invalid_argument("length mismatch: " + std::to_string(pred.size()) + " predictions vs " +
                                std::to_string(actual.size()) + " actual values");
  }
  if (pred.size() < min_len) {
    throw std::invalid_argument("need at least " + std::to_string(min_len) + " values");
  }
}

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  check_lengths(pred, actual, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

inline double r_squared(std::span<const double> pred, std::span<const double> actual) {
  check_lengths(pred, actual, 2);
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (actual[i] - pred[i]) * (actual[i] - pred[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (ss_tot == 0.0) throw NumericError("r_squared undefined: actual values have zero variance");
  return 1.0 - ss_res / ss_tot;
}

// 100 minus the mean absolute percentage error.
inline double accuracy_pct(std::span<const double> pred, std::span<const double> actual) {
  check_lengths(pred, actual, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(actual[i] > 0.0)) throw std::domain_error("accuracy_pct needs strictly positive actual values");
    s += std::abs(pred[i] - actual[i]) / actual[i];
  }
  return 100.0 - 100.0 * s / static_cast<double>(pred.size());
}

struct MetricSet {
  double rmse = 0.0;
  double r_squared = 0.0;
  double accuracy_pct = 0.0;
};

inline MetricSet compute_metrics(std::span<const double> pred, std::span<const double> actual) {
  return {rmse(pred, actual), r_squared(pred, actual), accuracy_pct(pred, actual)};
}

// ---------------------------------------------------------------------------

struct GridSpec {
  Family family = Family::rf;
  std::vector<std::pair<std::string, std::vector<double>>> params;
  std::size_t folds = 5;

  // Cartesian product, first parameter varying slowest.
  std::vector<ParamMap> cells() const {
    std::vector<ParamMap> out{ParamMap{}};
    for (const auto& [name, values] : params) {
      std::vector<ParamMap> next;
      for (const auto& cell : out) {
        for (double v : values) {
          auto c = cell;
          c[name] = v;
          next.push_back(std::move(c));
        }
      }
      out = std::move(next);
    }
    return out;
  }

  void validate() const {
    if (params.empty()) throw ValidationError("grid", "grid has no parameters");
    for (const auto& [name, values] : params) {
      if (values.empty()) throw ValidationError("grid", "parameter " + name + " has no values");
    }
    if (folds < 2) throw ValidationError("folds", "must be >= 2");
  }
};

// Tuning grids. nullopt for families without tunable knobs.
inline std::optional<GridSpec> default_grid(Family family, std::size_t num_features) {
  GridSpec g;
  g.family = family;
  switch (family) {
    case Family::linear:
    case Family::ds:
      return std::nullopt;
    case Family::svm:
      g.params = {{"C", {0.5, 1.0, 2.0, 4.0}}, {"epsilon", {0.05, 0.1, 0.5}}};
      break;
    case Family::rf:
      g.params = {{"n_trees", {50, 100, 200}},
                  {"features_per_split",
                   {static_cast<double>(default_features_per_split(num_features)),
                    static_cast<double>(num_features)}}};
      break;
    case Family::xgb_like:
    case Family::lgbm_like:
      g.params = {{"learning_rate", {0.05, 0.1}}, {"max_leaves", {3, 10}}, {"n_stages", {100, 500}}};
      break;
  }
  return g;
}

// k near-equal folds over a seeded permutation of [0, n).
inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("folds", "must be >= 2");
  if (folds > n) throw ValidationError("folds", "more folds than rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0xF01D));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out(folds);
  for (std::size_t i = 0; i < n; ++i) out[i * folds / n].push_back(order[i]);
  return out;
}

struct GridCellResult {
  ParamMap params;
  double mean_cv_rmse = 0.0;
};

struct GridResult {
  std::size_t best_index = 0;
  ParamMap best;
  std::vector<GridCellResult> cells;
};

// Mean validation RMSE of one parameter cell over the given folds.
inline double cross_validate(Family family, const ParamMap& params, const Matrix& features,
                             std::span<const double> targets,
                             const std::vector<std::vector<std::size_t>>& folds, std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    std::vector<std::size_t> train;
    for (std::size_t j = 0; j < folds.size(); ++j) {
      if (j != k) train.insert(train.end(), folds[j].begin(), folds[j].end());
    }
    const auto model = fit_family(family, params, features.select_rows(train), select(targets, train), seed);
    const auto pred = model.predict(features.select_rows(folds[k]));
    total += rmse(pred, select(targets, folds[k]));
  }
  return total / static_cast<double>(folds.size());
}

inline GridResult grid_search_cv(const GridSpec& grid, const Matrix& features, std::span<const double> targets,
                                 std::uint64_t seed, std::size_t threads = 1) {
  grid.validate();
  check_dimension(features.rows(), targets.size());
  const auto folds = kfold_indices(features.rows(), grid.folds, seed);
  const auto cells = grid.cells();
  GridResult result;
  result.cells.resize(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t c) {
    result.cells[c] = {cells[c], cross_validate(grid.family, cells[c], features, targets, folds, seed)};
  });
  for (std::size_t c = 1; c < cells.size(); ++c) {
    if (result.cells[c].mean_cv_rmse < result.cells[result.best_index].mean_cv_rmse) result.best_index = c;
  }
  result.best = result.cells[result.best_index].params;
  return result;
}

// ---------------------------------------------------------------------------

struct AlgorithmRow {
  Family family = Family::linear;
  ParamMap params;
  MetricSet test;
  double train_r_squared = 0.0;
};

struct BenchmarkReport {
  Target target = Target::fluid;
  std::vector<AlgorithmRow> rows;  // declaration order of kAllFamilies
  Family selected = Family::linear;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;

  const AlgorithmRow& row(Family f) const {
    for (const auto& r : rows) {
      if (r.family == f) return r;
    }
    throw std::out_of_range("no row for " + std::string(family_name(f)));
  }
};

struct BenchmarkOptions {
  // Families listed here are CV-tuned on the train split before evaluation;
  // the rest use the default hyperparameters.
  std::vector<GridSpec> grids;
  std::size_t threads = 1;
};

class AlgorithmError : public std::runtime_error {
 public:
  AlgorithmError(Family f, const std::string& what)
      : std::runtime_error(std::string(family_name(f)) + ": " + what), family_(f) {}
  Family family() const { return family_; }

 private:
  Family family_;
};

inline std::size_t select_min_rmse(const std::vector<AlgorithmRow>& rows) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].test.rmse < rows[best].test.rmse) best = i;
  }
  return best;
}

inline BenchmarkReport run_benchmark(const Cohort& cohort, Target target, std::uint64_t seed,
                                     const BenchmarkOptions& options = {}) {
  const auto split = train_test_split(cohort, seed);
  const Matrix all = cohort.features();
  const auto y = cohort.targets(target);
  const Matrix x_train = all.select_rows(split.train);
  const Matrix x_test = all.select_rows(split.test);
  const auto y_train = select(y, split.train);
  const auto y_test = select(y, split.test);

  BenchmarkReport report;
  report.target = target;
  report.seed = seed;
  report.n_train = split.train.size();
  report.n_test = split.test.size();
  report.rows.resize(kAllFamilies.size());
  parallel_for(kAllFamilies.size(), options.threads, [&](std::size_t k) {
    const Family family = kAllFamilies[k];
    try {
      ParamMap params;
      for (const auto& g : options.grids) {
        if (g.family == family) params = grid_search_cv(g, x_train, y_train, seed).best;
      }
      const auto model = fit_family(family, params, x_train, y_train, seed);
      AlgorithmRow row;
      row.family = family;
      row.params = params;
      row.test = compute_metrics(model.predict(x_test), y_test);
      row.train_r_squared = r_squared(model.predict(x_train), y_train);
      report.rows[k] = std::move(row);
    } catch (const std::exception& e) {
      throw AlgorithmError(family, e.what());
    }
  });
  report.selected = report.rows[select_min_rmse(report.rows)].family;
  return report;
}

// ---------------------------------------------------------------------------
// Report rendering. Column order: Algorithm, RMSE, R² Value, Accuracy (%),
// then the train-set R².

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string target_title(Target t) {
  switch (t) {
    case Target::fluid: return "Fluid";
    case Target::carbohydrate: return "Carbohydrate";
    case Target::protein: return "Protein";
    case Target::fat: return "Fat";
  }
  return "?";
}

inline void write_report_markdown(const std::vector<BenchmarkReport>& reports, std::ostream& out) {
  bool first = true;
  for (const auto& r : reports) {
    if (!first) out << '\n';
    first = false;
    out << "### " << target_title(r.target) << " prediction metrics (" << target_unit(r.target)
        << "; seed " << r.seed << ", train " << r.n_train << " / test " << r.n_test << ")\n\n";
    out << "| Algorithm | RMSE | R² Value | Accuracy (%) | Train R² |\n";
    out << "|:----------|-----:|---------:|-------------:|---------:|\n";
    for (const auto& row : r.rows) {
      out << "| " << family_name(row.family) << " | " << fixed(row.test.rmse, 4) << " | "
          << fixed(row.test.r_squared, 4) << " | " << fixed(row.test.accuracy_pct, 2) << " | "
          << fixed(row.train_r_squared, 4) << " |\n";
    }
    out << "\nSelected: " << family_name(r.selected) << '\n';
  }
}

inline void write_report_csv(const std::vector<BenchmarkReport>& reports, std::ostream& out) {
  out << "target,algorithm,rmse,r2,accuracy_pct,train_r2,selected\n";
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      out << target_name(r.target) << ',' << family_name(row.family) << ',' << fixed(row.test.rmse, 6) << ','
          << fixed(row.test.r_squared, 6) << ',' << fixed(row.test.accuracy_pct, 6) << ','
          << fixed(row.train_r_squared, 6) << ',' << (row.family == r.selected ? "yes" : "no") << '\n';
    }
  }
}

}  // namespace obeseye

#endif  // OBESEYE_EVALUATE_HPP_
