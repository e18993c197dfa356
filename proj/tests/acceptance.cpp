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

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bundle_fixture.hpp"
#include "obeseye/boosting.hpp"
#include "obeseye/bundle.hpp"
#include "obeseye/explain.hpp"
#include "obeseye/linear.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace obeseye;

namespace {

struct Failure {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

void require_near(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol)) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": got " << got << ", want " << want << " within " << tol;
    throw Failure{os.str()};
  }
}

int failures = 0;

void criterion(const std::string& name, double seconds_limit, const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  try {
    body();
  } catch (const Failure& f) {
    detail = f.what;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (detail.empty() && elapsed >= seconds_limit) {
    detail = "took " + std::to_string(elapsed) + " s, limit " + std::to_string(seconds_limit) + " s";
  }
  std::printf("%s %s (%.2f s)%s%s\n", detail.empty() ? "PASS" : "FAIL", name.c_str(), elapsed,
              detail.empty() ? "" : ": ", detail.c_str());
  std::fflush(stdout);
  if (!detail.empty()) ++failures;
}

std::vector<double> normal_targets(Rng& rng, std::size_t n, double scale) {
  std::vector<double> y(n);
  for (auto& v : y) v = scale * rng.normal();
  return y;
}

void ols_oracle() {
  Rng rng(0xA11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.below(8);
    const std::size_t n = d + 2 + rng.below(50 - d - 1);
    const auto x = testing::random_matrix(rng, n, d, 3.0);
    const auto y = normal_targets(rng, n, 10.0);
    const auto m = fit_ols(x, y);
    const auto ref = oracle::ols_normal_equations(x, y);
    const std::string tag = "problem " + std::to_string(trial);
    for (std::size_t j = 0; j < d; ++j) require_near(m.weights[j], ref.weights[j], 1e-8, tag + " weight");
    require_near(m.intercept, ref.intercept, 1e-8, tag + " intercept");
    std::vector<double> r(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += r[i] = y[i] - m.predict(x.row(i));
    require_near(total, 0.0, 1e-8, tag + " residual sum");
    for (std::size_t j = 0; j < d; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += r[i] * x(i, j);
      require_near(dot, 0.0, 1e-8, tag + " residual orthogonality");
    }
  }
}

void svr_oracle() {
  Rng rng(0x5B2);
  const double c = 2.0, eps = 0.1;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(8), d = 1 + rng.below(3);
    const auto x = testing::random_matrix(rng, n, d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 0) - 0.5 * x(i, d - 1) + 0.4 * rng.normal();
    const auto m = fit_svr_linear(x, y, SvrOptions{.c = c, .epsilon = eps});
    const auto ref = oracle::svr_projected_gradient(x, y, c, eps);
    const std::string tag = "problem " + std::to_string(trial);
    require_near(oracle::svr_primal(x, y, m.weights, m.intercept, c, eps), ref.primal, 1e-4, tag + " primal");
    for (std::size_t i = 0; i < n; ++i) {
      const double beta = m.dual_coefficients[i];
      const double r = std::abs(y[i] - m.predict(x.row(i)));
      require(std::abs(beta) <= c + 1e-12, tag + " box constraint");
      if (r < eps - 1e-4) require_near(beta, 0.0, 1e-6, tag + " inside tube");
      if (r > eps + 1e-4) require_near(std::abs(beta), c, 1e-6, tag + " outside tube");
    }
  }
}

DecisionTree swap_features(DecisionTree t, int a, int b) {
  for (auto& node : t.nodes) {
    if (node.feature == a) {
      node.feature = b;
    } else if (node.feature == b) {
      node.feature = a;
    }
  }
  return t;
}

std::vector<DecisionTree> with_swapped_copies(const std::vector<DecisionTree>& trees) {
  auto out = trees;
  for (const auto& t : trees) out.push_back(swap_features(t, 0, 1));
  return out;
}

template <class M>
void compare_shap(const M& model, const Matrix& sample, const Matrix& bg, const std::string& tag) {
  const PredictFn f = [&model](std::span<const double> v) { return model.predict(v); };
  const auto fast = shap_tree(model, sample.row(0), bg);
  const auto exact = shap_exact(f, sample.row(0), bg);
  require_near(fast.base_value, exact.base_value, 1e-9, tag + " base value");
  double sum = 0.0;
  for (std::size_t i = 0; i < fast.phi.size(); ++i) {
    require_near(fast.phi[i], exact.phi[i], 1e-9, tag + " phi " + std::to_string(i));
    sum += fast.phi[i];
  }
  require_near(fast.base_value + sum, model.predict(sample.row(0)), 1e-9, tag + " local accuracy");
}

void shapley_oracle() {
  Rng rng(0x54A9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 3 + rng.below(6), n = 30 + rng.below(40);
    auto x = testing::random_grid_matrix(rng, n, d, 5);
    for (std::size_t i = 0; i < n; ++i) x(i, d - 1) = 0.0;  // never split on
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 0) * x(i, 1) + x(i, 2) + 0.3 * rng.normal();
    const auto bg = testing::random_grid_matrix(rng, 1 + rng.below(20), d, 5);
    const auto sample = testing::random_grid_matrix(rng, 1, d, 5);
    auto sym_bg = bg, sym_sample = sample;
    for (std::size_t i = 0; i < sym_bg.rows(); ++i) sym_bg(i, 1) = sym_bg(i, 0);
    sym_sample(0, 1) = sym_sample(0, 0);

    const std::string tag = "case " + std::to_string(trial);
    std::vector<double> phi, sym_phi;
    switch (trial % 3) {
      case 0: {
        const auto tree = fit_cart(x, y, TreeParams{.max_depth = 1 + static_cast<int>(rng.below(6))});
        compare_shap(tree, sample, bg, tag + " tree");
        phi = shap_tree(tree, sample.row(0), bg).phi;
        const RandomForest sym{.trees = with_swapped_copies({tree})};
        compare_shap(sym, sym_sample, sym_bg, tag + " symmetric tree pair");
        sym_phi = shap_tree(sym, sym_sample.row(0), sym_bg).phi;
        break;
      }
      case 1: {
        const auto forest = fit_random_forest(x, y, ForestParams{.n_trees = 10, .seed = static_cast<std::uint64_t>(trial)});
        compare_shap(forest, sample, bg, tag + " forest");
        phi = shap_tree(forest, sample.row(0), bg).phi;
        RandomForest sym = forest;
        sym.trees = with_swapped_copies(forest.trees);
        compare_shap(sym, sym_sample, sym_bg, tag + " symmetric forest");
        sym_phi = shap_tree(sym, sym_sample.row(0), sym_bg).phi;
        break;
      }
      default: {
        BoostParams p;
        p.n_stages = 5;
        p.max_leaves = 2 + rng.below(8);
        const auto boosted = fit_gbdt(x, y, p);
        compare_shap(boosted, sample, bg, tag + " boosted");
        phi = shap_tree(boosted, sample.row(0), bg).phi;
        BoostedEnsemble sym = boosted;
        sym.stages = with_swapped_copies(boosted.stages);
        compare_shap(sym, sym_sample, sym_bg, tag + " symmetric boosted");
        sym_phi = shap_tree(sym, sym_sample.row(0), sym_bg).phi;
        break;
      }
    }
    require(phi[d - 1] == 0.0, tag + " dummy feature has nonzero phi");
    require_near(sym_phi[0], sym_phi[1], 1e-9, tag + " symmetry");
  }
}

void metric_hand_values() {
  const std::vector<double> pred = {1, 2, 3}, actual = {2, 2, 5};
  require_near(rmse(pred, actual), std::sqrt(5.0 / 3.0), 1e-12, "rmse");
  const std::vector<double> pred2 = {1, 2, 4}, actual2 = {1, 2, 3};
  require_near(r_squared(pred2, actual2), 0.5, 1e-12, "r_squared");
  const std::vector<double> pred3 = {2, 4}, actual3 = {2, 5};
  require_near(accuracy_pct(pred3, actual3), 90.0, 1e-12, "accuracy_pct");
}

void encoding_conformance() {
  struct HeightCase {
    int feet;
    double inches, cm;
  };
  for (const auto& c : {HeightCase{5, 0, 152.40}, HeightCase{6, 0, 182.88}, HeightCase{5, 7, 170.18}}) {
    require_near(convert_height(c.feet, c.inches), c.cm, 1e-9, "height " + std::to_string(c.feet));
  }
  struct GlucoseCase {
    double value;
    GlucoseCategory want;
  };
  for (const auto& c : {GlucoseCase{4.5, GlucoseCategory::normal}, GlucoseCase{6.0, GlucoseCategory::high},
                        GlucoseCase{3.0, GlucoseCategory::low}, GlucoseCase{3.9, GlucoseCategory::normal},
                        GlucoseCase{5.7, GlucoseCategory::normal}}) {
    require(categorize_glucose(c.value) == c.want, "glucose " + std::to_string(c.value));
  }
  struct CreatinineCase {
    double value;
    Gender sex;
    bool ckd;
  };
  for (const auto& c : {CreatinineCase{1.3, Gender::female, true}, CreatinineCase{1.3, Gender::male, false},
                        CreatinineCase{1.5, Gender::male, true}}) {
    require(categorize_creatinine(c.value, c.sex) == c.ckd, "creatinine " + std::to_string(c.value));
  }
  struct BpCase {
    double sys, dia;
    BpCategory want;
  };
  for (const auto& c : {BpCase{85, 55, BpCategory::low}, BpCase{110, 75, BpCategory::normal},
                        BpCase{140, 95, BpCategory::high}}) {
    require(categorize_bp(c.sys, c.dia) == c.want, "bp " + std::to_string(c.sys));
  }
  struct AgeCase {
    int age;
    AgeGroup want;
  };
  for (const auto& c : {AgeCase{35, AgeGroup::young}, AgeCase{50, AgeGroup::middle}, AgeCase{65, AgeGroup::senior}}) {
    require(bin_age(c.age) == c.want, "age " + std::to_string(c.age));
  }
  auto r = testing::reference_record();
  r.gender = Gender::male;
  require(encode_record(r).target(Target::fluid) == 2.6, "male fluid default");
  r.gender = Gender::female;
  require(encode_record(r).target(Target::fluid) == 2.0, "female fluid default");
  r.fasting_glucose.reset();
  require(encode_record(r).features[feature::kDm] == -1.0, "absent glucose sentinel");
  r.fasting_glucose = 4.5;
  require(encode_record(r).features[feature::kDm] == -1.0, "non-diabetic glucose sentinel");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), "cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + OBESEYE_CLI_PATH + "\" " + args;
  const int rc = std::system(cmd.c_str());
  require(rc == 0, "command failed (" + std::to_string(rc) + "): " + cmd);
}

const std::vector<std::string> kPipelineFiles = {"cohort.csv", "bundle.obeseye.json", "bench.md", "bench.csv",
                                                 "explain.json", "plot.csv"};

void run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = "\"" + dir.string() + "/";
  run_cli("gen --n 146 --seed 42 --out " + d + "cohort.csv\"");
  run_cli("train --cohort " + d + "cohort.csv\" --seed 42 --out " + d + "bundle.obeseye.json\"");
  run_cli("bench --bundle " + d + "bundle.obeseye.json\" --format md --out " + d + "bench.md\"");
  run_cli("bench --bundle " + d + "bundle.obeseye.json\" --format csv --out " + d + "bench.csv\"");
  run_cli("explain --bundle " + d + "bundle.obeseye.json\" --cohort " + d + "cohort.csv\" --row 0 --target fat"
          " --method lime --out " + d + "explain.json\"");
  run_cli("plot-data --bundle " + d + "bundle.obeseye.json\" --cohort " + d + "cohort.csv\" --target all --out " + d +
          "plot.csv\"");
}

void pipeline_tables(const fs::path& dir) {
  std::istringstream csv(read_file(dir / "bench.csv"));
  std::string line;
  std::getline(csv, line);
  require(line == "target,algorithm,rmse,r2,accuracy_pct,train_r2,selected", "csv header: " + line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(csv, line)) {
    if (!line.empty()) rows.push_back(split_csv_line(line));
  }
  require(rows.size() == 24, "expected 24 rows, got " + std::to_string(rows.size()));
  const std::vector<std::string> order = {"Linear", "SVM", "DS", "RF", "XGB-like", "LGBM-like"};
  for (std::size_t t = 0; t < 4; ++t) {
    double best = 1e300;
    std::string best_name, selected;
    int selected_count = 0;
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& row = rows[t * 6 + k];
      require(row[0] == target_name(kAllTargets[t]), "target order at row " + std::to_string(t * 6 + k));
      require(row[1] == order[k], "algorithm order: " + row[1]);
      const double rmse_value = std::stod(row[2]);
      if (rmse_value < best) best = rmse_value, best_name = row[1];
      if (row[1] == "DS") require(std::stod(row[5]) == 1.0, "DS train R2 " + row[5] + " for " + row[0]);
      if (row[6] == "yes") selected = row[1], ++selected_count;
    }
    require(selected_count == 1 && selected == best_name,
            "selected " + selected + " but min test RMSE is " + best_name + " for " + std::string(target_name(kAllTargets[t])));
  }
  const auto md = read_file(dir / "bench.md");
  std::size_t tables = 0;
  for (auto pos = md.find("| Algorithm | RMSE | R² Value | Accuracy (%) |"); pos != std::string::npos;
       pos = md.find("| Algorithm | RMSE | R² Value | Accuracy (%) |", pos + 1)) {
    ++tables;
  }
  require(tables == 4, "markdown tables: " + std::to_string(tables));
}

void pipeline_reproduction() {
  const fs::path dir = fs::current_path() / "acceptance_pipeline";
  const auto start = std::chrono::steady_clock::now();
  run_pipeline(dir);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(elapsed < 60.0, "gen/train/bench took " + std::to_string(elapsed) + " s");
  pipeline_tables(dir);
  std::vector<std::string> first;
  for (const auto& f : kPipelineFiles) first.push_back(read_file(dir / f));
  run_pipeline(dir);
  for (std::size_t i = 0; i < kPipelineFiles.size(); ++i) {
    require(read_file(dir / kPipelineFiles[i]) == first[i], kPipelineFiles[i] + " differs between reruns");
  }
}

std::string top_feature(const fs::path& dir, const std::string& target) {
  const std::string d = "\"" + dir.string() + "/";
  run_cli("explain --bundle " + d + "bundle.obeseye.json\" --cohort " + d + "cohort.csv\" --global --target " + target +
          " --method shap --out " + d + target + "_global.json\"");
  const auto j = nlohmann::json::parse(read_file(dir / (target + "_global.json")));
  return j["ranking"][0]["name"].get<std::string>();
}

void global_findings() {
  for (int seed = 1; seed <= 5; ++seed) {
    const fs::path dir = fs::current_path() / ("acceptance_seed_" + std::to_string(seed));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = "\"" + dir.string() + "/";
    const std::string s = std::to_string(seed);
    run_cli("gen --n 146 --seed " + s + " --out " + d + "cohort.csv\"");
    run_cli("train --cohort " + d + "cohort.csv\" --seed " + s + " --out " + d + "bundle.obeseye.json\"");
    const auto fluid = top_feature(dir, "fluid");
    const auto carb = top_feature(dir, "carbohydrate");
    require(fluid == "ckd" || fluid == "ckd_cat", "seed " + s + " fluid top feature " + fluid);
    require(carb == "dm" || carb == "dm_cat", "seed " + s + " carbohydrate top feature " + carb);
  }
}

double train_rmse(const BoostedEnsemble& m, const Matrix& x, std::span<const double> y) {
  std::vector<double> p(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) p[i] = m.predict(x.row(i));
  return rmse(y, p);
}

void boosting_convergence() {
  const Matrix x = Matrix::from_rows({{0, 1}, {1, 0}, {2, 5}, {3, 3}, {4, 1}, {5, 2}, {6, 6}, {7, 0}});
  const std::vector<double> y = {3, -1, 4, 1, -5, 9, 2, 6};
  BoostParams p;
  p.max_leaves = 10;
  p.learning_rate = 0.1;
  p.n_stages = 500;
  const double err = train_rmse(fit_gbdt(x, y, p), x, y);
  require(err < 1e-6, "train RMSE " + std::to_string(err));

  Rng rng(0xB005);
  const auto xr = testing::random_matrix(rng, 80, 3);
  std::vector<double> yr(80);
  for (std::size_t i = 0; i < 80; ++i) yr[i] = std::sin(3 * xr(i, 0)) + xr(i, 1) * xr(i, 2) + 0.2 * rng.normal();
  for (auto kind : {BoostKind::xgb_like, BoostKind::lgbm_like}) {
    for (const auto& [xs, ys] : {std::pair<const Matrix*, const std::vector<double>*>{&x, &y}, {&xr, &yr}}) {
      std::vector<double> trace;
      fit_gbdt(*xs, *ys, preset_config(kind), &trace);
      for (std::size_t t = 1; t < trace.size(); ++t) {
        require(trace[t] <= trace[t - 1], "loss increased at stage " + std::to_string(t));
      }
    }
  }
}

void bundle_round_trip() {
  Rng rng(0xB0D1);
  std::vector<RawPatientRecord> records;
  for (int i = 0; i < 100; ++i) records.push_back(testing::random_record(rng));
  const auto path = fs::current_path() / "acceptance_round_trip.obeseye.json";
  for (const auto& bundle : {testing::trained_bundle(), testing::mixed_bundle()}) {
    save_bundle(*bundle, path);
    const auto loaded = load_bundle(path);
    for (std::size_t i = 0; i < records.size(); ++i) {
      require(loaded.predict(records[i]) == bundle->predict(records[i]), "record " + std::to_string(i) + " differs");
    }
    require(serialize_bundle(loaded) == read_file(path), "re-serialised bundle differs");
  }
  fs::remove(path);
}

}  // namespace

int main() {
  criterion("OLS oracle equivalence", 5, ols_oracle);
  criterion("SVR oracle equivalence", 10, svr_oracle);
  criterion("Shapley oracle equivalence", 30, shapley_oracle);
  criterion("Metric hand-values", 1, metric_hand_values);
  criterion("Encoding conformance", 1, encoding_conformance);
  criterion("Pipeline reproduction", 300, pipeline_reproduction);
  criterion("Global findings for seeds 1-5", 300, global_findings);
  criterion("Boosting convergence", 30, boosting_convergence);
  criterion("Bundle round trip", 60, bundle_round_trip);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
