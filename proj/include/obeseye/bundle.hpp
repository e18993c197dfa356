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

// The persisted model bundle: four per-target models plus everything the
// service needs to encode, predict and explain without the training data.
//
// Format v1 is a single JSON document. Every double is written as its
// shortest round-trip decimal string, so a reload is bit-identical on any
// platform. Trees are flat, index-linked node arrays.

#ifndef OBESEYE_BUNDLE_HPP_
#define OBESEYE_BUNDLE_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "obeseye/cohort.hpp"
#include "obeseye/common.hpp"
#include "obeseye/evaluate.hpp"
#include "obeseye/explain.hpp"
#include "obeseye/model.hpp"

namespace obeseye {

inline constexpr std::string_view kBundleFormat = "v1";
inline constexpr std::string_view kBundleExtension = ".obeseye.json";
inline constexpr std::size_t kMaxBackgroundRows = 100;

class BundleCorruptError : public std::runtime_error {
 public:
  BundleCorruptError(const std::string& what, std::optional<std::size_t> byte_offset = std::nullopt)
      : std::runtime_error(what), byte_offset_(byte_offset) {}
  std::optional<std::size_t> byte_offset() const { return byte_offset_; }

 private:
  std::optional<std::size_t> byte_offset_;
};

class BundleVersionError : public std::runtime_error {
 public:
  explicit BundleVersionError(std::string version)
      : std::runtime_error("unsupported bundle format version \"" + version + "\"; this build reads " +
                           std::string(kBundleFormat)),
        version_(std::move(version)) {}
  const std::string& version() const { return version_; }

 private:
  std::string version_;
};

struct TargetModel {
  Target target = Target::fluid;
  TrainedModel model;
  std::optional<GridResult> tuning;  // CV search that produced model.params
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  Provenance provenance;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<BenchmarkReport> reports;  // one per target, default hyperparameters
};

struct ModelBundle {
  std::string format_version{kBundleFormat};
  EncodingSchema schema = schema_v1();
  std::array<TargetModel, 4> models;  // indexed by Target
  TrainingMetadata training;
  Matrix background;  // Shapley reference rows (training split)
  TrainingStats lime_stats;

  const TargetModel& model(Target t) const { return models[static_cast<std::size_t>(t)]; }

  std::array<double, 4> predict(std::span<const double> features) const {
    std::array<double, 4> out{};
    for (auto t : kAllTargets) out[static_cast<std::size_t>(t)] = model(t).model.predict(features);
    return out;
  }

  std::array<double, 4> predict(const RawPatientRecord& record) const {
    return predict(encode_record(record, schema).features);
  }
};

// ---------------------------------------------------------------------------
// Training.

struct TrainOptions {
  bool tune_selected = true;
  std::size_t threads = 1;
};

// Benchmarks all six families per target, picks the lowest test RMSE, tunes
// that family by grid-search CV on the train split and refits it there.
inline ModelBundle train_bundle(const Cohort& cohort, std::uint64_t seed, const TrainOptions& options = {}) {
  const auto split = train_test_split(cohort, seed);
  const Matrix all = cohort.features();
  const Matrix x_train = all.select_rows(split.train);

  ModelBundle bundle;
  bundle.schema = cohort.schema();
  bundle.training.seed = seed;
  bundle.training.provenance = cohort.provenance();
  bundle.training.n_train = split.train.size();
  bundle.training.n_test = split.test.size();

  BenchmarkOptions bench;
  bench.threads = options.threads;
  for (auto t : kAllTargets) {
    auto report = run_benchmark(cohort, t, seed, bench);
    const auto y_train = select(cohort.targets(t), split.train);
    TargetModel tm;
    tm.target = t;
    ParamMap params;
    if (options.tune_selected) {
      if (auto grid = default_grid(report.selected, all.cols())) {
        try {
          tm.tuning = grid_search_cv(*grid, x_train, y_train, seed, options.threads);
        } catch (const std::exception& e) {
          throw AlgorithmError(report.selected, std::string("tuning failed: ") + e.what());
        }
        params = tm.tuning->best;
      }
    }
    tm.model = fit_family(report.selected, params, x_train, y_train, seed, options.threads);
    bundle.models[static_cast<std::size_t>(t)] = std::move(tm);
    bundle.training.reports.push_back(std::move(report));
  }

  auto order = split.train;
  Rng rng(mix_seed(seed, 0xBAC6));
  rng.shuffle(order);
  order.resize(std::min(order.size(), kMaxBackgroundRows));
  bundle.background = all.select_rows(order);
  bundle.lime_stats = compute_training_stats(x_train, bundle.schema);
  return bundle;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace internal {

using Json = nlohmann::ordered_json;

inline Json num(double v) { return format_double(v); }

inline Json nums(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline Json params_json(const ParamMap& p) {
  Json o = Json::object();
  for (const auto& [k, v] : p) o[k] = num(v);
  return o;
}

inline Json tree_json(const DecisionTree& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back(Json::array({n.feature, num(n.threshold), n.left, n.right, num(n.value), n.count,
                                 num(n.impurity_decrease)}));
  }
  return {{"num_features", t.num_features}, {"nodes", std::move(nodes)}};
}

inline Json impl_json(const ModelImpl& impl) {
  return std::visit(
      [](const auto& m) -> Json {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearModel>) {
          return {{"weights", nums(m.weights)}, {"intercept", num(m.intercept)}, {"ridge_fallback", m.ridge_fallback}};
        } else if constexpr (std::is_same_v<M, SvrModel>) {
          return {{"weights", nums(m.weights)},   {"intercept", num(m.intercept)},
                  {"c", num(m.c)},                {"epsilon", num(m.epsilon)},
                  {"dual_coefficients", nums(m.dual_coefficients)}};
        } else if constexpr (std::is_same_v<M, DecisionTree>) {
          return {{"tree", tree_json(m)}};
        } else if constexpr (std::is_same_v<M, RandomForest>) {
          Json trees = Json::array();
          for (const auto& t : m.trees) trees.push_back(tree_json(t));
          return {{"seed", m.seed},
                  {"features_per_split", m.features_per_split},
                  {"bootstrap", m.bootstrap},
                  {"trees", std::move(trees)}};
        } else {
          Json stages = Json::array();
          for (const auto& t : m.stages) stages.push_back(tree_json(t));
          return {{"init", num(m.init)}, {"learning_rate", num(m.learning_rate)}, {"stages", std::move(stages)}};
        }
      },
      impl);
}

inline Json report_json(const BenchmarkReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"family", family_name(row.family)},
                    {"params", params_json(row.params)},
                    {"rmse", num(row.test.rmse)},
                    {"r_squared", num(row.test.r_squared)},
                    {"accuracy_pct", num(row.test.accuracy_pct)},
                    {"train_r_squared", num(row.train_r_squared)}});
  }
  return {{"target", target_name(r.target)}, {"seed", r.seed},         {"n_train", r.n_train},
          {"n_test", r.n_test},              {"selected", family_name(r.selected)}, {"rows", std::move(rows)}};
}

inline std::string_view kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::binary: return "binary";
    case FeatureKind::nominal: return "nominal";
  }
  return "?";
}

// Strict reader: every object must carry exactly the expected keys.
class Reader {
 public:
  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw BundleCorruptError("bundle " + std::string(kBundleFormat) + ": " + where + ": " + what);
  }

  static const Json& object(const Json& j, const std::string& where, std::initializer_list<std::string_view> keys) {
    if (!j.is_object()) fail(where, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
        fail(where, "unknown field \"" + it.key() + "\" (not part of format " + std::string(kBundleFormat) + ")");
      }
    }
    for (auto k : keys) {
      if (!j.contains(k)) fail(where, "missing field \"" + std::string(k) + "\"");
    }
    return j;
  }

  static const Json& array(const Json& j, const std::string& where) {
    if (!j.is_array()) fail(where, "expected an array");
    return j;
  }

  static double number(const Json& j, const std::string& where) {
    if (!j.is_string()) fail(where, "expected a decimal string");
    auto v = parse_double(j.get_ref<const std::string&>());
    if (!v) fail(where, "not a finite decimal: " + j.dump());
    return *v;
  }

  static std::vector<double> numbers(const Json& j, const std::string& where) {
    std::vector<double> out;
    for (std::size_t i = 0; i < array(j, where).size(); ++i) {
      out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  template <typename T>
  static T integer(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (!j.is_number_unsigned()) fail(where, "expected a non-negative integer");
    }
    return j.get<T>();
  }

  static bool boolean(const Json& j, const std::string& where) {
    if (!j.is_boolean()) fail(where, "expected a boolean");
    return j.get<bool>();
  }

  static const std::string& string(const Json& j, const std::string& where) {
    if (!j.is_string()) fail(where, "expected a string");
    return j.get_ref<const std::string&>();
  }

  static ParamMap params(const Json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
    ParamMap p;
    for (auto it = j.begin(); it != j.end(); ++it) p[it.key()] = number(it.value(), where + "." + it.key());
    return p;
  }

  static Family family(const Json& j, const std::string& where) {
    auto f = parse_family(string(j, where));
    if (!f) fail(where, "unknown model family " + j.dump());
    return *f;
  }

  static Target target(const Json& j, const std::string& where) {
    auto t = parse_target(string(j, where));
    if (!t) fail(where, "unknown target " + j.dump());
    return *t;
  }

  static DecisionTree tree(const Json& j, const std::string& where) {
    object(j, where, {"num_features", "nodes"});
    DecisionTree t;
    t.num_features = integer<std::size_t>(j["num_features"], where + ".num_features");
    const auto& nodes = array(j["nodes"], where + ".nodes");
    if (nodes.empty()) fail(where, "tree has no nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::string at = where + ".nodes[" + std::to_string(i) + "]";
      const auto& n = array(nodes[i], at);
      if (n.size() != 7) fail(at, "expected 7 entries");
      TreeNode node;
      node.feature = integer<int>(n[0], at);
      node.threshold = number(n[1], at);
      node.left = integer<int>(n[2], at);
      node.right = integer<int>(n[3], at);
      node.value = number(n[4], at);
      node.count = integer<std::size_t>(n[5], at);
      node.impurity_decrease = number(n[6], at);
      const auto size = static_cast<int>(nodes.size());
      const bool leaf = node.left < 0 && node.right < 0 && node.feature < 0;
      const bool split = node.feature >= 0 && static_cast<std::size_t>(node.feature) < t.num_features &&
                         node.left > static_cast<int>(i) && node.left < size && node.right > static_cast<int>(i) &&
                         node.right < size;
      if (!leaf && !split) fail(at, "malformed node links");
      t.nodes.push_back(node);
    }
    return t;
  }

  static std::vector<DecisionTree> trees(const Json& j, const std::string& where) {
    std::vector<DecisionTree> out;
    for (std::size_t i = 0; i < array(j, where).size(); ++i) {
      out.push_back(tree(j[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  static ModelImpl impl(Family family, const Json& j, const std::string& where) {
    switch (family) {
      case Family::linear: {
        object(j, where, {"weights", "intercept", "ridge_fallback"});
        return LinearModel{numbers(j["weights"], where + ".weights"), number(j["intercept"], where + ".intercept"),
                           boolean(j["ridge_fallback"], where + ".ridge_fallback")};
      }
      case Family::svm: {
        object(j, where, {"weights", "intercept", "c", "epsilon", "dual_coefficients"});
        SvrModel m;
        m.weights = numbers(j["weights"], where + ".weights");
        m.intercept = number(j["intercept"], where + ".intercept");
        m.c = number(j["c"], where + ".c");
        m.epsilon = number(j["epsilon"], where + ".epsilon");
        m.dual_coefficients = numbers(j["dual_coefficients"], where + ".dual_coefficients");
        return m;
      }
      case Family::ds:
        object(j, where, {"tree"});
        return tree(j["tree"], where + ".tree");
      case Family::rf: {
        object(j, where, {"seed", "features_per_split", "bootstrap", "trees"});
        RandomForest f;
        f.seed = integer<std::uint64_t>(j["seed"], where + ".seed");
        f.features_per_split = integer<std::size_t>(j["features_per_split"], where + ".features_per_split");
        f.bootstrap = boolean(j["bootstrap"], where + ".bootstrap");
        f.trees = trees(j["trees"], where + ".trees");
        if (f.trees.empty()) fail(where, "forest has no trees");
        return f;
      }
      case Family::xgb_like:
      case Family::lgbm_like: {
        object(j, where, {"init", "learning_rate", "stages"});
        BoostedEnsemble e;
        e.init = number(j["init"], where + ".init");
        e.learning_rate = number(j["learning_rate"], where + ".learning_rate");
        e.stages = trees(j["stages"], where + ".stages");
        return e;
      }
    }
    fail(where, "unknown family");
  }

  static BenchmarkReport report(const Json& j, const std::string& where) {
    object(j, where, {"target", "seed", "n_train", "n_test", "selected", "rows"});
    BenchmarkReport r;
    r.target = target(j["target"], where + ".target");
    r.seed = integer<std::uint64_t>(j["seed"], where + ".seed");
    r.n_train = integer<std::size_t>(j["n_train"], where + ".n_train");
    r.n_test = integer<std::size_t>(j["n_test"], where + ".n_test");
    r.selected = family(j["selected"], where + ".selected");
    const auto& rows = array(j["rows"], where + ".rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string at = where + ".rows[" + std::to_string(i) + "]";
      object(rows[i], at, {"family", "params", "rmse", "r_squared", "accuracy_pct", "train_r_squared"});
      AlgorithmRow row;
      row.family = family(rows[i]["family"], at + ".family");
      row.params = params(rows[i]["params"], at + ".params");
      row.test.rmse = number(rows[i]["rmse"], at + ".rmse");
      row.test.r_squared = number(rows[i]["r_squared"], at + ".r_squared");
      row.test.accuracy_pct = number(rows[i]["accuracy_pct"], at + ".accuracy_pct");
      row.train_r_squared = number(rows[i]["train_r_squared"], at + ".train_r_squared");
      r.rows.push_back(std::move(row));
    }
    return r;
  }
};

}  // namespace internal

inline nlohmann::ordered_json bundle_to_json(const ModelBundle& b) {
  using internal::Json;
  using internal::num;
  using internal::nums;
  Json j;
  j["format_version"] = b.format_version;

  Json features = Json::array();
  for (const auto& f : b.schema.features) {
    features.push_back({{"name", f.name}, {"kind", internal::kind_name(f.kind)}, {"labels", f.labels}});
  }
  j["schema"] = {{"version", b.schema.version}, {"sentinel", num(b.schema.sentinel)}, {"features", features}};

  Json models = Json::object();
  for (const auto& tm : b.models) {
    Json tuning = nullptr;
    if (tm.tuning) {
      Json cells = Json::array();
      for (const auto& c : tm.tuning->cells) {
        cells.push_back({{"params", internal::params_json(c.params)}, {"mean_cv_rmse", num(c.mean_cv_rmse)}});
      }
      tuning = {{"best_index", tm.tuning->best_index}, {"cells", std::move(cells)}};
    }
    models[std::string(target_name(tm.target))] = {{"family", family_name(tm.model.family)},
                                                   {"params", internal::params_json(tm.model.params)},
                                                   {"model", internal::impl_json(tm.model.impl)},
                                                   {"tuning", std::move(tuning)}};
  }
  j["models"] = std::move(models);

  Json reports = Json::array();
  for (const auto& r : b.training.reports) reports.push_back(internal::report_json(r));
  const auto& p = b.training.provenance;
  j["training"] = {{"seed", b.training.seed},
                   {"provenance",
                    {{"kind", p.kind == Provenance::Kind::file ? "file" : "synthetic"},
                     {"path", p.path},
                     {"seed", p.seed}}},
                   {"n_train", b.training.n_train},
                   {"n_test", b.training.n_test},
                   {"reports", std::move(reports)}};

  Json rows = Json::array();
  for (std::size_t r = 0; r < b.background.rows(); ++r) rows.push_back(nums(b.background.row(r)));
  j["background"] = std::move(rows);

  Json stats = Json::array();
  for (const auto& s : b.lime_stats.features) {
    stats.push_back({{"kind", internal::kind_name(s.kind)},
                     {"mean", num(s.mean)},
                     {"stddev", num(s.stddev)},
                     {"values", nums(s.values)},
                     {"frequencies", nums(s.frequencies)}});
  }
  j["lime_stats"] = std::move(stats);
  return j;
}

inline std::string serialize_bundle(const ModelBundle& b) { return bundle_to_json(b).dump() + "\n"; }

inline ModelBundle parse_bundle(std::string_view text) {
  using internal::Reader;
  internal::Json j;
  try {
    j = internal::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw BundleCorruptError("corrupt bundle document at byte " + std::to_string(e.byte) + ": " + e.what(),
                             e.byte);
  }
  if (!j.is_object()) Reader::fail("document", "expected an object");
  if (!j.contains("format_version") || !j["format_version"].is_string()) {
    Reader::fail("document", "missing format_version");
  }
  if (const auto& v = j["format_version"].get_ref<const std::string&>(); v != kBundleFormat) {
    throw BundleVersionError(v);
  }
  Reader::object(j, "document", {"format_version", "schema", "models", "training", "background", "lime_stats"});

  ModelBundle b;
  const auto& schema = Reader::object(j["schema"], "schema", {"version", "sentinel", "features"});
  b.schema.version = Reader::string(schema["version"], "schema.version");
  b.schema.sentinel = Reader::number(schema["sentinel"], "schema.sentinel");
  b.schema.features.clear();
  const auto& features = Reader::array(schema["features"], "schema.features");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string at = "schema.features[" + std::to_string(i) + "]";
    Reader::object(features[i], at, {"name", "kind", "labels"});
    FeatureSpec f;
    f.name = Reader::string(features[i]["name"], at + ".name");
    const auto& kind = Reader::string(features[i]["kind"], at + ".kind");
    if (kind == "continuous") {
      f.kind = FeatureKind::continuous;
    } else if (kind == "binary") {
      f.kind = FeatureKind::binary;
    } else if (kind == "nominal") {
      f.kind = FeatureKind::nominal;
    } else {
      Reader::fail(at + ".kind", "unknown kind \"" + kind + "\"");
    }
    for (const auto& l : Reader::array(features[i]["labels"], at + ".labels")) {
      f.labels.push_back(Reader::string(l, at + ".labels"));
    }
    b.schema.features.push_back(std::move(f));
  }
  if (!(b.schema == schema_v1())) Reader::fail("schema", "does not match the encoding schema of this build");
  const std::size_t d = b.schema.size();

  const auto& models = Reader::object(j["models"], "models", {"fluid", "carbohydrate", "protein", "fat"});
  for (auto t : kAllTargets) {
    const std::string at = "models." + std::string(target_name(t));
    const auto& m = Reader::object(models[std::string(target_name(t))], at, {"family", "params", "model", "tuning"});
    TargetModel tm;
    tm.target = t;
    tm.model.family = Reader::family(m["family"], at + ".family");
    tm.model.params = Reader::params(m["params"], at + ".params");
    tm.model.impl = Reader::impl(tm.model.family, m["model"], at + ".model");
    const bool dims_ok = std::visit(
        [&](const auto& impl) {
          using M = std::decay_t<decltype(impl)>;
          if constexpr (std::is_same_v<M, LinearModel> || std::is_same_v<M, SvrModel>) {
            return impl.weights.size() == d;
          } else if constexpr (std::is_same_v<M, DecisionTree>) {
            return impl.num_features == d;
          } else {
            const auto& trees = [&]() -> const std::vector<DecisionTree>& {
              if constexpr (std::is_same_v<M, RandomForest>) return impl.trees;
              else return impl.stages;
            }();
            return std::all_of(trees.begin(), trees.end(), [&](const auto& tr) { return tr.num_features == d; });
          }
        },
        tm.model.impl);
    if (!dims_ok) Reader::fail(at + ".model", "feature count does not match the schema");
    if (!m["tuning"].is_null()) {
      const auto& tuning = Reader::object(m["tuning"], at + ".tuning", {"best_index", "cells"});
      GridResult g;
      g.best_index = Reader::integer<std::size_t>(tuning["best_index"], at + ".tuning.best_index");
      const auto& cells = Reader::array(tuning["cells"], at + ".tuning.cells");
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string c = at + ".tuning.cells[" + std::to_string(i) + "]";
        Reader::object(cells[i], c, {"params", "mean_cv_rmse"});
        g.cells.push_back({Reader::params(cells[i]["params"], c + ".params"),
                           Reader::number(cells[i]["mean_cv_rmse"], c + ".mean_cv_rmse")});
      }
      if (g.best_index >= g.cells.size()) Reader::fail(at + ".tuning.best_index", "out of range");
      g.best = g.cells[g.best_index].params;
      tm.tuning = std::move(g);
    }
    b.models[static_cast<std::size_t>(t)] = std::move(tm);
  }

  const auto& training = Reader::object(j["training"], "training", {"seed", "provenance", "n_train", "n_test", "reports"});
  b.training.seed = Reader::integer<std::uint64_t>(training["seed"], "training.seed");
  const auto& prov = Reader::object(training["provenance"], "training.provenance", {"kind", "path", "seed"});
  const auto& kind = Reader::string(prov["kind"], "training.provenance.kind");
  if (kind != "file" && kind != "synthetic") Reader::fail("training.provenance.kind", "unknown kind");
  b.training.provenance.kind = kind == "file" ? Provenance::Kind::file : Provenance::Kind::synthetic;
  b.training.provenance.path = Reader::string(prov["path"], "training.provenance.path");
  b.training.provenance.seed = Reader::integer<std::uint64_t>(prov["seed"], "training.provenance.seed");
  b.training.n_train = Reader::integer<std::size_t>(training["n_train"], "training.n_train");
  b.training.n_test = Reader::integer<std::size_t>(training["n_test"], "training.n_test");
  const auto& reports = Reader::array(training["reports"], "training.reports");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    b.training.reports.push_back(Reader::report(reports[i], "training.reports[" + std::to_string(i) + "]"));
  }

  const auto& background = Reader::array(j["background"], "background");
  if (background.empty()) Reader::fail("background", "needs at least one row");
  b.background = Matrix(0, d);
  for (std::size_t r = 0; r < background.size(); ++r) {
    auto row = Reader::numbers(background[r], "background[" + std::to_string(r) + "]");
    if (row.size() != d) Reader::fail("background[" + std::to_string(r) + "]", "wrong row width");
    b.background.push_row(row);
  }

  const auto& stats = Reader::array(j["lime_stats"], "lime_stats");
  if (stats.size() != d) Reader::fail("lime_stats", "must cover every feature");
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const std::string at = "lime_stats[" + std::to_string(i) + "]";
    Reader::object(stats[i], at, {"kind", "mean", "stddev", "values", "frequencies"});
    FeatureStats s;
    s.kind = b.schema.features[i].kind;
    if (Reader::string(stats[i]["kind"], at + ".kind") != internal::kind_name(s.kind)) {
      Reader::fail(at + ".kind", "does not match the schema");
    }
    s.mean = Reader::number(stats[i]["mean"], at + ".mean");
    s.stddev = Reader::number(stats[i]["stddev"], at + ".stddev");
    s.values = Reader::numbers(stats[i]["values"], at + ".values");
    s.frequencies = Reader::numbers(stats[i]["frequencies"], at + ".frequencies");
    if (s.values.size() != s.frequencies.size()) Reader::fail(at, "values and frequencies differ in length");
    b.lime_stats.features.push_back(std::move(s));
  }
  return b;
}

inline void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_bundle(bundle);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open bundle " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_bundle(text.str());
}

}  // namespace obeseye

#endif  // OBESEYE_BUNDLE_HPP_
