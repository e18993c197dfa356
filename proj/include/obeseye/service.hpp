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

// Request handlers behind the HTTP API. Each handler is a pure function of
// (bundle snapshot, request body, configured seed) and returns a status code
// with a JSON body; http_server.hpp only does transport.
//
//   GET  /v1/model/info
//   POST /v1/predict   {"record": {...}}
//   POST /v1/explain   {"record": {...}, "target": "fluid", "method": "shap" | "lime"}
//   POST /v1/whatif    {"base": {...}, "variants": [{"name": "...", "overrides": {...}}]}
//
// Records are flat objects keyed by CSV column name; values may be strings,
// numbers, booleans (yes/no fields) or null (absent).

#ifndef OBESEYE_SERVICE_HPP_
#define OBESEYE_SERVICE_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "json.hpp"
#include "obeseye/bundle.hpp"
#include "obeseye/cohort.hpp"
#include "obeseye/explain.hpp"

namespace obeseye {

inline constexpr std::size_t kMaxWhatIfVariants = 50;

using Json = nlohmann::ordered_json;

struct Response {
  int status = 200;
  Json body;
};

struct ServiceConfig {
  std::uint64_t lime_seed = 0;
  std::size_t lime_perturbations = 5000;
};

namespace internal {

inline Json error_body(int status, const std::string& message, const std::vector<FieldIssue>& issues = {}) {
  Json fields = Json::array();
  for (const auto& i : issues) fields.push_back({{"field", i.field}, {"message", i.message}});
  return {{"error", {{"status", status}, {"message", message}, {"fields", std::move(fields)}}}};
}

inline Response fail(int status, const std::string& message, const std::vector<FieldIssue>& issues = {}) {
  return {status, error_body(status, message, issues)};
}

// A request that cannot be served; carries the HTTP status.
struct RequestError {
  int status;
  std::string message;
  std::vector<FieldIssue> issues;
};

inline FieldMap fields_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw RequestError{400, where + " must be a JSON object", {}};
  FieldMap m;
  std::vector<FieldIssue> issues;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    if (v.is_string()) {
      m[it.key()] = v.get<std::string>();
    } else if (v.is_boolean()) {
      m[it.key()] = v.get<bool>() ? "yes" : "no";
    } else if (v.is_number()) {
      m[it.key()] = format_double(v.get<double>());
    } else if (v.is_null()) {
      m[it.key()] = "";
    } else {
      issues.push_back({it.key(), "expected a string, number, boolean or null"});
    }
  }
  if (!issues.empty()) throw RequestError{422, "invalid " + where, std::move(issues)};
  return m;
}

inline RawPatientRecord record_from_json(const FieldMap& fields, const std::string& where) {
  try {
    return record_from_fields(fields);
  } catch (const ValidationError& e) {
    throw RequestError{422, "invalid " + where, e.issues()};
  }
}

inline void expect_keys(const Json& j, std::initializer_list<std::string_view> required,
                        std::initializer_list<std::string_view> optional = {}) {
  if (!j.is_object()) throw RequestError{400, "request body must be a JSON object", {}};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::find(required.begin(), required.end(), it.key()) != required.end() ||
                       std::find(optional.begin(), optional.end(), it.key()) != optional.end();
    if (!known) throw RequestError{400, "unknown request field \"" + it.key() + "\"", {}};
  }
  for (auto k : required) {
    if (!j.contains(k)) throw RequestError{400, "missing request field \"" + std::string(k) + "\"", {}};
  }
}

}  // namespace internal

class DietService {
 public:
  explicit DietService(ServiceConfig config = {}) : config_(config) {}

  // Replaces the served bundle. Requests already holding a snapshot finish
  // on the previous one.
  void install(std::shared_ptr<const ModelBundle> bundle) {
    std::lock_guard lock(mu_);
    bundle_ = std::move(bundle);
  }

  void load(const std::filesystem::path& path) {
    install(std::make_shared<const ModelBundle>(load_bundle(path)));
  }

  std::shared_ptr<const ModelBundle> snapshot() const {
    std::lock_guard lock(mu_);
    return bundle_;
  }

  const ServiceConfig& config() const { return config_; }

  Response model_info() const {
    return guarded([&](const ModelBundle& b) -> Response {
      Json features = Json::array();
      for (const auto& f : b.schema.features) {
        features.push_back({{"name", f.name}, {"kind", internal::kind_name(f.kind)}, {"labels", f.labels}});
      }
      Json targets = Json::array();
      for (auto t : kAllTargets) {
        const auto& m = b.model(t).model;
        Json params = Json::object();
        for (const auto& [k, v] : m.params) params[k] = v;
        targets.push_back({{"name", target_name(t)},
                           {"unit", target_unit(t)},
                           {"family", family_name(m.family)},
                           {"params", std::move(params)},
                           {"explain_methods", m.family == Family::svm ? Json::array({"lime"})
                                                                      : Json::array({"shap", "lime"})}});
      }
      Json body;
      body["bundle_version"] = b.format_version;
      body["schema"] = {{"version", b.schema.version}, {"sentinel", b.schema.sentinel}, {"features", features}};
      body["targets"] = std::move(targets);
      body["record_fields"] = record_field_names();
      body["limits"] = {{"age", {limits::kMinAge, limits::kMaxAge}},
                        {"glucose_mmol_l", {limits::kGlucoseLow, limits::kGlucoseHigh}},
                        {"creatinine_mg_dl", {{"female", limits::kCreatinineFemale},
                                              {"male", limits::kCreatinineMale}}},
                        {"systolic_bp", {limits::kSystolicLow, limits::kSystolicHigh}},
                        {"diastolic_bp", {limits::kDiastolicLow, limits::kDiastolicHigh}},
                        {"default_fluid_l", {{"female", limits::kDefaultFluidFemale},
                                             {"male", limits::kDefaultFluidMale}}}};
      body["max_whatif_variants"] = kMaxWhatIfVariants;
      body["training"] = {{"seed", b.training.seed},
                          {"provenance", b.training.provenance.describe()},
                          {"n_train", b.training.n_train},
                          {"n_test", b.training.n_test}};
      return {200, std::move(body)};
    });
  }

  Response predict(const Json& request) const {
    return guarded([&](const ModelBundle& b) -> Response {
      internal::expect_keys(request, {"record"});
      const auto record = internal::record_from_json(internal::fields_from_json(request["record"], "record"), "record");
      Json body;
      body["bundle_version"] = b.format_version;
      body["predictions"] = predictions_json(b, record);
      return {200, std::move(body)};
    });
  }

  Response explain(const Json& request) const {
    return guarded([&](const ModelBundle& b) -> Response {
      internal::expect_keys(request, {"record", "target", "method"});
      if (!request["target"].is_string()) throw internal::RequestError{400, "target must be a string", {}};
      if (!request["method"].is_string()) throw internal::RequestError{400, "method must be a string", {}};
      const auto& target_text = request["target"].get_ref<const std::string&>();
      const auto target = parse_target(target_text);
      if (!target) {
        throw internal::RequestError{
            400, "unknown target \"" + target_text + "\"; expected fluid, carbohydrate, protein or fat", {}};
      }
      const auto& method = request["method"].get_ref<const std::string&>();
      if (method != "shap" && method != "lime") {
        throw internal::RequestError{400, "unknown method \"" + method + "\"; expected shap or lime", {}};
      }
      const auto record = internal::record_from_json(internal::fields_from_json(request["record"], "record"), "record");
      const auto sample = encode_record(record, b.schema).features;
      const auto& model = b.model(*target).model;

      Json body;
      if (method == "shap") {
        if (model.family == Family::svm) {
          return internal::fail(409, "SHAP is not available for the SVM model selected for " + target_text +
                                         "; request method \"lime\" instead");
        }
        body = explanation_json(shap_for(model, sample, b.background), sample, b.schema, *target);
      } else {
        LimeConfig cfg;
        cfg.seed = config_.lime_seed;
        cfg.n_perturbations = config_.lime_perturbations;
        const PredictFn fn = [&](std::span<const double> x) { return model.predict(x); };
        body = explanation_json(lime_explain(fn, sample, b.lime_stats, cfg), sample, b.schema, *target);
      }
      body["family"] = family_name(model.family);
      body["bundle_version"] = b.format_version;
      return {200, std::move(body)};
    });
  }

  Response whatif(const Json& request) const {
    return guarded([&](const ModelBundle& b) -> Response {
      internal::expect_keys(request, {"base", "variants"});
      const auto base_fields = internal::fields_from_json(request["base"], "base");
      const auto base = internal::record_from_json(base_fields, "base");
      const auto& variants = request["variants"];
      if (!variants.is_array()) throw internal::RequestError{400, "variants must be an array", {}};
      if (variants.empty() || variants.size() > kMaxWhatIfVariants) {
        throw internal::RequestError{422,
                                     "variant count must be in [1, " + std::to_string(kMaxWhatIfVariants) +
                                         "], got " + std::to_string(variants.size()),
                                     {{"variants", "count out of range"}}};
      }

      const auto base_values = b.predict(base);
      Json out = Json::array();
      auto entry = [&](const std::string& name, const std::array<double, 4>& values) {
        Json deltas = Json::object();
        for (auto t : kAllTargets) {
          const auto k = static_cast<std::size_t>(t);
          deltas[std::string(target_name(t))] = values[k] - base_values[k];
        }
        out.push_back({{"name", name}, {"predictions", predictions_json(b, values)}, {"deltas", std::move(deltas)}});
      };
      entry("base", base_values);

      for (std::size_t i = 0; i < variants.size(); ++i) {
        const std::string where = "variants[" + std::to_string(i) + "]";
        const auto& v = variants[i];
        if (!v.is_object()) throw internal::RequestError{400, where + " must be an object", {}};
        for (auto it = v.begin(); it != v.end(); ++it) {
          if (it.key() != "name" && it.key() != "overrides") {
            throw internal::RequestError{400, "unknown field \"" + it.key() + "\" in " + where, {}};
          }
        }
        std::string name = "variant " + std::to_string(i + 1);
        if (v.contains("name")) {
          if (!v["name"].is_string()) throw internal::RequestError{400, where + ".name must be a string", {}};
          name = v["name"].get<std::string>();
        }
        auto fields = base_fields;
        if (v.contains("overrides")) {
          const auto overrides = internal::fields_from_json(v["overrides"], where + ".overrides");
          std::vector<FieldIssue> unknown;
          for (const auto& [key, value] : overrides) {
            if (!is_record_field(key)) unknown.push_back({key, "not a record field"});
            fields[key] = value;
          }
          if (!unknown.empty()) throw internal::RequestError{422, "invalid override in " + where, unknown};
        }
        entry(name, b.predict(internal::record_from_json(fields, where)));
      }

      Json body;
      body["bundle_version"] = b.format_version;
      body["variants"] = std::move(out);
      return {200, std::move(body)};
    });
  }

  // Routes one request. `body` is the raw request text.
  Response handle(std::string_view method, std::string_view path, std::string_view body) const {
    const bool get = method == "GET", post = method == "POST";
    if (path == "/v1/model/info") return get ? model_info() : internal::fail(405, "use GET");
    if (path != "/v1/predict" && path != "/v1/explain" && path != "/v1/whatif") {
      return internal::fail(404, "no such endpoint: " + std::string(path));
    }
    if (!post) return internal::fail(405, "use POST");
    Json request;
    try {
      request = Json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return internal::fail(400, "malformed JSON at byte " + std::to_string(e.byte));
    }
    if (path == "/v1/predict") return predict(request);
    if (path == "/v1/explain") return explain(request);
    return whatif(request);
  }

 private:
  template <typename Fn>
  Response guarded(Fn&& fn) const {
    const auto bundle = snapshot();
    if (!bundle) return internal::fail(503, "no model bundle loaded");
    try {
      return fn(*bundle);
    } catch (const internal::RequestError& e) {
      return internal::fail(e.status, e.message, e.issues);
    } catch (const ValidationError& e) {
      return internal::fail(422, e.what(), e.issues());
    } catch (const std::exception& e) {
      return internal::fail(500, e.what());
    }
  }

  static Json predictions_json(const ModelBundle& b, const std::array<double, 4>& values) {
    Json p = Json::object();
    for (auto t : kAllTargets) {
      p[std::string(target_name(t))] = {{"value", values[static_cast<std::size_t>(t)]},
                                        {"unit", target_unit(t)},
                                        {"family", family_name(b.model(t).model.family)}};
    }
    return p;
  }

  static Json predictions_json(const ModelBundle& b, const RawPatientRecord& r) {
    return predictions_json(b, b.predict(r));
  }

  ServiceConfig config_;
  mutable std::mutex mu_;
  std::shared_ptr<const ModelBundle> bundle_;
};

}  // namespace obeseye

#endif  // OBESEYE_SERVICE_HPP_
