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

// Patient records, the clinical encoding rules, cohort CSV I/O, and the
// seeded synthetic cohort generator.

#ifndef OBESEYE_COHORT_HPP_
#define OBESEYE_COHORT_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "obeseye/common.hpp"

namespace obeseye {

enum class Gender { female = 0, male = 1 };
enum class GlucoseCategory { low, normal, high };
enum class BpCategory { low = 0, normal = 1, high = 2 };
enum class AgeGroup { young = 0, middle = 1, senior = 2 };

enum class Target { fluid = 0, carbohydrate = 1, protein = 2, fat = 3 };
inline constexpr std::array<Target, 4> kAllTargets = {Target::fluid, Target::carbohydrate,
                                                       Target::protein, Target::fat};

inline std::string_view target_name(Target t) {
  switch (t) {
    case Target::fluid: return "fluid";
    case Target::carbohydrate: return "carbohydrate";
    case Target::protein: return "protein";
    case Target::fat: return "fat";
  }
  return "?";
}

inline std::string_view target_unit(Target t) { return t == Target::fluid ? "L" : "g"; }

inline std::optional<Target> parse_target(std::string_view name) {
  if (name == "fluid") return Target::fluid;
  if (name == "carbohydrate" || name == "carb") return Target::carbohydrate;
  if (name == "protein") return Target::protein;
  if (name == "fat") return Target::fat;
  return std::nullopt;
}

// Clinical thresholds. Published through the service so the UI validates with
// the same constants.
namespace limits {
inline constexpr int kMinAge = 18;
inline constexpr int kMaxAge = 95;
inline constexpr double kGlucoseLow = 3.9;     // mmol/L, below -> Low
inline constexpr double kGlucoseHigh = 5.7;    // mmol/L, above -> High
inline constexpr double kCreatinineFemale = 1.2;  // mg/dL, above -> CKD
inline constexpr double kCreatinineMale = 1.4;
inline constexpr double kDiastolicLow = 60.0;
inline constexpr double kDiastolicHigh = 80.0;
inline constexpr double kSystolicLow = 90.0;
inline constexpr double kSystolicHigh = 120.0;
inline constexpr int kYoungMaxAge = 35;
inline constexpr int kSeniorMinAge = 65;
inline constexpr double kDefaultFluidMale = 2.6;    // L/day without restriction
inline constexpr double kDefaultFluidFemale = 2.0;
inline constexpr double kAbsentSentinel = -1.0;
}  // namespace limits

inline double convert_height(int feet, double inches) {
  if (feet < 0) throw ValidationError("height_ft", "must be >= 0");
  if (!(inches >= 0.0 && inches < 12.0)) throw ValidationError("height_in", "must be in [0, 12)");
  return (feet * 12.0 + inches) * 2.54;
}

inline GlucoseCategory categorize_glucose(double mmol_per_l) {
  if (!(mmol_per_l > 0.0)) throw ValidationError("fasting_glucose", "must be > 0");
  if (mmol_per_l < limits::kGlucoseLow) return GlucoseCategory::low;
  if (mmol_per_l > limits::kGlucoseHigh) return GlucoseCategory::high;
  return GlucoseCategory::normal;
}

inline bool categorize_creatinine(double mg_per_dl, Gender sex) {
  if (!(mg_per_dl > 0.0)) throw ValidationError("serum_creatinine", "must be > 0");
  return mg_per_dl > (sex == Gender::female ? limits::kCreatinineFemale : limits::kCreatinineMale);
}

inline BpCategory categorize_bp(double systolic, double diastolic) {
  if (!(diastolic > 0.0)) throw ValidationError("diastolic_bp", "must be > 0");
  if (!(systolic > diastolic)) throw ValidationError("systolic_bp", "must exceed diastolic_bp");
  if (diastolic < limits::kDiastolicLow || systolic < limits::kSystolicLow) return BpCategory::low;
  if (diastolic <= limits::kDiastolicHigh && systolic <= limits::kSystolicHigh) {
    return BpCategory::normal;
  }
  return BpCategory::high;
}

inline AgeGroup bin_age(int age) {
  if (age < limits::kMinAge || age > limits::kMaxAge) {
    throw ValidationError("age", "must be in [18, 95]");
  }
  if (age <= limits::kYoungMaxAge) return AgeGroup::young;
  if (age < limits::kSeniorMinAge) return AgeGroup::middle;
  return AgeGroup::senior;
}

struct FeetInches {
  int feet = 0;
  double inches = 0.0;
  friend bool operator==(const FeetInches&, const FeetInches&) = default;
};

struct RecordTargets {
  std::optional<double> fluid_l;  // may be omitted when fluid is unrestricted
  double carbohydrate_g = 0.0;
  double protein_g = 0.0;
  double fat_g = 0.0;
  friend bool operator==(const RecordTargets&, const RecordTargets&) = default;
};

// One patient in clinical units.
struct RawPatientRecord {
  Gender gender = Gender::female;
  int age = 0;
  std::variant<double, FeetInches> height = 0.0;  // cm, or feet + inches
  double weight_kg = 0.0;
  double waist_hip_ratio = 0.0;
  std::optional<double> fasting_glucose;   // mmol/L
  std::optional<double> serum_creatinine;  // mg/dL
  bool heart_disease = false;
  double systolic_bp = 0.0;
  double diastolic_bp = 0.0;
  bool ibs = false;
  bool respiratory_illness = false;
  bool thyroid = false;
  bool fluid_restricted = false;
  std::optional<RecordTargets> targets;

  double height_cm() const {
    if (const auto* cm = std::get_if<double>(&height)) return *cm;
    const auto& fi = std::get<FeetInches>(height);
    return convert_height(fi.feet, fi.inches);
  }

  friend bool operator==(const RawPatientRecord&, const RawPatientRecord&) = default;
};

inline std::vector<FieldIssue> validate_record(const RawPatientRecord& r) {
  std::vector<FieldIssue> issues;
  auto fail = [&](std::string field, std::string message) {
    issues.push_back({std::move(field), std::move(message)});
  };
  if (r.age < limits::kMinAge || r.age > limits::kMaxAge) fail("age", "must be in [18, 95]");
  if (const auto* cm = std::get_if<double>(&r.height)) {
    if (!(*cm > 0.0) || !std::isfinite(*cm)) fail("height_cm", "must be > 0");
  } else {
    const auto& fi = std::get<FeetInches>(r.height);
    if (fi.feet < 0) fail("height_ft", "must be >= 0");
    if (!(fi.inches >= 0.0 && fi.inches < 12.0)) fail("height_in", "must be in [0, 12)");
    if (fi.feet == 0 && fi.inches == 0.0) fail("height_ft", "height must be > 0");
  }
  if (!(r.weight_kg > 0.0) || !std::isfinite(r.weight_kg)) fail("weight_kg", "must be > 0");
  if (!(r.waist_hip_ratio > 0.0) || !std::isfinite(r.waist_hip_ratio)) {
    fail("waist_hip_ratio", "must be > 0");
  }
  if (r.fasting_glucose && !(*r.fasting_glucose > 0.0)) fail("fasting_glucose", "must be > 0");
  if (r.serum_creatinine && !(*r.serum_creatinine > 0.0)) fail("serum_creatinine", "must be > 0");
  if (!(r.diastolic_bp > 0.0)) fail("diastolic_bp", "must be > 0");
  if (!(r.systolic_bp > r.diastolic_bp)) fail("systolic_bp", "must exceed diastolic_bp");
  if (r.targets) {
    const auto& t = *r.targets;
    if (t.fluid_l && !(*t.fluid_l > 0.0)) fail("fluid_l", "must be > 0");
    if (!t.fluid_l && r.fluid_restricted) fail("fluid_l", "required when fluid is restricted");
    if (!(t.carbohydrate_g > 0.0)) fail("carbohydrate_g", "must be > 0");
    if (!(t.protein_g > 0.0)) fail("protein_g", "must be > 0");
    if (!(t.fat_g > 0.0)) fail("fat_g", "must be > 0");
  }
  return issues;
}

enum class FeatureKind { continuous, binary, nominal };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::string> labels;  // code i <-> labels[i]; empty for continuous
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// Ordered feature layout of an encoded sample.
struct EncodingSchema {
  std::string version;
  std::vector<FeatureSpec> features;
  double sentinel = limits::kAbsentSentinel;

  std::size_t size() const { return features.size(); }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].name == name) return i;
    }
    throw std::out_of_range("unknown feature: " + std::string(name));
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : features) out.push_back(f.name);
    return out;
  }

  // Label -> numeric code for a categorical slot.
  double code_of(std::size_t feature, std::string_view label) const {
    const auto& labels = features.at(feature).labels;
    for (std::size_t c = 0; c < labels.size(); ++c) {
      if (labels[c] == label) return static_cast<double>(c);
    }
    throw std::out_of_range("feature " + features[feature].name + " has no label " +
                            std::string(label));
  }

  const std::string& label_of(std::size_t feature, double code) const {
    const auto& labels = features.at(feature).labels;
    const double rounded = std::round(code);
    if (rounded != code || rounded < 0 || rounded >= static_cast<double>(labels.size())) {
      throw std::out_of_range("feature " + features[feature].name + " has no code " +
                              format_double(code));
    }
    return labels[static_cast<std::size_t>(rounded)];
  }

  friend bool operator==(const EncodingSchema&, const EncodingSchema&) = default;
};

namespace feature {
inline constexpr std::size_t kGender = 0;
inline constexpr std::size_t kAgeGroup = 1;
inline constexpr std::size_t kHeight = 2;
inline constexpr std::size_t kWeight = 3;
inline constexpr std::size_t kWaistHipRatio = 4;
inline constexpr std::size_t kDm = 5;       // glucose mmol/L, sentinel when normal/absent
inline constexpr std::size_t kDmCat = 6;
inline constexpr std::size_t kCkd = 7;      // creatinine mg/dL, sentinel when no CKD/absent
inline constexpr std::size_t kCkdCat = 8;
inline constexpr std::size_t kHeartDisease = 9;
inline constexpr std::size_t kSystolic = 10;
inline constexpr std::size_t kDiastolic = 11;
inline constexpr std::size_t kBpCat = 12;
inline constexpr std::size_t kIbs = 13;
inline constexpr std::size_t kRti = 14;
inline constexpr std::size_t kThyroid = 15;
inline constexpr std::size_t kFluidRestricted = 16;
inline constexpr std::size_t kCount = 17;
}  // namespace feature

inline const EncodingSchema& schema_v1() {
  static const EncodingSchema schema = [] {
    const std::vector<std::string> no_yes = {"no", "yes"};
    EncodingSchema s;
    s.version = "v1";
    s.features = {
        {"gender", FeatureKind::binary, {"female", "male"}},
        {"age_group", FeatureKind::nominal, {"young", "middle", "senior"}},
        {"height_cm", FeatureKind::continuous, {}},
        {"weight_kg", FeatureKind::continuous, {}},
        {"waist_hip_ratio", FeatureKind::continuous, {}},
        {"dm", FeatureKind::continuous, {}},
        {"dm_cat", FeatureKind::nominal, {"low", "no", "high"}},
        {"ckd", FeatureKind::continuous, {}},
        {"ckd_cat", FeatureKind::binary, no_yes},
        {"heart_disease", FeatureKind::binary, no_yes},
        {"systolic_bp", FeatureKind::continuous, {}},
        {"diastolic_bp", FeatureKind::continuous, {}},
        {"bp_cat", FeatureKind::nominal, {"low", "normal", "high"}},
        {"ibs", FeatureKind::binary, no_yes},
        {"rti", FeatureKind::binary, no_yes},
        {"thyroid", FeatureKind::binary, no_yes},
        {"fluid_restricted", FeatureKind::binary, no_yes},
    };
    return s;
  }();
  return schema;
}

struct EncodedSample {
  std::vector<double> features;
  std::array<double, 4> targets{};  // indexed by Target
  bool has_targets = false;

  double target(Target t) const { return targets[static_cast<std::size_t>(t)]; }
  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;
};

inline double default_fluid(Gender g) {
  return g == Gender::male ? limits::kDefaultFluidMale : limits::kDefaultFluidFemale;
}

inline EncodedSample encode_record(const RawPatientRecord& r,
                                   const EncodingSchema& schema = schema_v1()) {
  if (auto issues = validate_record(r); !issues.empty()) throw ValidationError(std::move(issues));
  if (schema.version != "v1" || schema.size() != feature::kCount) {
    throw std::invalid_argument("unsupported encoding schema " + schema.version);
  }
  const double sentinel = schema.sentinel;
  auto flag = [](bool b) { return b ? 1.0 : 0.0; };

  EncodedSample s;
  s.features.assign(feature::kCount, 0.0);
  auto& f = s.features;
  f[feature::kGender] = r.gender == Gender::male ? 1.0 : 0.0;
  f[feature::kAgeGroup] = static_cast<double>(bin_age(r.age));
  f[feature::kHeight] = r.height_cm();
  f[feature::kWeight] = r.weight_kg;
  f[feature::kWaistHipRatio] = r.waist_hip_ratio;

  const GlucoseCategory dm =
      r.fasting_glucose ? categorize_glucose(*r.fasting_glucose) : GlucoseCategory::normal;
  f[feature::kDm] = dm == GlucoseCategory::normal ? sentinel : *r.fasting_glucose;
  f[feature::kDmCat] = static_cast<double>(dm);

  const bool ckd = r.serum_creatinine && categorize_creatinine(*r.serum_creatinine, r.gender);
  f[feature::kCkd] = ckd ? *r.serum_creatinine : sentinel;
  f[feature::kCkdCat] = flag(ckd);

  f[feature::kHeartDisease] = flag(r.heart_disease);
  f[feature::kSystolic] = r.systolic_bp;
  f[feature::kDiastolic] = r.diastolic_bp;
  f[feature::kBpCat] = static_cast<double>(categorize_bp(r.systolic_bp, r.diastolic_bp));
  f[feature::kIbs] = flag(r.ibs);
  f[feature::kRti] = flag(r.respiratory_illness);
  f[feature::kThyroid] = flag(r.thyroid);
  f[feature::kFluidRestricted] = flag(r.fluid_restricted);

  if (r.targets) {
    const auto& t = *r.targets;
    s.has_targets = true;
    s.targets = {r.fluid_restricted ? *t.fluid_l : default_fluid(r.gender), t.carbohydrate_g,
                 t.protein_g, t.fat_g};
  }
  return s;
}

// Categorical content recovered from an encoded sample.
struct DecodedCategories {
  Gender gender;
  AgeGroup age_group;
  GlucoseCategory dm;
  bool ckd;
  bool heart_disease;
  BpCategory bp;
  bool ibs;
  bool respiratory_illness;
  bool thyroid;
  bool fluid_restricted;
  friend bool operator==(const DecodedCategories&, const DecodedCategories&) = default;
};

inline DecodedCategories categories_of(const RawPatientRecord& r) {
  return {r.gender,
          bin_age(r.age),
          r.fasting_glucose ? categorize_glucose(*r.fasting_glucose) : GlucoseCategory::normal,
          r.serum_creatinine && categorize_creatinine(*r.serum_creatinine, r.gender),
          r.heart_disease,
          categorize_bp(r.systolic_bp, r.diastolic_bp),
          r.ibs,
          r.respiratory_illness,
          r.thyroid,
          r.fluid_restricted};
}

inline DecodedCategories decode_sample(const EncodedSample& s,
                                       const EncodingSchema& schema = schema_v1()) {
  check_dimension(schema.size(), s.features.size());
  const auto& f = s.features;
  auto code = [&](std::size_t slot) {
    schema.label_of(slot, f[slot]);  // throws on undeclared codes
    return static_cast<int>(f[slot]);
  };
  return {static_cast<Gender>(code(feature::kGender)),
          static_cast<AgeGroup>(code(feature::kAgeGroup)),
          static_cast<GlucoseCategory>(code(feature::kDmCat)),
          code(feature::kCkdCat) == 1,
          code(feature::kHeartDisease) == 1,
          static_cast<BpCategory>(code(feature::kBpCat)),
          code(feature::kIbs) == 1,
          code(feature::kRti) == 1,
          code(feature::kThyroid) == 1,
          code(feature::kFluidRestricted) == 1};
}

// ---------------------------------------------------------------------------
// Flat field view shared by the CSV reader and the JSON service API.

inline const std::vector<std::string>& record_field_names() {
  static const std::vector<std::string> names = {
      "gender",          "age",           "height_cm",       "height_ft",
      "height_in",       "weight_kg",     "waist_hip_ratio", "fasting_glucose",
      "serum_creatinine", "heart_disease", "systolic_bp",     "diastolic_bp",
      "ibs",             "respiratory_illness", "thyroid",   "fluid_restricted",
      "fluid_l",         "carbohydrate_g", "protein_g",      "fat_g"};
  return names;
}

inline bool is_record_field(std::string_view name) {
  const auto& names = record_field_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

using FieldMap = std::map<std::string, std::string>;

inline FieldMap record_to_fields(const RawPatientRecord& r) {
  auto yes_no = [](bool b) { return std::string(b ? "yes" : "no"); };
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  FieldMap m;
  m["gender"] = r.gender == Gender::male ? "male" : "female";
  m["age"] = std::to_string(r.age);
  if (const auto* cm = std::get_if<double>(&r.height)) {
    m["height_cm"] = format_double(*cm);
  } else {
    const auto& fi = std::get<FeetInches>(r.height);
    m["height_ft"] = std::to_string(fi.feet);
    m["height_in"] = format_double(fi.inches);
  }
  m["weight_kg"] = format_double(r.weight_kg);
  m["waist_hip_ratio"] = format_double(r.waist_hip_ratio);
  m["fasting_glucose"] = opt(r.fasting_glucose);
  m["serum_creatinine"] = opt(r.serum_creatinine);
  m["heart_disease"] = yes_no(r.heart_disease);
  m["systolic_bp"] = format_double(r.systolic_bp);
  m["diastolic_bp"] = format_double(r.diastolic_bp);
  m["ibs"] = yes_no(r.ibs);
  m["respiratory_illness"] = yes_no(r.respiratory_illness);
  m["thyroid"] = yes_no(r.thyroid);
  m["fluid_restricted"] = yes_no(r.fluid_restricted);
  if (r.targets) {
    m["fluid_l"] = opt(r.targets->fluid_l);
    m["carbohydrate_g"] = format_double(r.targets->carbohydrate_g);
    m["protein_g"] = format_double(r.targets->protein_g);
    m["fat_g"] = format_double(r.targets->fat_g);
  }
  for (const auto& name : record_field_names()) m.try_emplace(name, "");
  return m;
}

// Parses and validates a record. Missing keys and empty values mean "absent".
// Every problem is reported, not only the first.
inline RawPatientRecord record_from_fields(const FieldMap& fields, std::size_t line = 0) {
  std::vector<FieldIssue> issues;
  auto fail = [&](const std::string& field, std::string message) {
    issues.push_back({field, std::move(message), line});
  };
  for (const auto& [key, value] : fields) {
    if (!is_record_field(key)) fail(key, "unknown field");
  }
  auto text = [&](const std::string& key) -> std::string_view {
    auto it = fields.find(key);
    if (it == fields.end()) return {};
    std::string_view v = it->second;
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
    return v;
  };
  auto number = [&](const std::string& key, bool required) -> std::optional<double> {
    const auto v = text(key);
    if (v.empty()) {
      if (required) fail(key, "required");
      return std::nullopt;
    }
    auto d = parse_double(v);
    if (!d) fail(key, "not a number: '" + std::string(v) + "'");
    return d;
  };
  auto boolean = [&](const std::string& key) -> bool {
    const auto v = text(key);
    if (v == "yes" || v == "1" || v == "true") return true;
    if (v == "no" || v == "0" || v == "false") return false;
    fail(key, v.empty() ? std::string("required") : "expected yes/no, got '" + std::string(v) + "'");
    return false;
  };

  RawPatientRecord r;
  const auto g = text("gender");
  if (g == "male" || g == "1") {
    r.gender = Gender::male;
  } else if (g == "female" || g == "0") {
    r.gender = Gender::female;
  } else {
    fail("gender", g.empty() ? std::string("required") : "expected female/male, got '" + std::string(g) + "'");
  }
  if (auto age = number("age", true)) {
    if (*age != std::floor(*age)) {
      fail("age", "must be an integer");
    } else if (*age < limits::kMinAge || *age > limits::kMaxAge) {
      fail("age", "must be in [18, 95]");
    } else {
      r.age = static_cast<int>(*age);
    }
  }
  const bool has_cm = !text("height_cm").empty();
  const bool has_ft = !text("height_ft").empty() || !text("height_in").empty();
  if (has_cm && has_ft) {
    fail("height_cm", "give either height_cm or height_ft/height_in, not both");
  } else if (has_ft) {
    auto feet = number("height_ft", true);
    auto inches = text("height_in").empty() ? std::optional<double>(0.0) : number("height_in", true);
    if (feet && inches) {
      if (*feet != std::floor(*feet)) {
        fail("height_ft", "must be an integer");
      } else {
        r.height = FeetInches{static_cast<int>(*feet), *inches};
      }
    }
  } else if (auto cm = number("height_cm", true)) {
    r.height = *cm;
  }
  if (auto v = number("weight_kg", true)) r.weight_kg = *v;
  if (auto v = number("waist_hip_ratio", true)) r.waist_hip_ratio = *v;
  r.fasting_glucose = number("fasting_glucose", false);
  r.serum_creatinine = number("serum_creatinine", false);
  r.heart_disease = boolean("heart_disease");
  if (auto v = number("systolic_bp", true)) r.systolic_bp = *v;
  if (auto v = number("diastolic_bp", true)) r.diastolic_bp = *v;
  r.ibs = boolean("ibs");
  r.respiratory_illness = boolean("respiratory_illness");
  r.thyroid = boolean("thyroid");
  r.fluid_restricted = boolean("fluid_restricted");

  const bool any_target = !text("fluid_l").empty() || !text("carbohydrate_g").empty() ||
                          !text("protein_g").empty() || !text("fat_g").empty();
  if (any_target) {
    RecordTargets t;
    t.fluid_l = number("fluid_l", false);
    if (auto v = number("carbohydrate_g", true)) t.carbohydrate_g = *v;
    if (auto v = number("protein_g", true)) t.protein_g = *v;
    if (auto v = number("fat_g", true)) t.fat_g = *v;
    r.targets = t;
  }

  if (issues.empty()) {
    for (auto issue : validate_record(r)) {
      issue.line = line;
      issues.push_back(std::move(issue));
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return r;
}

// ---------------------------------------------------------------------------

struct Provenance {
  enum class Kind { file, synthetic };
  Kind kind = Kind::file;
  std::string path;
  std::uint64_t seed = 0;

  std::string describe() const {
    return kind == Kind::file ? "file:" + path : "synthetic:" + std::to_string(seed);
  }
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Validated records with their encodings. Immutable once built.
class Cohort {
 public:
  Cohort(std::vector<RawPatientRecord> records, Provenance provenance,
         const EncodingSchema& schema = schema_v1())
      : schema_(schema), records_(std::move(records)), provenance_(std::move(provenance)) {
    if (records_.size() < 2) throw ValidationError("cohort", "needs at least 2 rows");
    samples_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (!records_[i].targets) {
        throw ValidationError("row " + std::to_string(i + 1), "training rows need targets");
      }
      samples_.push_back(encode_record(records_[i], schema_));
    }
  }

  std::size_t size() const { return samples_.size(); }
  const EncodingSchema& schema() const { return schema_; }
  const std::vector<RawPatientRecord>& records() const { return records_; }
  const std::vector<EncodedSample>& samples() const { return samples_; }
  const Provenance& provenance() const { return provenance_; }

  Matrix features() const {
    Matrix m(samples_.size(), schema_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      std::copy(samples_[i].features.begin(), samples_[i].features.end(), m.row(i).begin());
    }
    return m;
  }

  std::vector<double> targets(Target t) const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.target(t));
    return out;
  }

  friend bool operator==(const Cohort& a, const Cohort& b) {
    return a.schema_ == b.schema_ && a.records_ == b.records_ && a.samples_ == b.samples_;
  }

 private:
  EncodingSchema schema_;
  std::vector<RawPatientRecord> records_;
  std::vector<EncodedSample> samples_;
  Provenance provenance_;
};

// ---------------------------------------------------------------------------
// CSV. Line 1 may be the schema comment; the header row follows.

inline constexpr std::string_view kSchemaComment = "# obeseye-schema: v1";

inline void write_cohort(const Cohort& cohort, std::ostream& out) {
  const auto& names = record_field_names();
  out << kSchemaComment << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (const auto& r : cohort.records()) {
    const auto fields = record_to_fields(r);
    for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << fields.at(names[i]);
    out << '\n';
  }
}

inline void write_cohort(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_cohort(cohort, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline Cohort parse_cohort_csv(std::istream& in, const std::string& source) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  std::size_t at = 0;
  auto skip_blank = [&] {
    while (at < lines.size() && lines[at].empty()) ++at;
  };
  skip_blank();
  if (at == lines.size()) throw ValidationError("file", "empty cohort file: " + source);
  if (lines[at].starts_with('#')) {
    if (lines[at] != kSchemaComment) {
      FieldIssue issue{"schema", "unsupported schema line '" + lines[at] + "', expected '" +
                                     std::string(kSchemaComment) + "'", at + 1};
      throw ValidationError(std::vector<FieldIssue>{issue});
    }
    ++at;
    skip_blank();
  }
  if (at == lines.size()) throw ValidationError("file", "no header row: " + source);

  const std::size_t header_line = at + 1;
  const auto header = split_csv_line(lines[at++]);
  std::vector<FieldIssue> issues;
  for (const auto& name : record_field_names()) {
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      issues.push_back({"header", "missing column " + name, header_line});
    }
  }
  for (const auto& name : header) {
    if (!is_record_field(name)) issues.push_back({"header", "unknown column " + name, header_line});
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  std::vector<RawPatientRecord> records;
  for (; at < lines.size(); ++at) {
    if (lines[at].empty()) continue;
    const std::size_t line_no = at + 1;
    const auto cells = split_csv_line(lines[at]);
    if (cells.size() != header.size()) {
      issues.push_back({"row", "expected " + std::to_string(header.size()) + " cells, got " +
                                   std::to_string(cells.size()), line_no});
      continue;
    }
    FieldMap fields;
    for (std::size_t c = 0; c < header.size(); ++c) fields[header[c]] = cells[c];
    try {
      auto record = record_from_fields(fields, line_no);
      if (!record.targets) {
        issues.push_back({"targets", "training rows need targets", line_no});
        continue;
      }
      records.push_back(std::move(record));
    } catch (const ValidationError& e) {
      issues.insert(issues.end(), e.issues().begin(), e.issues().end());
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  if (records.empty()) throw ValidationError("file", "no data rows: " + source);
  return Cohort(std::move(records), Provenance{Provenance::Kind::file, source, 0});
}

inline Cohort parse_cohort_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("path", "cannot open " + path);
  return parse_cohort_csv(in, path);
}

// ---------------------------------------------------------------------------
// Synthetic cohort.
//
// Covariates:
//   gender ~ Bernoulli(0.5), age ~ U{18..95}
//   height ~ N(168, 7) cm male, N(154, 6) female; weight = BMI * h^2, BMI ~ N(28, 5)
//   waist_hip_ratio ~ N(0.88 + 0.06 male, 0.06)
//   glucose: 45% diabetic U(5.8, 16), 5% hypoglycaemic U(2.8, 3.85), else
//            normal U(3.9, 5.7) with 20% of normal readings absent
//   creatinine: 35% CKD U(threshold + 0.05, 5.0), else U(0.5, threshold);
//               20% of non-CKD readings absent
//   heart 25%, ibs/rti/thyroid 15% each, systolic ~ N(125, 18),
//   diastolic ~ 0.62 * systolic + N(0, 6)
//   fluid_restricted: always with CKD, 30% with heart disease, else 3%
//
// Targets (ckd_excess = creatinine - threshold, 0 without CKD):
//   fluid   = default(gender) when unrestricted; with CKD
//             1.5 - 0.3 * ckd_excess + N(0, 0.04) clamped to [0.6, 1.8];
//             restricted without CKD: default(gender) - 0.25
//   carb    = 205 + 12 male - 0.25 (age - 50) - 1.2 (BMI - 28)
//             - 7 (glucose - 4.7) if diabetic, + 12 if hypoglycaemic
//             - 8 CKD + N(0, 5), clamped to [102, 260]
//   protein = 0.8 weight + 8 male - 22 CKD - 0.12 (age - 50) + N(0, 4),
//             clamped to [30, 130]
//   fat     = 58 + 5 male - 9 heart - 0.8 (BMI - 28) - 4 CKD + N(0, 4),
//             clamped to [25, 88]
// Fluid is rounded to 0.01 L, solids to 0.1 g.

namespace synthetic {
inline constexpr double kCarbMin = 102.0, kCarbMax = 260.0;
inline constexpr double kFatMin = 25.0, kFatMax = 88.0;
inline constexpr double kProteinMin = 30.0, kProteinMax = 130.0;
inline constexpr double kFluidCkdMin = 0.6, kFluidCkdMax = 1.8;

inline double round_to(double v, double step) {
  const double scale = std::round(1.0 / step);
  return std::round(v * scale) / scale;
}
inline double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }
}  // namespace synthetic

inline RawPatientRecord synthetic_record(Rng& rng) {
  using synthetic::clamp;
  using synthetic::round_to;
  RawPatientRecord r;
  const bool male = rng.bernoulli(0.5);
  r.gender = male ? Gender::male : Gender::female;
  r.age = rng.integer(limits::kMinAge, limits::kMaxAge);
  const double height = round_to(clamp(male ? rng.normal(168, 7) : rng.normal(154, 6), 135, 200), 0.1);
  r.height = height;
  const double bmi = clamp(rng.normal(28, 5), 17, 48);
  r.weight_kg = round_to(bmi * (height / 100) * (height / 100), 0.1);
  r.waist_hip_ratio = round_to(clamp(rng.normal(male ? 0.94 : 0.88, 0.06), 0.65, 1.3), 0.01);

  const double u = rng.uniform();
  const bool diabetic = u < 0.45;
  const bool hypo = !diabetic && u < 0.50;
  double glucose;
  if (diabetic) {
    glucose = round_to(rng.uniform(5.8, 16.0), 0.1);
  } else if (hypo) {
    glucose = round_to(rng.uniform(2.8, 3.85), 0.1);
  } else {
    glucose = round_to(rng.uniform(3.9, 5.7), 0.1);
  }
  const bool glucose_absent = rng.bernoulli(0.2);
  if (diabetic || hypo || !glucose_absent) r.fasting_glucose = glucose;

  const double threshold = male ? limits::kCreatinineMale : limits::kCreatinineFemale;
  const bool ckd = rng.bernoulli(0.35);
  const double creatinine = ckd ? round_to(rng.uniform(threshold + 0.05, 5.0), 0.01)
                                : round_to(rng.uniform(0.5, threshold), 0.01);
  const bool creatinine_absent = rng.bernoulli(0.2);
  if (ckd || !creatinine_absent) r.serum_creatinine = creatinine;

  r.heart_disease = rng.bernoulli(0.25);
  r.ibs = rng.bernoulli(0.15);
  r.respiratory_illness = rng.bernoulli(0.15);
  r.thyroid = rng.bernoulli(0.15);
  const double systolic = std::round(clamp(rng.normal(125, 18), 80, 200));
  const double diastolic = std::round(clamp(0.62 * systolic + rng.normal(0, 6), 40, systolic - 10));
  r.systolic_bp = systolic;
  r.diastolic_bp = diastolic;
  const double restrict_draw = rng.uniform();
  r.fluid_restricted = ckd || (r.heart_disease ? restrict_draw < 0.30 : restrict_draw < 0.03);

  const double ckd_excess = ckd ? creatinine - threshold : 0.0;
  const double fluid_noise = rng.normal(0, 0.04);
  double fluid = default_fluid(r.gender);
  if (ckd) {
    fluid = clamp(1.5 - 0.3 * ckd_excess + fluid_noise, synthetic::kFluidCkdMin,
                  synthetic::kFluidCkdMax);
  } else if (r.fluid_restricted) {
    fluid -= 0.25;
  }
  const double m = male ? 1.0 : 0.0;
  double carb = 205 + 12 * m - 0.25 * (r.age - 50) - 1.2 * (bmi - 28) - 8 * ckd + rng.normal(0, 5);
  if (diabetic) carb -= 7 * (glucose - 4.7);
  if (hypo) carb += 12;
  const double protein = 0.8 * r.weight_kg + 8 * m - 22 * ckd - 0.12 * (r.age - 50) + rng.normal(0, 4);
  const double fat = 58 + 5 * m - 9 * r.heart_disease - 0.8 * (bmi - 28) - 4 * ckd + rng.normal(0, 4);

  RecordTargets t;
  if (r.fluid_restricted) t.fluid_l = round_to(fluid, 0.01);
  t.carbohydrate_g = round_to(clamp(carb, synthetic::kCarbMin, synthetic::kCarbMax), 0.1);
  t.protein_g = round_to(clamp(protein, synthetic::kProteinMin, synthetic::kProteinMax), 0.1);
  t.fat_g = round_to(clamp(fat, synthetic::kFatMin, synthetic::kFatMax), 0.1);
  r.targets = t;
  return r;
}

inline Cohort generate_synthetic_cohort(std::uint64_t seed, std::size_t n) {
  if (n < 10) throw ValidationError("n", "synthetic cohorts need at least 10 rows");
  // One stream per row: row i is independent of n and of generation order.
  std::vector<RawPatientRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    records.push_back(synthetic_record(rng));
  }
  return Cohort(std::move(records), Provenance{Provenance::Kind::synthetic, "", seed});
}

}  // namespace obeseye

#endif  // OBESEYE_COHORT_HPP_
