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

#include "obeseye/bundle.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bundle_fixture.hpp"
#include "support.hpp"

namespace obeseye {
namespace {

using testing::mixed_bundle;
using testing::trained_bundle;

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("obeseye_bundle_test_" + name + std::string(kBundleExtension));
}

void expect_identical_predictions(const ModelBundle& a, const ModelBundle& b) {
  Rng rng(100);
  for (int i = 0; i < 100; ++i) {
    const auto r = testing::random_record(rng);
    const auto pa = a.predict(r), pb = b.predict(r);
    for (std::size_t t = 0; t < 4; ++t) ASSERT_EQ(pa[t], pb[t]) << "record " << i << " target " << t;
  }
}

TEST(Bundle, TrainedShape) {
  const auto& b = *trained_bundle();
  EXPECT_EQ(b.format_version, "v1");
  EXPECT_EQ(b.training.reports.size(), 4u);
  EXPECT_EQ(b.training.n_train, 116u);
  EXPECT_EQ(b.training.n_test, 30u);
  EXPECT_EQ(b.background.rows(), 100u);
  EXPECT_EQ(b.lime_stats.features.size(), 17u);
  for (Target t : kAllTargets) {
    EXPECT_EQ(b.model(t).target, t);
    EXPECT_EQ(b.model(t).model.family, b.training.reports[static_cast<std::size_t>(t)].selected);
  }
}

TEST(Bundle, FileRoundTripPredictsIdentically) {
  for (const auto& bundle : {trained_bundle(), mixed_bundle()}) {
    const auto path = temp_path("roundtrip");
    save_bundle(*bundle, path);
    const auto back = load_bundle(path);
    std::filesystem::remove(path);
    expect_identical_predictions(*bundle, back);
    for (Target t : kAllTargets) EXPECT_EQ(back.model(t).model, bundle->model(t).model);
    EXPECT_EQ(serialize_bundle(back), serialize_bundle(*bundle));
    EXPECT_EQ(back.background.data(), bundle->background.data());
  }
}

TEST(Bundle, TuningAndReportsSurvive) {
  const auto b = train_bundle(generate_synthetic_cohort(11, 50), 11);
  bool tuned = false;
  for (Target t : kAllTargets) tuned |= b.model(t).tuning.has_value();
  EXPECT_TRUE(tuned);
  const auto back = parse_bundle(serialize_bundle(b));
  for (Target t : kAllTargets) {
    ASSERT_EQ(back.model(t).tuning.has_value(), b.model(t).tuning.has_value());
    if (b.model(t).tuning) {
      EXPECT_EQ(back.model(t).tuning->best, b.model(t).tuning->best);
      EXPECT_EQ(back.model(t).tuning->cells.size(), b.model(t).tuning->cells.size());
    }
    const auto& ra = back.training.reports[static_cast<std::size_t>(t)];
    const auto& rb = b.training.reports[static_cast<std::size_t>(t)];
    EXPECT_EQ(ra.selected, rb.selected);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(ra.rows[k].test.rmse, rb.rows[k].test.rmse);
  }
  EXPECT_EQ(back.training.provenance, b.training.provenance);
}

TEST(Bundle, TruncatedIsCorrupt) {
  const auto text = serialize_bundle(*mixed_bundle());
  const auto cut = text.substr(0, text.size() / 2);
  try {
    parse_bundle(cut);
    FAIL() << "expected BundleCorruptError";
  } catch (const BundleCorruptError& e) {
    ASSERT_TRUE(e.byte_offset().has_value());
    EXPECT_GT(*e.byte_offset(), 0u);
    EXPECT_LE(*e.byte_offset(), cut.size() + 1);
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
  }
  const auto path = temp_path("truncated");
  {
    std::ofstream out(path, std::ios::binary);
    out << cut;
  }
  EXPECT_THROW(load_bundle(path), BundleCorruptError);
  std::filesystem::remove(path);
  EXPECT_THROW(parse_bundle(""), BundleCorruptError);
}

TEST(Bundle, FutureVersionNamed) {
  auto j = bundle_to_json(*mixed_bundle());
  j["format_version"] = "v2";
  j["something_new"] = 1;
  try {
    parse_bundle(j.dump());
    FAIL() << "expected BundleVersionError";
  } catch (const BundleVersionError& e) {
    EXPECT_EQ(e.version(), "v2");
    EXPECT_NE(std::string(e.what()).find("\"v2\""), std::string::npos);
  }
}

TEST(Bundle, UnknownFieldRejected) {
  auto j = bundle_to_json(*mixed_bundle());
  j["models"]["fluid"]["extra"] = true;
  try {
    parse_bundle(j.dump());
    FAIL() << "expected BundleCorruptError";
  } catch (const BundleCorruptError& e) {
    EXPECT_NE(std::string(e.what()).find("extra"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("v1"), std::string::npos);
  }
  auto k = bundle_to_json(*mixed_bundle());
  k["models"].erase("fat");
  EXPECT_THROW(parse_bundle(k.dump()), BundleCorruptError);
}

TEST(Bundle, StructuralDamageRejected) {
  const auto base = bundle_to_json(*mixed_bundle());
  auto bad_link = base;
  // Fat is a DS tree: [feature, threshold, left, right, value, count, impurity].
  bad_link["models"]["fat"]["model"]["tree"]["nodes"][0][2] = 0;
  EXPECT_THROW(parse_bundle(bad_link.dump()), BundleCorruptError);

  auto bad_feature = base;
  bad_feature["models"]["fat"]["model"]["tree"]["nodes"][0][0] = 40;
  EXPECT_THROW(parse_bundle(bad_feature.dump()), BundleCorruptError);

  auto bad_weights = base;
  bad_weights["models"]["fluid"]["model"]["weights"].erase(0);
  EXPECT_THROW(parse_bundle(bad_weights.dump()), BundleCorruptError);

  auto bad_schema = base;
  bad_schema["schema"]["features"][0]["name"] = "sex";
  EXPECT_THROW(parse_bundle(bad_schema.dump()), BundleCorruptError);

  auto bad_number = base;
  bad_number["models"]["fluid"]["model"]["intercept"] = "1.0abc";
  EXPECT_THROW(parse_bundle(bad_number.dump()), BundleCorruptError);
}

TEST(Bundle, NumbersStoredAsDecimalStrings) {
  const auto j = bundle_to_json(*mixed_bundle());
  const auto& svr = j["models"]["fluid"]["model"];
  ASSERT_TRUE(svr["intercept"].is_string());
  EXPECT_EQ(parse_double(svr["intercept"].get<std::string>()), mixed_bundle()->model(Target::fluid).model.predict(
                                                                    std::vector<double>(17, 0.0)));
}

TEST(Bundle, MissingFileIsReported) {
  EXPECT_THROW(load_bundle("/nonexistent/model.obeseye.json"), std::runtime_error);
}

TEST(Bundle, TrainingIsDeterministic) {
  const auto cohort = generate_synthetic_cohort(5, 60);
  const auto a = train_bundle(cohort, 3, TrainOptions{.tune_selected = false});
  const auto b = train_bundle(cohort, 3, TrainOptions{.tune_selected = false, .threads = 3});
  EXPECT_EQ(serialize_bundle(a), serialize_bundle(b));
}

}  // namespace
}  // namespace obeseye
