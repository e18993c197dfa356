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

// Bundles shared by the bundle and service tests. Built once per process.

#ifndef OBESEYE_TESTS_BUNDLE_FIXTURE_HPP_
#define OBESEYE_TESTS_BUNDLE_FIXTURE_HPP_

#include <memory>

#include "obeseye/bundle.hpp"

namespace obeseye::testing {

inline const Cohort& fixture_cohort() {
  static const Cohort cohort = generate_synthetic_cohort(42, 146);
  return cohort;
}

// The pipeline's output for seed 42, without the tuning pass.
inline std::shared_ptr<const ModelBundle> trained_bundle() {
  static const auto bundle = std::make_shared<const ModelBundle>(
      train_bundle(fixture_cohort(), 42, TrainOptions{.tune_selected = false}));
  return bundle;
}

// Same metadata with one model of every serialisable kind:
// fluid SVM, carbohydrate RF, protein LGBM-like, fat DS.
inline std::shared_ptr<const ModelBundle> mixed_bundle() {
  static const auto bundle = [] {
    ModelBundle b = *trained_bundle();
    const auto& cohort = fixture_cohort();
    const auto split = train_test_split(cohort, 42);
    const auto x = cohort.features().select_rows(split.train);
    const std::array<std::pair<Family, ParamMap>, 4> picks = {{
        {Family::svm, {}},
        {Family::rf, {{"n_trees", 20}}},
        {Family::lgbm_like, {}},
        {Family::ds, {{"max_depth", 5}}},
    }};
    for (Target t : kAllTargets) {
      const auto& [family, params] = picks[static_cast<std::size_t>(t)];
      auto& tm = b.models[static_cast<std::size_t>(t)];
      tm.model = fit_family(family, params, x, select(cohort.targets(t), split.train), 42);
      tm.tuning.reset();
    }
    return std::make_shared<const ModelBundle>(std::move(b));
  }();
  return bundle;
}

}  // namespace obeseye::testing

#endif  // OBESEYE_TESTS_BUNDLE_FIXTURE_HPP_
