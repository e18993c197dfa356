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

// Shared fixtures for the unit tests.

#ifndef OBESEYE_TESTS_SUPPORT_HPP_
#define OBESEYE_TESTS_SUPPORT_HPP_

#include <cmath>
#include <vector>

#include "obeseye/cohort.hpp"
#include "obeseye/common.hpp"

namespace obeseye::testing {

// A valid 50-year-old male with normal readings and targets.
inline RawPatientRecord reference_record() {
  RawPatientRecord r;
  r.gender = Gender::male;
  r.age = 50;
  r.height = 172.0;
  r.weight_kg = 80.0;
  r.waist_hip_ratio = 0.92;
  r.fasting_glucose = 5.0;
  r.serum_creatinine = 1.0;
  r.systolic_bp = 118;
  r.diastolic_bp = 76;
  r.targets = RecordTargets{std::nullopt, 210.0, 70.0, 60.0};
  return r;
}

// Valid records covering absent readings, feet/inch heights and every
// category, without targets.
inline RawPatientRecord random_record(Rng& rng) {
  RawPatientRecord r = synthetic_record(rng);
  r.targets.reset();
  if (rng.bernoulli(0.3)) {
    const double cm = r.height_cm();
    const double total_in = cm / 2.54;
    const int feet = static_cast<int>(total_in / 12.0);
    r.height = FeetInches{feet, std::floor((total_in - feet * 12.0) * 10.0) / 10.0};
  }
  if (rng.bernoulli(0.1)) r.fasting_glucose.reset();
  if (rng.bernoulli(0.1)) r.serum_creatinine.reset();
  return r;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

// Features on a small integer grid so trees find many ties.
inline Matrix random_grid_matrix(Rng& rng, std::size_t rows, std::size_t cols, int levels = 4) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.integer(0, levels - 1);
  }
  return m;
}

}  // namespace obeseye::testing

#endif  // OBESEYE_TESTS_SUPPORT_HPP_
