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

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "obeseye/common.hpp"

namespace obeseye {
namespace {

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(RngTest, UniformAndBelowStayInRange) {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.below(13), 13U);
    const int k = rng.integer(18, 95);
    EXPECT_GE(k, 18);
    EXPECT_LE(k, 95);
  }
}

TEST(RngTest, NormalMomentsAreSane) {
  Rng rng(11);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(RngTest, ShuffleIsAPermutation) {
  Rng rng(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}

TEST(MixSeedTest, StreamsDiffer) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}

TEST(DecimalTest, FormatParseRoundTripsExactly) {
  Rng rng(5);
  for (int i = 0; i < 5000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.integer(-20, 20));
    const auto parsed = parse_double(format_double(v));
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(*parsed, v);
  }
  for (double v : {0.0, -0.0, 0.1, 1e-300, 1.7976931348623157e308, 5e-324}) {
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
}

TEST(DecimalTest, ParseRejectsJunk) {
  EXPECT_FALSE(parse_double("").has_value());
  EXPECT_FALSE(parse_double("abc").has_value());
  EXPECT_FALSE(parse_double("1.5x").has_value());
  EXPECT_FALSE(parse_double("nan").has_value());
  EXPECT_FALSE(parse_double("inf").has_value());
  EXPECT_EQ(*parse_double(" 2.5 "), 2.5);
  EXPECT_EQ(*parse_double("+3"), 3.0);
}

TEST(MatrixTest, RowsColumnsAndSelection) {
  auto m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2U);
  EXPECT_EQ(m.cols(), 3U);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.column(1), (std::vector<double>{2, 5}));
  const auto s = m.select_rows(std::vector<std::size_t>{1, 1, 0});
  EXPECT_EQ(s.rows(), 3U);
  EXPECT_EQ(s(0, 0), 4.0);
  EXPECT_EQ(s(2, 0), 1.0);
  m.push_row(std::vector<double>{7, 8, 9});
  EXPECT_EQ(m.rows(), 3U);
  EXPECT_THROW(m.push_row(std::vector<double>{1}), std::invalid_argument);
}

TEST(ParallelForTest, VisitsEveryIndexOnceAtAnyThreadCount) {
  for (std::size_t threads : {1U, 2U, 4U, 0U}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelForTest, RethrowsWorkerFailure) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(ErrorsTest, ValidationErrorListsEveryIssue) {
  ValidationError e({{"age", "must be in [18, 95]", 3}, {"weight_kg", "must be > 0", 3}});
  EXPECT_EQ(e.issues().size(), 2U);
  const std::string what = e.what();
  EXPECT_NE(what.find("line 3: age"), std::string::npos);
  EXPECT_NE(what.find("weight_kg"), std::string::npos);
}

}  // namespace
}  // namespace obeseye
