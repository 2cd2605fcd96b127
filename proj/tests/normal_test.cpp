/*
 * Copyright 2026 The eigsgpr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "eigsgpr/normal.hpp"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "eigsgpr/errors.hpp"

namespace eigsgpr {
namespace {

TEST(NormalQuantile, ReferenceValues) {
  EXPECT_NEAR(normal_quantile(0.9), 1.28155156554460081, 1e-12);
  EXPECT_NEAR(normal_quantile(0.95), 1.64485362695147282, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.95996398454005386, 1e-12);
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_NEAR(two_sided_quantile(0.1), 1.64485362695147282, 1e-12);
  EXPECT_NEAR(two_sided_quantile(0.05) / two_sided_quantile(0.1), 1.19157349470213835, 1e-12);
}

TEST(NormalQuantile, InvertsTheCdfAcrossTheRange) {
  for (double p = 1e-12; p < 1.0; p = p < 0.01 ? p * 3.0 : p + 0.01) {
    const double x = normal_quantile(p);
    EXPECT_NEAR(normal_cdf(x), p, 1e-8 * std::min(p, 1.0 - p) + 1e-15) << p;
  }
  EXPECT_NEAR(normal_quantile(1e-10), -normal_quantile(1.0 - 1e-10), 1e-6);
}

TEST(NormalQuantile, RejectsOutOfRange) {
  EXPECT_EQ(normal_quantile(0.0), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(normal_quantile(1.0), std::numeric_limits<double>::infinity());
  EXPECT_THROW(normal_quantile(1.5), ArgumentError);
  EXPECT_THROW(normal_quantile(std::nan("")), ArgumentError);
  EXPECT_THROW(two_sided_quantile(0.0), ArgumentError);
  EXPECT_THROW(two_sided_quantile(1.0), ArgumentError);
}

TEST(NormalDensity, Values) {
  EXPECT_NEAR(normal_pdf(0.0), 0.398942280401432678, 1e-16);
  EXPECT_NEAR(normal_cdf(1.96), 0.975002104851780, 1e-14);
}

}  // namespace
}  // namespace eigsgpr
