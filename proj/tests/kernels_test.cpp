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


#include "eigsgpr/kernels.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "eigsgpr/errors.hpp"
#include "eigsgpr/spectrum.hpp"

namespace eigsgpr {
namespace {

Eigen::VectorXd pt(double x) { return Eigen::VectorXd::Constant(1, x); }

ResolvedKernel rbm(double gamma, Eigen::Index n) {
  return resolve_kernel({KernelFamily::RescaledBrownianMotion, gamma, std::nullopt, 1}, n);
}

TEST(ResolveKernel, BrownianScalingIsExactlyOneAtHalf) {
  EXPECT_EQ(rbm(0.5, 1000).c_n, 1.0);
  EXPECT_EQ(rbm(0.5, 7).c_n, 1.0);
}

TEST(ResolveKernel, BrownianScalingMatchesHighPrecisionValues) {
  EXPECT_NEAR(rbm(1.0, 1000).c_n, 0.0999833388867293, 1e-15);
  EXPECT_NEAR(rbm(0.3, 1000).c_n, 5.62411604679966, 1e-13);
}

TEST(ResolveKernel, SquaredExponentialLengthscale) {
  const auto rk = resolve_kernel({KernelFamily::SquaredExponential, 0.5, std::nullopt, 1}, 1000);
  EXPECT_NEAR(rk.lengthscale, 0.0316227766016838, 1e-16);
  const auto rk10 = resolve_kernel({KernelFamily::SquaredExponential, 0.5, std::nullopt, 10}, 1000);
  EXPECT_NEAR(rk10.lengthscale, std::pow(1000.0, -1.0 / 11.0), 1e-15);
  const auto over = resolve_kernel({KernelFamily::SquaredExponential, 0.5, 0.2, 1}, 1000);
  EXPECT_EQ(over.lengthscale, 0.2);
}

TEST(ResolveKernel, MaternLengthscaleDefaultsToOne) {
  EXPECT_EQ(resolve_kernel({KernelFamily::Matern, 1.5, std::nullopt, 1}, 50).lengthscale, 1.0);
  EXPECT_EQ(resolve_kernel({KernelFamily::Matern, 1.5, 0.3, 1}, 50).lengthscale, 0.3);
}

TEST(ResolveKernel, ScalingFieldsAreFamilySpecific) {
  const auto b = rbm(0.7, 10);
  EXPECT_GT(b.c_n, 0.0);
  EXPECT_EQ(b.lengthscale, 0.0);
  const auto m = resolve_kernel({KernelFamily::Matern, 0.5, std::nullopt, 1}, 10);
  EXPECT_EQ(m.c_n, 0.0);
  EXPECT_GT(m.lengthscale, 0.0);
}

TEST(ResolveKernel, RejectsInvalidSpecs) {
  EXPECT_THROW(rbm(1.5, 10), ConfigurationError);
  EXPECT_THROW(rbm(0.0, 10), ConfigurationError);
  EXPECT_THROW(rbm(-1.0, 10), ConfigurationError);
  EXPECT_THROW(resolve_kernel({KernelFamily::RescaledBrownianMotion, 0.5, std::nullopt, 2}, 10), ConfigurationError);
  EXPECT_THROW(resolve_kernel({KernelFamily::Matern, 1.0, std::nullopt, 1}, 10), ConfigurationError);
  EXPECT_THROW(resolve_kernel({KernelFamily::SquaredExponential, 0.5, -1.0, 1}, 10), ConfigurationError);
  EXPECT_THROW(rbm(0.5, 0), ArgumentError);
  try {
    resolve_kernel({KernelFamily::Matern, 2.0, std::nullopt, 1}, 10);
    FAIL();
  } catch (const ConfigurationError &e) {
    EXPECT_NE(std::string(e.what()).find("0.5, 1.5, 2.5"), std::string::npos);
  }
}

TEST(KernelValue, Examples) {
  EXPECT_EQ(kernel_value(rbm(0.5, 10), pt(0.3), pt(0.7)), 0.3);
  const auto mat = resolve_kernel({KernelFamily::Matern, 0.5, 1.0, 1}, 10);
  EXPECT_NEAR(kernel_value(mat, pt(0.0), pt(1.0)), 0.367879441171442, 1e-15);
  const auto se = resolve_kernel({KernelFamily::SquaredExponential, 0.5, 1.0, 1}, 10);
  EXPECT_EQ(kernel_value(se, pt(0.123), pt(0.123)), 1.0);
}

TEST(KernelValue, MaternClosedForms) {
  const double r = 0.7;
  const double l = 0.4;
  const auto m32 = resolve_kernel({KernelFamily::Matern, 1.5, l, 1}, 10);
  const auto m52 = resolve_kernel({KernelFamily::Matern, 2.5, l, 1}, 10);
  const double a3 = std::sqrt(3.0) * r / l;
  const double a5 = std::sqrt(5.0) * r / l;
  EXPECT_NEAR(kernel_value(m32, pt(0.1), pt(0.1 + r)), (1 + a3) * std::exp(-a3), 1e-15);
  EXPECT_NEAR(kernel_value(m52, pt(0.1), pt(0.1 + r)),
              (1 + a5 + 5 * r * r / (3 * l * l)) * std::exp(-a5), 1e-15);
}

TEST(KernelValue, BrownianOutsideUnitIntervalIsDomainError) {
  EXPECT_THROW(kernel_value(rbm(0.5, 10), pt(-0.1), pt(0.5)), DomainError);
  EXPECT_THROW(kernel_value(rbm(0.5, 10), pt(0.5), pt(1.5)), DomainError);
  EXPECT_THROW(kernel_value(rbm(0.5, 10), pt(0.5), Eigen::VectorXd::Zero(2)), ArgumentError);
}

TEST(KernelValue, SymmetricOnSampledPairs) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ResolvedKernel kernels[] = {
      rbm(0.3, 100), resolve_kernel({KernelFamily::Matern, 2.5, 0.3, 3}, 100),
      resolve_kernel({KernelFamily::SquaredExponential, 1.0, std::nullopt, 3}, 100),
      resolve_kernel({KernelFamily::Matern, 0.5, 0.3, 1}, 100)};
  for (const auto &rk : kernels) {
    const int d = rk.spec.dimension;
    for (int t = 0; t < 200; ++t) {
      Eigen::VectorXd a(d), b(d);
      for (int k = 0; k < d; ++k) {
        a[k] = u(gen);
        b[k] = u(gen);
      }
      EXPECT_EQ(kernel_value(rk, a, b), kernel_value(rk, b, a));
    }
  }
}

TEST(KernelMatrix, BrownianGridExample) {
  const auto K = kernel_matrix(rbm(0.5, 2), regular_grid_design(2));
  EXPECT_DOUBLE_EQ(K(0, 0), 0.4);
  EXPECT_DOUBLE_EQ(K(0, 1), 0.4);
  EXPECT_DOUBLE_EQ(K(1, 0), 0.4);
  EXPECT_DOUBLE_EQ(K(1, 1), 0.8);
  EXPECT_NEAR(K.trace(), 1.2, 1e-15);
}

TEST(KernelMatrix, SinglePoint) {
  Design d;
  d.points = Eigen::MatrixXd::Constant(1, 1, 0.37);
  const auto se = resolve_kernel({KernelFamily::SquaredExponential, 0.5, std::nullopt, 1}, 1);
  const auto K = kernel_matrix(se, d);
  ASSERT_EQ(K.rows(), 1);
  EXPECT_EQ(K(0, 0), 1.0);
  EXPECT_EQ(kernel_matrix(rbm(0.5, 1), d)(0, 0), 0.37);
}

TEST(KernelMatrix, EmptyDesignIsRejected) {
  Design d;
  d.points.resize(1, 0);
  EXPECT_THROW(kernel_matrix(rbm(0.5, 1), d), ArgumentError);
}

TEST(KernelMatrix, BrownianGridIsScaledMinMatrix) {
  for (double gamma : {0.3, 0.5, 1.0}) {
    const Eigen::Index n = 40;
    const auto rk = rbm(gamma, n);
    const auto K = kernel_matrix(rk, regular_grid_design(n));
    const double big_n = (static_cast<double>(n) + 0.5) / rk.c_n;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        EXPECT_NEAR(K(i, j), static_cast<double>(std::min(i, j) + 1) / big_n, 1e-14);
      }
    }
  }
}

TEST(KernelMatrix, SymmetricAndPositiveSemiDefiniteOnRandomDesigns) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(gen() % 49);
    const int d = 1 + static_cast<int>(gen() % 3);
    const double nus[] = {0.5, 1.5, 2.5};
    const ResolvedKernel rk =
        t % 3 == 0 ? rbm(0.2 + 0.8 * u(gen), n)
        : t % 3 == 1 ? resolve_kernel({KernelFamily::Matern, nus[t % 3], 0.5, d}, n)
                     : resolve_kernel({KernelFamily::SquaredExponential, 0.5, std::nullopt, d}, n);
    Design design;
    design.points.resize(rk.spec.dimension, n);
    for (Eigen::Index i = 0; i < design.points.size(); ++i) design.points.data()[i] = u(gen);
    const auto K = kernel_matrix(rk, design);
    EXPECT_TRUE((K.array() == K.transpose().array()).all());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * K.cwiseAbs().maxCoeff());
  }
}

TEST(KernelVector, Examples) {
  const auto rk = rbm(0.5, 2);
  const Design grid = regular_grid_design(2);
  const auto kx = kernel_vector(rk, grid, pt(0.5));
  EXPECT_DOUBLE_EQ(kx[0], 0.4);
  EXPECT_DOUBLE_EQ(kx[1], 0.5);

  const auto K = kernel_matrix(rk, grid);
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_TRUE((kernel_vector(rk, grid, grid.points.col(i)).array() == K.col(i).array()).all());
  }

  Design origin;
  origin.points = Eigen::MatrixXd::Zero(1, 1);
  const auto se = resolve_kernel({KernelFamily::SquaredExponential, 0.5, 1.0, 1}, 1);
  EXPECT_EQ(kernel_vector(se, origin, pt(0.0))[0], 1.0);
}

TEST(RegularGrid, PointsAreIOverNPlusHalf) {
  const Design g = regular_grid_design(2);
  EXPECT_EQ(g.points(0, 0), 0.4);
  EXPECT_EQ(g.points(0, 1), 0.8);
  EXPECT_EQ(g.kind, DesignKind::RegularGrid1D);
  const Design big = regular_grid_design(1000);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    EXPECT_EQ(big.points(0, i), static_cast<double>(i + 1) / 1000.5);
  }
  EXPECT_THROW(regular_grid_design(0), ArgumentError);
}

TEST(WithLengthscale, AppliesToStationaryKernelsOnly) {
  const auto se = resolve_kernel({KernelFamily::SquaredExponential, 0.5, std::nullopt, 1}, 10);
  EXPECT_EQ(with_lengthscale(se, 0.25).lengthscale, 0.25);
  EXPECT_THROW(with_lengthscale(se, 0.0), ArgumentError);
  EXPECT_THROW(with_lengthscale(rbm(0.5, 10), 0.3), ConfigurationError);
}

TEST(ToString, Names) {
  EXPECT_EQ(to_string(KernelFamily::RescaledBrownianMotion), "rBM");
  EXPECT_EQ(to_string(KernelFamily::Matern), "Matern");
  EXPECT_EQ(to_string(KernelFamily::SquaredExponential), "SE");
  EXPECT_EQ(to_string(DesignKind::RegularGrid1D), "grid");
}

}  // namespace
}  // namespace eigsgpr
