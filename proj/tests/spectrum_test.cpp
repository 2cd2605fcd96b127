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


#include "eigsgpr/spectrum.hpp"

#include <chrono>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "eigsgpr/errors.hpp"
#include "oracles.hpp"

namespace eigsgpr {
namespace {

ResolvedKernel rbm(double gamma, Eigen::Index n) {
  return resolve_kernel({KernelFamily::RescaledBrownianMotion, gamma, std::nullopt, 1}, n);
}

void expect_sign_convention(const EigenSystem &es) {
  for (Eigen::Index j = 0; j < es.rank(); ++j) {
    const auto v = es.eigenvectors.col(j);
    const double cutoff = 1e-12 * v.norm();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) > cutoff) {
        EXPECT_GT(v[i], 0.0) << "pair " << j;
        break;
      }
    }
  }
}

TEST(ClosedForm, SinglePoint) {
  const auto es = brownian_eigensystem_closed_form(1, 0.5);
  ASSERT_EQ(es.rank(), 1);
  EXPECT_NEAR(es.eigenvalues[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(es.eigenvectors(0, 0), 1.0, 1e-15);
  EXPECT_EQ(es.source, SpectrumSource::ClosedForm);
}

TEST(ClosedForm, TwoPoints) {
  const auto es = brownian_eigensystem_closed_form(2, 0.5);
  EXPECT_NEAR(es.eigenvalues[0], 1.04721359549995794, 1e-14);
  EXPECT_NEAR(es.eigenvalues[1], 0.152786404500042061, 1e-14);
  EXPECT_NEAR(es.eigenvalues.sum(), 1.2, 1e-14);
  EXPECT_NEAR(es.eigenvectors(0, 0), 0.5257311121191336, 1e-12);
  EXPECT_NEAR(es.eigenvectors(1, 0), 0.8506508083520400, 1e-12);
}

TEST(ClosedForm, TraceIdentityAndStrictDecrease) {
  for (Eigen::Index n : {1, 3, 17, 200}) {
    for (double gamma : {0.3, 0.5, 1.0}) {
      const auto es = brownian_eigensystem_closed_form(n, gamma);
      const auto K = kernel_matrix(rbm(gamma, n), regular_grid_design(n));
      EXPECT_NEAR(es.eigenvalues.sum(), K.trace(), 1e-10 * K.trace());
      for (Eigen::Index j = 1; j < n; ++j) EXPECT_LT(es.eigenvalues[j], es.eigenvalues[j - 1]);
    }
  }
}

TEST(ClosedForm, EigenvaluesWithinExplicitBounds) {
  for (Eigen::Index n = 1; n <= 200; n += 13) {
    for (double gamma : {0.3, 0.5, 1.0}) {
      const auto rk = rbm(gamma, n);
      const double half = static_cast<double>(n) + 0.5;
      const double big_n = half / rk.c_n;
      const auto es = brownian_eigensystem_closed_form(n, gamma);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double psi = (static_cast<double>(j) + 0.5) * std::numbers::pi / half;
        const double base = 1.0 / (big_n * psi * psi);
        EXPECT_GE(es.eigenvalues[j], base * (1 - 1e-12));
        EXPECT_LE(es.eigenvalues[j], 6.0 * base);
      }
    }
  }
}

TEST(ClosedForm, OrthonormalAndPartial) {
  const auto es = brownian_eigensystem_closed_form(60, 0.7);
  const Eigen::MatrixXd gram = es.eigenvectors.transpose() * es.eigenvectors;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(60, 60)).cwiseAbs().maxCoeff(), 1e-9);
  const auto part = brownian_eigensystem_closed_form(60, 0.7, 5);
  EXPECT_EQ(part.rank(), 5);
  EXPECT_EQ(part.n(), 60);
  EXPECT_TRUE((part.eigenvalues.array() == es.eigenvalues.head(5).array()).all());
  EXPECT_THROW(brownian_eigensystem_closed_form(60, 0.7, 0), ArgumentError);
  EXPECT_THROW(brownian_eigensystem_closed_form(60, 0.7, 61), ArgumentError);
  expect_sign_convention(es);
}

TEST(Symmetric, Identity) {
  const auto es = symmetric_eigensystem(Eigen::MatrixXd::Identity(3, 3));
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(es.eigenvalues[j], 1.0, 1e-15);
  const Eigen::MatrixXd gram = es.eigenvectors.transpose() * es.eigenvectors;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  expect_sign_convention(es);
}

TEST(Symmetric, DegenerateOrderIsDeterministic) {
  // the tie group is ordered by descending lexicographic order of the vectors
  const auto es = symmetric_eigensystem(Eigen::MatrixXd::Identity(4, 4) * 2.0);
  for (Eigen::Index j = 1; j < 4; ++j) {
    const auto a = es.eigenvectors.col(j - 1);
    const auto b = es.eigenvectors.col(j);
    Eigen::Index i = 0;
    while (i < 4 && a[i] == b[i]) ++i;
    ASSERT_LT(i, 4);
    EXPECT_GT(a[i], b[i]);
  }
  const auto again = symmetric_eigensystem(Eigen::MatrixXd::Identity(4, 4) * 2.0);
  EXPECT_TRUE((again.eigenvectors.array() == es.eigenvectors.array()).all());
}

TEST(Symmetric, Diagonal) {
  Eigen::MatrixXd K = Eigen::Vector3d(3.0, 1.0, 2.0).asDiagonal();
  const auto es = symmetric_eigensystem(K);
  EXPECT_NEAR(es.eigenvalues[0], 3.0, 1e-15);
  EXPECT_NEAR(es.eigenvalues[1], 2.0, 1e-15);
  EXPECT_NEAR(es.eigenvalues[2], 1.0, 1e-15);
  const Eigen::Index expected_axis[] = {0, 2, 1};
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(es.eigenvectors(expected_axis[j], j), 1.0, 1e-15);
    EXPECT_NEAR(es.eigenvectors.col(j).cwiseAbs().sum(), 1.0, 1e-15);
  }
}

TEST(Symmetric, MatchesClosedFormOnBrownianGrid) {
  const Eigen::Index n = 10;
  const auto closed = brownian_eigensystem_closed_form(n, 0.5);
  const auto numeric = symmetric_eigensystem(kernel_matrix(rbm(0.5, n), regular_grid_design(n)));
  EXPECT_EQ(numeric.source, SpectrumSource::Numeric);
  for (Eigen::Index j = 0; j < n; ++j) {
    EXPECT_NEAR(numeric.eigenvalues[j], closed.eigenvalues[j], 1e-8 * closed.eigenvalues[j]);
  }
  EXPECT_LE((numeric.eigenvectors - closed.eigenvectors).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Symmetric, ResidualReconstructionOrthonormalityOnRandomInstances) {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 40; ++t) {
    const auto inst = oracle::random_instance(gen);
    const auto &es = inst.es;
    const double norm = inst.K.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < es.rank(); ++j) {
      const Eigen::VectorXd res = inst.K * es.eigenvectors.col(j) - es.eigenvalues[j] * es.eigenvectors.col(j);
      EXPECT_LE(res.norm(), 1e-8 * inst.K.norm());
      if (j > 0) EXPECT_LE(es.eigenvalues[j], es.eigenvalues[j - 1]);
      EXPECT_GE(es.eigenvalues[j], 0.0);
    }
    const Eigen::MatrixXd rebuilt = es.eigenvectors * es.eigenvalues.asDiagonal() * es.eigenvectors.transpose();
    EXPECT_LE((rebuilt - inst.K).cwiseAbs().maxCoeff(), 1e-8 * norm);
    const Eigen::MatrixXd gram = es.eigenvectors.transpose() * es.eigenvectors;
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(es.rank(), es.rank())).cwiseAbs().maxCoeff(), 1e-9);
    expect_sign_convention(es);
  }
}

TEST(Symmetric, ContractErrors) {
  Eigen::MatrixXd K(2, 2);
  K << 1.0, 0.5, 0.4, 1.0;
  EXPECT_THROW(symmetric_eigensystem(K), ContractViolation);
  K(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(symmetric_eigensystem(K), ContractViolation);
  EXPECT_THROW(symmetric_eigensystem(Eigen::MatrixXd(2, 3)), ArgumentError);
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 0.0, 1.0, 1.0, 0.0;
  EXPECT_THROW(symmetric_eigensystem(indefinite), NumericalError);
}

TEST(Symmetric, TinyNegativeEigenvaluesAreClamped) {
  Eigen::MatrixXd K = Eigen::Vector2d(1.0, -1e-13).asDiagonal();
  const auto es = symmetric_eigensystem(K);
  EXPECT_EQ(es.eigenvalues[1], 0.0);
}

TEST(Truncate, Slices) {
  const auto es = brownian_eigensystem_closed_form(2, 0.5);
  const auto same = truncate(es, 2);
  EXPECT_TRUE((same.eigenvalues.array() == es.eigenvalues.array()).all());
  EXPECT_TRUE((same.eigenvectors.array() == es.eigenvectors.array()).all());
  const auto top = truncate(es, 1);
  ASSERT_EQ(top.rank(), 1);
  EXPECT_NEAR(top.eigenvalues[0], 1.0472136, 1e-7);
  EXPECT_TRUE((top.eigenvectors.col(0).array() == es.eigenvectors.col(0).array()).all());
  EXPECT_THROW(truncate(es, 0), ArgumentError);
  EXPECT_THROW(truncate(es, 3), ArgumentError);
}

TEST(EigensystemFor, PathSelection) {
  const auto rk = rbm(0.5, 20);
  Design grid = regular_grid_design(20);
  EXPECT_EQ(eigensystem_for(rk, grid).source, SpectrumSource::ClosedForm);
  // the same points flagged as another design kind use the dense solver
  Design relabelled = grid;
  relabelled.kind = DesignKind::UniformRandom;
  EXPECT_EQ(eigensystem_for(rk, relabelled).source, SpectrumSource::Numeric);
  const auto se = resolve_kernel({KernelFamily::SquaredExponential, 0.5, std::nullopt, 1}, 20);
  EXPECT_EQ(eigensystem_for(se, grid).source, SpectrumSource::Numeric);
}

TEST(ClosedFormEquivalence, AllSizesAndSmoothnessesQuickly) {
  const auto start = std::chrono::steady_clock::now();
  for (Eigen::Index n : {1, 2, 5, 25, 100}) {
    for (double gamma : {0.3, 0.5, 1.0}) {
      const auto closed = brownian_eigensystem_closed_form(n, gamma);
      const auto numeric = symmetric_eigensystem(kernel_matrix(rbm(gamma, n), regular_grid_design(n)));
      const double ev = ((numeric.eigenvalues - closed.eigenvalues).array() / closed.eigenvalues.array())
                            .abs()
                            .maxCoeff();
      EXPECT_LE(ev, 1e-8) << "n=" << n << " gamma=" << gamma;
      EXPECT_LE((numeric.eigenvectors - closed.eigenvectors).cwiseAbs().maxCoeff(), 1e-6)
          << "n=" << n << " gamma=" << gamma;
    }
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

}  // namespace
}  // namespace eigsgpr
