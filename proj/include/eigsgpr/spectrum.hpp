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

#ifndef EIGSGPR_SPECTRUM_HPP_
#define EIGSGPR_SPECTRUM_HPP_

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "eigsgpr/errors.hpp"
#include "eigsgpr/kernels.hpp"

namespace eigsgpr {

enum class SpectrumSource { ClosedForm, Numeric };

/*
 * Leading eigenpairs of an n x n kernel matrix, eigenvalues descending.
 *
 * `eigenvectors` is n x k with k <= n orthonormal columns; k < n only after
 * `truncate` or when the closed form was asked for fewer pairs. Each column
 * has its first non-negligible component positive.
 */
struct EigenSystem {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  SpectrumSource source = SpectrumSource::Numeric;

  Eigen::Index n() const { return eigenvectors.rows(); }
  Eigen::Index rank() const { return eigenvalues.size(); }
};

namespace detail {

inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double threshold = 1e-12 * v.norm();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > threshold) {
      if (v[i] < 0.0) {
        v = -v;
      }
      return;
    }
  }
}

}  // namespace detail

/*
 * Eigenpairs of K_nn for the rescaled Brownian motion on x_i = i/(n+1/2):
 *
 *   mu_j  = 1 / (2 N (1 - cos psi_j)),  psi_j = (j - 1/2) pi / (n + 1/2),
 *   v_j^l = 2 sin(l psi_j) / sqrt(2n + 1),
 *
 * with N = (n + 1/2) / c_n. Only the first `count` pairs are formed when
 * given, which is O(n count) rather than O(n^2).
 */
inline EigenSystem brownian_eigensystem_closed_form(Eigen::Index n, double gamma,
                                                    std::optional<Eigen::Index> count = std::nullopt) {
  const KernelSpec spec{KernelFamily::RescaledBrownianMotion, gamma, std::nullopt, 1};
  const ResolvedKernel rk = resolve_kernel(spec, n);
  const Eigen::Index k = count.value_or(n);
  if (k < 1 || k > n) {
    throw ArgumentError("brownian_eigensystem_closed_form: count must lie in [1, n]");
  }
  const double half = static_cast<double>(n) + 0.5;
  const double big_n = half / rk.c_n;
  const double scale = 2.0 / std::sqrt(2.0 * static_cast<double>(n) + 1.0);

  EigenSystem es;
  es.source = SpectrumSource::ClosedForm;
  es.eigenvalues.resize(k);
  es.eigenvectors.resize(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double psi = (static_cast<double>(j) + 0.5) * std::numbers::pi / half;
    es.eigenvalues[j] = 1.0 / (2.0 * big_n * (1.0 - std::cos(psi)));
    for (Eigen::Index l = 0; l < n; ++l) {
      es.eigenvectors(l, j) = scale * std::sin(static_cast<double>(l + 1) * psi);
    }
  }
  return es;
}

/*
 * Dense symmetric eigendecomposition (Householder tridiagonalisation + implicit
 * QR via Eigen), reordered to descending eigenvalues and sign-normalised.
 * Eigenvalues within 1e-10 * mu_1 below zero are clamped to zero; anything more
 * negative is reported as a numerical error. Ties (within 1e-12 * |mu_1|) are
 * ordered by descending lexicographic order of the sign-fixed eigenvectors;
 * the eigenvalues themselves stay sorted, so inside a tie group a vector may
 * carry a value that differs from its own by at most the tie width.
 */
inline EigenSystem symmetric_eigensystem(const Eigen::Ref<const Eigen::MatrixXd> &K) {
  if (K.rows() != K.cols() || K.rows() == 0) {
    throw ArgumentError("symmetric_eigensystem: matrix must be square and non-empty");
  }
  if (!K.allFinite()) {
    throw ContractViolation("symmetric_eigensystem: matrix has non-finite entries");
  }
  const double norm = K.cwiseAbs().maxCoeff();
  const double asymmetry = (K - K.transpose()).cwiseAbs().maxCoeff();
  if (asymmetry > 1e-12 * norm) {
    std::ostringstream os;
    os << "symmetric_eigensystem: matrix is not symmetric (max asymmetry " << asymmetry << ")";
    throw ContractViolation(os.str());
  }

  const Eigen::Index n = K.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(K, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric_eigensystem: eigensolver did not converge");
  }
  const Eigen::VectorXd &values = solver.eigenvalues();
  Eigen::MatrixXd vectors = solver.eigenvectors();
  for (Eigen::Index j = 0; j < n; ++j) {
    detail::fix_sign(vectors.col(j));
  }

  // Eigen returns ascending order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::reverse(order.begin(), order.end());

  const double top = values[n - 1];
  const double tie = 1e-12 * std::max(std::abs(top), std::abs(values[0]));
  auto lexicographic_greater = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (vectors(i, a) != vectors(i, b)) {
        return vectors(i, a) > vectors(i, b);
      }
    }
    return false;
  };
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = start + 1;
    while (stop < order.size() && values[order[stop - 1]] - values[order[stop]] <= tie) {
      ++stop;
    }
    if (stop - start > 1) {
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(start),
                order.begin() + static_cast<std::ptrdiff_t>(stop), lexicographic_greater);
    }
    start = stop;
  }

  EigenSystem es;
  es.source = SpectrumSource::Numeric;
  es.eigenvalues.resize(n);
  es.eigenvectors.resize(n, n);
  const double floor = -1e-10 * std::max(top, 0.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    double mu = values[n - 1 - j];
    if (mu < 0.0) {
      if (mu < floor) {
        std::ostringstream os;
        os << "symmetric_eigensystem: eigenvalue " << mu << " is below the tolerated band "
           << floor << "; matrix is not positive semi-definite";
        throw NumericalError(os.str());
      }
      mu = 0.0;
    }
    es.eigenvalues[j] = mu;
    es.eigenvectors.col(j) = vectors.col(src);
  }
  return es;
}

inline EigenSystem truncate(const EigenSystem &es, Eigen::Index m) {
  if (m < 1 || m > es.rank()) {
    std::ostringstream os;
    os << "truncate: m = " << m << " outside [1, " << es.rank() << "]";
    throw ArgumentError(os.str());
  }
  EigenSystem out;
  out.source = es.source;
  out.eigenvalues = es.eigenvalues.head(m);
  out.eigenvectors = es.eigenvectors.leftCols(m);
  return out;
}

/*
 * The closed form is used exactly when the design is the regular 1-D grid and
 * the kernel is the rescaled Brownian motion; every other pairing goes through
 * the dense solver on the assembled kernel matrix.
 */
inline EigenSystem eigensystem_for(const ResolvedKernel &rk, const Design &design) {
  if (design.kind == DesignKind::RegularGrid1D &&
      rk.spec.family == KernelFamily::RescaledBrownianMotion) {
    return brownian_eigensystem_closed_form(design.size(), rk.spec.gamma);
  }
  return symmetric_eigensystem(kernel_matrix(rk, design));
}

}  // namespace eigsgpr

#endif  // EIGSGPR_SPECTRUM_HPP_
