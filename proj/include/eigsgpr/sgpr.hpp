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

#ifndef EIGSGPR_SGPR_HPP_
#define EIGSGPR_SGPR_HPP_

#include <cmath>

#include <Eigen/Core>

#include "eigsgpr/errors.hpp"
#include "eigsgpr/gp_full.hpp"
#include "eigsgpr/kernels.hpp"
#include "eigsgpr/normal.hpp"
#include "eigsgpr/spectrum.hpp"

namespace eigsgpr {

/*
 * Sparse variational posterior with the leading m eigenvectors of K_nn as
 * inducing variables. The Titsias optimum then reduces to replacing
 * (K_nn + sigma2 I)^{-1} by its rank-m eigen-truncation, so this is the
 * full-posterior code path with a shorter sum.
 */
inline PosteriorSummary sgpr_posterior_at(const EigenSystem &es, Eigen::Index m, const ResolvedKernel &rk,
                                          const Design &design, const Eigen::Ref<const Eigen::VectorXd> &y,
                                          double sigma2, const Eigen::Ref<const Eigen::VectorXd> &x) {
  return truncated_posterior_at(es, m, rk, design, y, sigma2, x);
}

// r_m(x) = [sum_{j>m} eta_j v_j v_j^T] k_n(x).
inline Eigen::VectorXd rank_gap_vector(const EigenSystem &es, Eigen::Index m, double sigma2,
                                       const Eigen::Ref<const Eigen::VectorXd> &kx) {
  detail::check_sigma2(sigma2);
  detail::check_rank(es, m);
  detail::check_length(es, kx.size(), "kernel vector");
  Eigen::VectorXd r = Eigen::VectorXd::Zero(es.n());
  for (Eigen::Index j = m; j < es.rank(); ++j) {
    const auto v = es.eigenvectors.col(j);
    r += (v.dot(kx) / (sigma2 + es.eigenvalues[j])) * v;
  }
  return r;
}

// Bias, sampling variance and posterior variance of the rank-m posterior mean at a point.
struct FrequentistDecomposition {
  double bias = 0.0;
  double sampling_variance = 0.0;
  double posterior_variance = 0.0;
  Eigen::Index rank = 0;
};

/*
 * Frequentist behaviour of the rank-m posterior mean under y = f0 + eps with
 * eps ~ N(0, sigma2 I). With w = [sum_{k<=m} eta_k v_k v_k^T] k_n(x):
 *
 *   bias              = w^T f0 - f0(x)
 *   sampling_variance = sigma2 ||w||^2
 *
 * and the posterior variance is the rank-m posterior variance at x.
 */
inline FrequentistDecomposition frequentist_decomposition(const EigenSystem &es, Eigen::Index m,
                                                          const ResolvedKernel &rk, const Design &design,
                                                          const Eigen::Ref<const Eigen::VectorXd> &f0_values,
                                                          double sigma2,
                                                          const Eigen::Ref<const Eigen::VectorXd> &x,
                                                          double f0_at_x) {
  detail::check_sigma2(sigma2);
  detail::check_rank(es, m);
  detail::check_length(es, f0_values.size(), "truth vector");
  detail::check_length(es, design.size(), "design");
  const Eigen::VectorXd kx = kernel_vector(rk, design, x);
  const auto V = es.eigenvectors.leftCols(m);
  Eigen::VectorXd proj_k = V.transpose() * kx;
  const double prior_var = prior_variance(rk, x);
  double reduction = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double eta = 1.0 / (sigma2 + es.eigenvalues[j]);
    reduction += eta * proj_k[j] * proj_k[j];
    proj_k[j] *= eta;
  }
  const Eigen::VectorXd weights = V * proj_k;

  FrequentistDecomposition out;
  out.rank = m;
  out.bias = weights.dot(f0_values) - f0_at_x;
  out.sampling_variance = sigma2 * weights.squaredNorm();
  out.posterior_variance = detail::clamp_variance(prior_var - reduction, prior_var);
  return out;
}

struct CredibleInterval {
  double center = 0.0;
  double half_width = 0.0;
  double level = 0.0;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  double length() const { return 2.0 * half_width; }
  bool contains(double value) const { return value >= lower() && value <= upper(); }
};

// Smallest pointwise credible set of probability 1 - delta: mean +- z_{1-delta} sd.
inline CredibleInterval credible_interval(const PosteriorSummary &ps, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ArgumentError("credible_interval: delta must lie in (0, 1)");
  }
  if (!(ps.variance >= 0.0)) {
    throw ArgumentError("credible_interval: posterior variance must be non-negative");
  }
  return CredibleInterval{ps.mean, two_sided_quantile(delta) * std::sqrt(ps.variance), 1.0 - delta};
}

/*
 * KL(SGPR || full posterior) for eigenvector inducing variables:
 *
 *   1/2 [ y^T (sigma^-2 sum_{j>m} mu_j/(mu_j+sigma2) v_j v_j^T) y
 *         + sum_{j>m} log(sigma2/(sigma2+mu_j)) + sigma^-2 sum_{j>m} mu_j ].
 *
 * Each discarded direction contributes a non-negative amount, so the value is
 * zero at m = n and non-increasing in m.
 */
inline double kl_to_full_posterior(const EigenSystem &es, Eigen::Index m,
                                   const Eigen::Ref<const Eigen::VectorXd> &y, double sigma2) {
  detail::check_sigma2(sigma2);
  detail::check_rank(es, m);
  detail::check_length(es, y.size(), "observation vector");
  double total = 0.0;
  for (Eigen::Index j = m; j < es.rank(); ++j) {
    const double mu = es.eigenvalues[j];
    const double ratio = mu / sigma2;
    const double proj = es.eigenvectors.col(j).dot(y);
    // ratio - log1p(ratio) avoids cancellation for small mu
    total += proj * proj * mu / (sigma2 * (mu + sigma2)) + (ratio - std::log1p(ratio));
  }
  return 0.5 * total;
}

}  // namespace eigsgpr

#endif  // EIGSGPR_SGPR_HPP_
