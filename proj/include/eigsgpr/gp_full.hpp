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

#ifndef EIGSGPR_GP_FULL_HPP_
#define EIGSGPR_GP_FULL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "eigsgpr/errors.hpp"
#include "eigsgpr/kernels.hpp"
#include "eigsgpr/spectrum.hpp"

namespace eigsgpr {

// Marginal posterior of f(x). `rank` is n for the full posterior, m for SGPR.
struct PosteriorSummary {
  Eigen::VectorXd point;
  double mean = 0.0;
  double variance = 0.0;
  Eigen::Index rank = 0;
};

namespace detail {

inline void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw ArgumentError("noise variance sigma2 must be a finite positive number");
  }
}

inline void check_rank(const EigenSystem &es, Eigen::Index m) {
  if (m < 1 || m > es.rank()) {
    std::ostringstream os;
    os << "number of inducing variables m = " << m << " outside [1, " << es.rank() << "]";
    throw ArgumentError(os.str());
  }
}

inline void check_length(const EigenSystem &es, Eigen::Index length, const char *what) {
  if (length != es.n()) {
    std::ostringstream os;
    os << what << " has length " << length << ", expected " << es.n();
    throw ArgumentError(os.str());
  }
}

// Round-off within -1e-12 * k(x,x) is clamped; anything below is an error.
inline double clamp_variance(double variance, double prior_var) {
  if (variance >= 0.0) {
    return variance;
  }
  if (variance >= -1e-12 * prior_var) {
    return 0.0;
  }
  std::ostringstream os;
  os << "posterior variance " << variance << " is negative beyond round-off (prior variance "
     << prior_var << ")";
  throw NumericalError(os.str());
}

}  // namespace detail

/*
 * Rank-m posterior from eigenbasis coordinates. With proj_k = V^T k_n(x) and
 * proj_y = V^T y this evaluates
 *
 *   mean     = sum_{j<=m} eta_j proj_k_j proj_y_j
 *   variance = k(x,x) - sum_{j<=m} eta_j proj_k_j^2,   eta_j = 1/(sigma2 + mu_j).
 *
 * m = n is the full posterior, m < n the eigenvector-inducing SGPR.
 */
inline std::pair<double, double> spectral_posterior(const Eigen::Ref<const Eigen::VectorXd> &eigenvalues,
                                                    const Eigen::Ref<const Eigen::VectorXd> &proj_k,
                                                    const Eigen::Ref<const Eigen::VectorXd> &proj_y,
                                                    double prior_var, double sigma2, Eigen::Index m) {
  double mean = 0.0;
  double reduction = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double eta = 1.0 / (sigma2 + eigenvalues[j]);
    mean += eta * proj_k[j] * proj_y[j];
    reduction += eta * proj_k[j] * proj_k[j];
  }
  return {mean, detail::clamp_variance(prior_var - reduction, prior_var)};
}

// Rank-m posterior at x; shared by the full GP (m = rank) and SGPR.
inline PosteriorSummary truncated_posterior_at(const EigenSystem &es, Eigen::Index m,
                                               const ResolvedKernel &rk, const Design &design,
                                               const Eigen::Ref<const Eigen::VectorXd> &y,
                                               double sigma2,
                                               const Eigen::Ref<const Eigen::VectorXd> &x) {
  detail::check_sigma2(sigma2);
  detail::check_rank(es, m);
  detail::check_length(es, y.size(), "observation vector");
  detail::check_length(es, design.size(), "design");
  const Eigen::VectorXd kx = kernel_vector(rk, design, x);
  const auto V = es.eigenvectors.leftCols(m);
  const Eigen::VectorXd proj_k = V.transpose() * kx;
  const Eigen::VectorXd proj_y = V.transpose() * y;
  const auto [mean, variance] =
      spectral_posterior(es.eigenvalues, proj_k, proj_y, prior_variance(rk, x), sigma2, m);
  return PosteriorSummary{x, mean, variance, m};
}

/*
 * Full GP posterior at x, i.e. k_n(x)^T (K_nn + sigma2 I)^{-1} y and the
 * matching variance, with the inverse expanded in the eigenbasis of K_nn.
 * `es` must hold all n eigenpairs.
 */
inline PosteriorSummary full_posterior_at(const EigenSystem &es, const ResolvedKernel &rk,
                                          const Design &design,
                                          const Eigen::Ref<const Eigen::VectorXd> &y, double sigma2,
                                          const Eigen::Ref<const Eigen::VectorXd> &x) {
  if (es.rank() != es.n()) {
    throw ArgumentError("full_posterior_at: eigensystem is truncated");
  }
  return truncated_posterior_at(es, es.rank(), rk, design, y, sigma2, x);
}

namespace detail {

inline double log_marginal_from_projections(const Eigen::Ref<const Eigen::VectorXd> &eigenvalues,
                                            const Eigen::Ref<const Eigen::VectorXd> &proj_y,
                                            double sigma2) {
  const Eigen::Index n = eigenvalues.size();
  double quad = 0.0;
  double logdet = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double s = eigenvalues[j] + sigma2;
    quad += proj_y[j] * proj_y[j] / s;
    logdet += std::log(s);
  }
  return -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

}  // namespace detail

inline double log_marginal_likelihood(const EigenSystem &es, const Eigen::Ref<const Eigen::VectorXd> &y,
                                      double sigma2) {
  detail::check_sigma2(sigma2);
  detail::check_length(es, y.size(), "observation vector");
  if (es.rank() != es.n()) {
    throw ArgumentError("log_marginal_likelihood: eigensystem is truncated");
  }
  const Eigen::VectorXd proj_y = es.eigenvectors.transpose() * y;
  return detail::log_marginal_from_projections(es.eigenvalues, proj_y, sigma2);
}

struct NoiseBounds {
  double lower = 1e-4;
  double upper = 1e2;
};

struct LineSearchResult {
  double argmax = 0.0;
  double value = 0.0;
  bool at_boundary = false;
};

/*
 * Golden-section maximisation of `objective` over [lo, hi] to absolute
 * tolerance `tol`. The end points are compared with the interior optimum at
 * the end; if either wins (or the optimum sits within `tol` of a bound) the
 * result is flagged as a boundary solution.
 */
inline LineSearchResult golden_section_maximize(const std::function<double(double)> &objective,
                                                double lo, double hi, double tol) {
  if (!(lo < hi)) {
    throw ArgumentError("golden_section_maximize: empty bracket");
  }
  auto eval = [&](double t) {
    const double v = objective(t);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "objective is not finite at " << t;
      throw NumericalError(os.str());
    }
    return v;
  };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
  }
  LineSearchResult result;
  result.argmax = fc >= fd ? c : d;
  result.value = std::max(fc, fd);
  const double f_lo = eval(lo);
  const double f_hi = eval(hi);
  if (f_lo >= result.value) {
    result = {lo, f_lo, true};
  } else if (f_hi >= result.value) {
    result = {hi, f_hi, true};
  } else if (result.argmax - lo <= tol || hi - result.argmax <= tol) {
    result.at_boundary = true;
  }
  return result;
}

struct NoiseEstimate {
  double sigma2 = 1.0;
  double log_likelihood = 0.0;
  bool at_boundary = false;
  std::string warning;
};

// Maximum marginal likelihood noise variance given the data in eigen coordinates.
inline NoiseEstimate estimate_noise_variance_from_projections(
    const Eigen::Ref<const Eigen::VectorXd> &eigenvalues, const Eigen::Ref<const Eigen::VectorXd> &proj_y,
    NoiseBounds bounds = {}) {
  if (!(bounds.lower > 0.0) || !(bounds.lower < bounds.upper)) {
    throw ArgumentError("estimate_noise_variance: bounds must satisfy 0 < lo < hi");
  }
  const auto objective = [&](double log_s2) {
    return detail::log_marginal_from_projections(eigenvalues, proj_y, std::exp(log_s2));
  };
  const double log_lo = std::log(bounds.lower);
  const double log_hi = std::log(bounds.upper);
  const LineSearchResult best = golden_section_maximize(objective, log_lo, log_hi, 1e-6);
  NoiseEstimate out;
  out.log_likelihood = best.value;
  out.at_boundary = best.at_boundary;
  if (best.argmax == log_lo) {
    out.sigma2 = bounds.lower;
  } else if (best.argmax == log_hi) {
    out.sigma2 = bounds.upper;
  } else {
    out.sigma2 = std::exp(best.argmax);
  }
  if (out.at_boundary) {
    std::ostringstream os;
    os << "noise variance estimate " << out.sigma2 << " at search bound [" << bounds.lower << ", "
       << bounds.upper << "]";
    out.warning = os.str();
  }
  return out;
}

inline NoiseEstimate estimate_noise_variance(const EigenSystem &es, const Eigen::Ref<const Eigen::VectorXd> &y,
                                             NoiseBounds bounds = {}) {
  detail::check_length(es, y.size(), "observation vector");
  if (es.rank() != es.n()) {
    throw ArgumentError("estimate_noise_variance: eigensystem is truncated");
  }
  const Eigen::VectorXd proj_y = es.eigenvectors.transpose() * y;
  return estimate_noise_variance_from_projections(es.eigenvalues, proj_y, bounds);
}

struct HyperparameterFit {
  double sigma2 = 1.0;
  double lengthscale = 1.0;
  double log_likelihood = 0.0;
  bool at_boundary = false;
};

/*
 * Joint maximum marginal likelihood of (sigma2, lengthscale) for stationary
 * kernels: coordinate-wise golden-section on log scale, `sweeps` passes. The
 * lengthscale step evaluates the likelihood with a Cholesky factorisation.
 */
inline HyperparameterFit fit_noise_and_lengthscale(const ResolvedKernel &rk, const Design &design,
                                                   const Eigen::Ref<const Eigen::VectorXd> &y,
                                                   NoiseBounds noise_bounds = {},
                                                   std::pair<double, double> lengthscale_bounds = {1e-3, 1e2},
                                                   int sweeps = 5) {
  if (rk.spec.family == KernelFamily::RescaledBrownianMotion) {
    throw ConfigurationError("lengthscale fitting applies to Matern and SE kernels only");
  }
  if (!(lengthscale_bounds.first > 0.0 && lengthscale_bounds.first < lengthscale_bounds.second)) {
    throw ArgumentError("fit_noise_and_lengthscale: invalid lengthscale bounds");
  }
  const Eigen::Index n = design.size();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  HyperparameterFit fit;
  fit.lengthscale = std::clamp(rk.lengthscale, lengthscale_bounds.first, lengthscale_bounds.second);

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const ResolvedKernel current = with_lengthscale(rk, fit.lengthscale);
    const EigenSystem es = symmetric_eigensystem(kernel_matrix(current, design));
    const NoiseEstimate noise = estimate_noise_variance(es, y, noise_bounds);
    fit.sigma2 = noise.sigma2;

    const auto objective = [&](double log_ell) {
      const ResolvedKernel trial = with_lengthscale(rk, std::exp(log_ell));
      Eigen::MatrixXd A = kernel_matrix(trial, design);
      A.diagonal().array() += fit.sigma2;
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      if (llt.info() != Eigen::Success) {
        return -std::numeric_limits<double>::infinity();
      }
      const Eigen::VectorXd alpha = llt.solve(y);
      const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      return -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(n) * log2pi;
    };
    const LineSearchResult ell = golden_section_maximize(
        objective, std::log(lengthscale_bounds.first), std::log(lengthscale_bounds.second), 1e-4);
    fit.lengthscale = std::exp(ell.argmax);
    fit.log_likelihood = ell.value;
    fit.at_boundary = noise.at_boundary || ell.at_boundary;
  }
  return fit;
}

}  // namespace eigsgpr

#endif  // EIGSGPR_GP_FULL_HPP_
