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

#ifndef EIGSGPR_KERNELS_HPP_
#define EIGSGPR_KERNELS_HPP_

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "eigsgpr/errors.hpp"

namespace eigsgpr {

enum class KernelFamily { RescaledBrownianMotion, Matern, SquaredExponential };

inline std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::RescaledBrownianMotion:
      return "rBM";
    case KernelFamily::Matern:
      return "Matern";
    case KernelFamily::SquaredExponential:
      return "SE";
  }
  return "?";
}

/*
 * A prior covariance family before the sample size is known. `gamma` is the
 * prior smoothness; for the rescaled Brownian motion it sets the scaling c_n,
 * for the squared exponential it sets the lengthscale, and for the Matern it
 * is the half-integer smoothness nu.
 */
struct KernelSpec {
  KernelFamily family = KernelFamily::RescaledBrownianMotion;
  double gamma = 0.5;
  std::optional<double> lengthscale_override;
  int dimension = 1;
};

/*
 * A kernel with its sample-size dependent scale resolved. Only one of
 * `c_n` (Brownian motion) and `lengthscale` (Matern / SE) is meaningful,
 * the other is left at zero.
 */
struct ResolvedKernel {
  KernelSpec spec;
  Eigen::Index n = 0;
  double c_n = 0.0;
  double lengthscale = 0.0;
};

enum class DesignKind { RegularGrid1D, UniformRandom, GaussianEquicorrelated, External };

inline std::string_view to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::RegularGrid1D:
      return "grid";
    case DesignKind::UniformRandom:
      return "uniform";
    case DesignKind::GaussianEquicorrelated:
      return "gaussian";
    case DesignKind::External:
      return "external";
  }
  return "?";
}

// Design points stored one per column (d x n).
struct Design {
  Eigen::MatrixXd points;
  DesignKind kind = DesignKind::External;
  double rho = 0.0;

  Eigen::Index size() const { return points.cols(); }
  Eigen::Index dimension() const { return points.rows(); }
};

namespace detail {

inline bool is_half_integer_smoothness(double gamma) {
  for (double nu : {0.5, 1.5, 2.5}) {
    if (std::abs(gamma - nu) < 1e-12) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

inline void validate(const KernelSpec &spec) {
  if (!(spec.dimension >= 1)) {
    throw ConfigurationError("kernel dimension must be a positive integer");
  }
  if (!(spec.gamma > 0.0) || !std::isfinite(spec.gamma)) {
    throw ConfigurationError("kernel gamma must be a finite positive number");
  }
  if (spec.lengthscale_override && !(*spec.lengthscale_override > 0.0)) {
    throw ConfigurationError("lengthscale override must be positive");
  }
  switch (spec.family) {
    case KernelFamily::RescaledBrownianMotion:
      if (spec.gamma > 1.0) {
        throw ConfigurationError("rescaled Brownian motion requires gamma in (0, 1]");
      }
      if (spec.dimension != 1) {
        throw ConfigurationError("rescaled Brownian motion requires dimension 1");
      }
      break;
    case KernelFamily::Matern:
      if (!detail::is_half_integer_smoothness(spec.gamma)) {
        throw ConfigurationError("Matern kernel requires gamma in {0.5, 1.5, 2.5}");
      }
      break;
    case KernelFamily::SquaredExponential:
      break;
  }
}

inline ResolvedKernel resolve_kernel(const KernelSpec &spec, Eigen::Index n) {
  validate(spec);
  if (n < 1) {
    throw ArgumentError("resolve_kernel: sample size must be at least 1");
  }
  ResolvedKernel rk;
  rk.spec = spec;
  rk.n = n;
  const double nd = static_cast<double>(n);
  switch (spec.family) {
    case KernelFamily::RescaledBrownianMotion:
      // exponent vanishes at gamma = 1/2; keep c_n = 1 exact there
      rk.c_n = spec.gamma == 0.5
                   ? 1.0
                   : std::pow(nd + 0.5, (1.0 - 2.0 * spec.gamma) / (1.0 + 2.0 * spec.gamma));
      break;
    case KernelFamily::Matern:
      rk.lengthscale = spec.lengthscale_override.value_or(1.0);
      break;
    case KernelFamily::SquaredExponential: {
      const double d = static_cast<double>(spec.dimension);
      const double exponent = spec.dimension == 1 ? -1.0 / (1.0 + 2.0 * spec.gamma)
                                                  : -1.0 / (d + 2.0 * spec.gamma);
      rk.lengthscale = spec.lengthscale_override.value_or(std::pow(nd, exponent));
      break;
    }
  }
  return rk;
}

// Copy of `rk` with a different Matern/SE lengthscale.
inline ResolvedKernel with_lengthscale(ResolvedKernel rk, double lengthscale) {
  if (rk.spec.family == KernelFamily::RescaledBrownianMotion) {
    throw ConfigurationError("rescaled Brownian motion has no lengthscale");
  }
  if (!(lengthscale > 0.0)) {
    throw ArgumentError("lengthscale must be positive");
  }
  rk.lengthscale = lengthscale;
  return rk;
}

inline double kernel_value(const ResolvedKernel &rk,
                           const Eigen::Ref<const Eigen::VectorXd> &x,
                           const Eigen::Ref<const Eigen::VectorXd> &xp) {
  if (x.size() != xp.size() || x.size() != rk.spec.dimension) {
    throw ArgumentError("kernel_value: point dimension does not match the kernel");
  }
  switch (rk.spec.family) {
    case KernelFamily::RescaledBrownianMotion: {
      const double a = x[0];
      const double b = xp[0];
      if (!(a >= 0.0 && a <= 1.0) || !(b >= 0.0 && b <= 1.0)) {
        std::ostringstream os;
        os << "rescaled Brownian motion is defined on [0, 1], got (" << a << ", " << b << ")";
        throw DomainError(os.str());
      }
      return rk.c_n * std::min(a, b);
    }
    case KernelFamily::Matern: {
      const double s = (x - xp).norm() / rk.lengthscale;
      if (rk.spec.gamma < 1.0) {
        return std::exp(-s);
      }
      if (rk.spec.gamma < 2.0) {
        const double a = std::sqrt(3.0) * s;
        return (1.0 + a) * std::exp(-a);
      }
      const double a = std::sqrt(5.0) * s;
      return (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
    case KernelFamily::SquaredExponential: {
      const double r2 = (x - xp).squaredNorm();
      return std::exp(-0.5 * r2 / (rk.lengthscale * rk.lengthscale));
    }
  }
  return 0.0;
}

// Prior variance k(x, x).
inline double prior_variance(const ResolvedKernel &rk, const Eigen::Ref<const Eigen::VectorXd> &x) {
  return kernel_value(rk, x, x);
}

inline Eigen::MatrixXd kernel_matrix(const ResolvedKernel &rk, const Design &design) {
  const Eigen::Index n = design.size();
  if (n == 0) {
    throw ArgumentError("kernel_matrix: empty design");
  }
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double value = kernel_value(rk, design.points.col(i), design.points.col(j));
      K(i, j) = value;
      K(j, i) = value;
    }
  }
  return K;
}

inline Eigen::VectorXd kernel_vector(const ResolvedKernel &rk, const Design &design,
                                     const Eigen::Ref<const Eigen::VectorXd> &x) {
  Eigen::VectorXd kx(design.size());
  for (Eigen::Index i = 0; i < design.size(); ++i) {
    kx[i] = kernel_value(rk, x, design.points.col(i));
  }
  return kx;
}

// Regularly spaced design x_i = i / (n + 1/2), i = 1..n.
inline Design regular_grid_design(Eigen::Index n) {
  if (n < 1) {
    throw ArgumentError("regular grid needs at least one point");
  }
  Design design;
  design.kind = DesignKind::RegularGrid1D;
  design.points.resize(1, n);
  const double denom = static_cast<double>(n) + 0.5;
  for (Eigen::Index i = 0; i < n; ++i) {
    design.points(0, i) = static_cast<double>(i + 1) / denom;
  }
  return design;
}

}  // namespace eigsgpr

#endif  // EIGSGPR_KERNELS_HPP_
