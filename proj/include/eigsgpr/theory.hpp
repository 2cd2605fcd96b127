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

#ifndef EIGSGPR_THEORY_HPP_
#define EIGSGPR_THEORY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "eigsgpr/errors.hpp"
#include "eigsgpr/normal.hpp"

namespace eigsgpr::theory {

enum class Regime { Undersmoothing, CorrectSmoothing, Oversmoothing };

inline std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::Undersmoothing:
      return "Undersmoothing";
    case Regime::CorrectSmoothing:
      return "CorrectSmoothing";
    case Regime::Oversmoothing:
      return "Oversmoothing";
  }
  return "?";
}

struct RegimeReport {
  double alpha = 0.0;
  double gamma = 0.0;
  Regime regime = Regime::CorrectSmoothing;
  std::optional<double> predicted_coverage;
};

namespace detail {

inline void check_positive(double value, const char *name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ArgumentError(std::string(name) + " must be a finite positive number");
  }
}

}  // namespace detail

// n^{d/(d+2 gamma)}: the L2 estimation threshold, unrounded.
inline double estimation_threshold(std::int64_t n, double gamma, int d = 1) {
  detail::check_positive(gamma, "gamma");
  const double dd = static_cast<double>(d);
  return std::pow(static_cast<double>(n), dd / (dd + 2.0 * gamma));
}

/*
 * Number of inducing variables m* after which pointwise SGPR inference matches
 * the full posterior:
 *   d = 1:  n^{(1/(1+2 gamma)) (2+alpha)/(1+alpha)}
 *   d > 1:  n^{d/(d+2 gamma)}
 * rounded to the nearest integer (halves away from zero).
 */
inline std::int64_t inducing_threshold(std::int64_t n, double alpha, double gamma, int d = 1) {
  if (n < 1 || d < 1) {
    throw ArgumentError("inducing_threshold: n and d must be positive");
  }
  detail::check_positive(alpha, "alpha");
  detail::check_positive(gamma, "gamma");
  if (d > 1) {
    return static_cast<std::int64_t>(std::round(estimation_threshold(n, gamma, d)));
  }
  const double exponent = (1.0 / (1.0 + 2.0 * gamma)) * ((2.0 + alpha) / (1.0 + alpha));
  return static_cast<std::int64_t>(std::round(std::pow(static_cast<double>(n), exponent)));
}

enum class LogModifier { None, DivideByLogN, MultiplyByLogN };

// n^{d/(d+2 gamma)} optionally divided or multiplied by log n, rounded.
inline std::int64_t modified_threshold(std::int64_t n, double gamma, int d, LogModifier modifier) {
  if (n < 1 || d < 1) {
    throw ArgumentError("modified_threshold: n and d must be positive");
  }
  double base = estimation_threshold(n, gamma, d);
  const double log_n = std::log(static_cast<double>(n));
  switch (modifier) {
    case LogModifier::None:
      break;
    case LogModifier::DivideByLogN:
      if (n > 1) base /= log_n;
      break;
    case LogModifier::MultiplyByLogN:
      base *= log_n;
      break;
  }
  return static_cast<std::int64_t>(std::round(base));
}

inline Regime classify(double alpha, double gamma) {
  if (alpha > gamma) return Regime::Undersmoothing;
  if (alpha < gamma) return Regime::Oversmoothing;
  return Regime::CorrectSmoothing;
}

/*
 * Limiting coverage of the (1 - delta) pointwise credible set. Only the
 * undersmoothing regime has a universal limit,
 *   p_delta = P(|N(0, 1/2)| <= z_{1-delta}) = 2 Phi(sqrt(2) z_{1-delta}) - 1;
 * the other regimes are labelled without a number.
 */
inline RegimeReport predicted_asymptotic_coverage(double alpha, double gamma, double delta) {
  detail::check_positive(alpha, "alpha");
  detail::check_positive(gamma, "gamma");
  RegimeReport report{alpha, gamma, classify(alpha, gamma), std::nullopt};
  const double z = two_sided_quantile(delta);
  if (report.regime == Regime::Undersmoothing) {
    report.predicted_coverage = 2.0 * normal_cdf(std::numbers::sqrt2 * z) - 1.0;
  }
  return report;
}

// Exponent r in the contraction rate n^{-r} = n^{-min(alpha, gamma)/(1+2 gamma)}.
inline double contraction_exponent(double alpha, double gamma) {
  detail::check_positive(alpha, "alpha");
  detail::check_positive(gamma, "gamma");
  return std::min(alpha, gamma) / (1.0 + 2.0 * gamma);
}

enum class KlRegime { BelowEstimationThreshold, DivergentKLBand, VanishingKLBand };

inline std::string_view to_string(KlRegime regime) {
  switch (regime) {
    case KlRegime::BelowEstimationThreshold:
      return "BelowEstimationThreshold";
    case KlRegime::DivergentKLBand:
      return "DivergentKLBand";
    case KlRegime::VanishingKLBand:
      return "VanishingKLBand";
  }
  return "?";
}

/*
 * Position of m relative to n^{1/(1+2 gamma)} and n^{2/(1+2 gamma)}. Between
 * the two the expected KL between SGPR and posterior diverges. Boundaries are
 * assigned to the upper band.
 */
inline KlRegime kl_regime(std::int64_t n, std::int64_t m, double gamma) {
  if (m < 1 || m > n) {
    throw ArgumentError("kl_regime: m must lie in [1, n]");
  }
  detail::check_positive(gamma, "gamma");
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double lower = std::pow(nd, 1.0 / (1.0 + 2.0 * gamma));
  const double upper = std::pow(nd, 2.0 / (1.0 + 2.0 * gamma));
  if (md < lower) return KlRegime::BelowEstimationThreshold;
  if (md < upper) return KlRegime::DivergentKLBand;
  return KlRegime::VanishingKLBand;
}

}  // namespace eigsgpr::theory

#endif  // EIGSGPR_THEORY_HPP_
