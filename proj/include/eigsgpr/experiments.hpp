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

#ifndef EIGSGPR_EXPERIMENTS_HPP_
#define EIGSGPR_EXPERIMENTS_HPP_

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "eigsgpr/errors.hpp"
#include "eigsgpr/gp_full.hpp"
#include "eigsgpr/kernels.hpp"
#include "eigsgpr/random.hpp"
#include "eigsgpr/sgpr.hpp"
#include "eigsgpr/spectrum.hpp"
#include "eigsgpr/theory.hpp"

namespace eigsgpr {

// ---------------------------------------------------------------------------
// Truth functions
// ---------------------------------------------------------------------------

enum class TruthFamily { AbsPower, SignedSquare, NormPower };

/*
 * AbsPower:     |x - x0|^alpha            (1-D, alpha-Hoelder at x0)
 * SignedSquare: sign(x - x0) |x - x0|^2   (1-D, x0 = 1/2 in the usual setup)
 * NormPower:    ||x - x0||^alpha          (any dimension)
 *
 * `alpha` is the smoothness used by threshold rules; for SignedSquare it
 * should be 2.
 */
struct Truth {
  TruthFamily family = TruthFamily::AbsPower;
  double alpha = 1.0;
  Eigen::VectorXd center = Eigen::VectorXd::Constant(1, 0.5);
};

inline double truth_value(const Truth &truth, const Eigen::Ref<const Eigen::VectorXd> &x) {
  if (x.size() != truth.center.size()) {
    throw ArgumentError("truth_value: point dimension does not match the truth centre");
  }
  switch (truth.family) {
    case TruthFamily::AbsPower:
      return std::pow(std::abs(x[0] - truth.center[0]), truth.alpha);
    case TruthFamily::SignedSquare: {
      const double t = x[0] - truth.center[0];
      const double sign = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
      return sign * t * t;
    }
    case TruthFamily::NormPower:
      return std::pow((x - truth.center).norm(), truth.alpha);
  }
  return 0.0;
}

inline Eigen::VectorXd truth_values(const Truth &truth, const Design &design) {
  Eigen::VectorXd out(design.size());
  for (Eigen::Index i = 0; i < design.size(); ++i) {
    out[i] = truth_value(truth, design.points.col(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class NoiseKind { Gaussian, Laplace };

struct NoiseModel {
  NoiseKind kind = NoiseKind::Gaussian;
  double sigma = 1.0;  // Gaussian standard deviation; Laplace is always scale 1
};

enum class MRuleKind { Explicit, ThresholdAlphaGamma, ThresholdD, ThresholdLogBelow, ThresholdLogAbove, Full };

struct MRule {
  MRuleKind kind = MRuleKind::ThresholdAlphaGamma;
  Eigen::Index m = 0;  // Explicit only
};

struct DesignConfig {
  DesignKind kind = DesignKind::RegularGrid1D;
  Eigen::Index n = 1000;
  int d = 1;
  double rho = 0.0;
  std::string external_path;
  // Uniform design box; defaults to [0,1] for d = 1 and [-1/2,1/2]^d otherwise.
  std::optional<double> lower;
  std::optional<double> upper;
};

struct ExperimentConfig {
  std::string name;
  KernelSpec kernel;
  DesignConfig design;
  Truth truth;
  NoiseModel noise;
  MRule m_rule;
  double delta = 0.1;
  Eigen::VectorXd query_point;  // empty: 0.5 for d = 1, the origin otherwise
  Eigen::Index replicates = 500;
  std::uint64_t master_seed = 0;
  NoiseBounds noise_bounds;
  std::optional<double> fixed_sigma2;  // bypasses marginal-likelihood estimation
  bool fit_lengthscale = false;        // Matern / SE only
};

inline Eigen::VectorXd query_point_of(const ExperimentConfig &cfg) {
  if (cfg.query_point.size() > 0) {
    return cfg.query_point;
  }
  return cfg.design.d == 1 ? Eigen::VectorXd::Constant(1, 0.5) : Eigen::VectorXd::Zero(cfg.design.d);
}

inline std::pair<double, double> uniform_box(const DesignConfig &design) {
  const double lo = design.lower.value_or(design.d == 1 ? 0.0 : -0.5);
  const double hi = design.upper.value_or(design.d == 1 ? 1.0 : 0.5);
  return {lo, hi};
}

inline void validate(const ExperimentConfig &cfg) {
  validate(cfg.kernel);
  if (cfg.kernel.dimension != cfg.design.d) {
    throw ConfigurationError("kernel dimension and design dimension differ");
  }
  if (cfg.truth.center.size() != cfg.design.d) {
    throw ConfigurationError("truth centre dimension and design dimension differ");
  }
  if (cfg.query_point.size() != 0 && cfg.query_point.size() != cfg.design.d) {
    throw ConfigurationError("query point dimension and design dimension differ");
  }
  if (cfg.design.n < 1) {
    throw ConfigurationError("design size n must be at least 1");
  }
  if (cfg.replicates < 1) {
    throw ArgumentError("number of replicates M must be at least 1");
  }
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw ConfigurationError("delta must lie in (0, 1)");
  }
  if (!(cfg.truth.alpha > 0.0)) {
    throw ConfigurationError("truth smoothness alpha must be positive");
  }
  if ((cfg.truth.family == TruthFamily::AbsPower || cfg.truth.family == TruthFamily::SignedSquare) &&
      cfg.design.d != 1) {
    throw ConfigurationError("AbsPower and SignedSquare truths are one-dimensional");
  }
  if (cfg.noise.kind == NoiseKind::Gaussian && !(cfg.noise.sigma >= 0.0)) {
    throw ConfigurationError("Gaussian noise standard deviation must be non-negative");
  }
  switch (cfg.design.kind) {
    case DesignKind::RegularGrid1D:
      if (cfg.design.d != 1) throw ConfigurationError("regular grid design is one-dimensional");
      break;
    case DesignKind::GaussianEquicorrelated:
      if (!(cfg.design.rho >= 0.0 && cfg.design.rho < 1.0)) {
        throw ConfigurationError("equicorrelation rho must lie in [0, 1)");
      }
      break;
    case DesignKind::UniformRandom: {
      const auto [lo, hi] = uniform_box(cfg.design);
      if (!(lo < hi)) throw ConfigurationError("uniform design needs lower < upper");
      break;
    }
    case DesignKind::External:
      if (cfg.design.external_path.empty()) {
        throw ConfigurationError("external design needs a feature file path");
      }
      break;
  }
  if (cfg.m_rule.kind == MRuleKind::Explicit && cfg.m_rule.m < 1) {
    throw ConfigurationError("explicit m must be at least 1");
  }
  if (cfg.fixed_sigma2 && !(*cfg.fixed_sigma2 > 0.0)) {
    throw ConfigurationError("fixed sigma2 must be positive");
  }
  if (cfg.fit_lengthscale && cfg.kernel.family == KernelFamily::RescaledBrownianMotion) {
    throw ConfigurationError("lengthscale fitting is not available for rescaled Brownian motion");
  }
  if (!(cfg.noise_bounds.lower > 0.0 && cfg.noise_bounds.lower < cfg.noise_bounds.upper)) {
    throw ConfigurationError("noise variance bounds must satisfy 0 < lower < upper");
  }
}

// Number of inducing variables for a rule, clamped to [1, n].
inline Eigen::Index resolve_m(const MRule &rule, Eigen::Index n, double alpha, double gamma, int d) {
  std::int64_t m = 0;
  switch (rule.kind) {
    case MRuleKind::Explicit:
      m = rule.m;
      break;
    case MRuleKind::Full:
      m = n;
      break;
    case MRuleKind::ThresholdAlphaGamma:
      m = theory::inducing_threshold(n, alpha, gamma, d);
      break;
    case MRuleKind::ThresholdD:
      m = theory::modified_threshold(n, gamma, d, theory::LogModifier::None);
      break;
    case MRuleKind::ThresholdLogBelow:
      m = theory::modified_threshold(n, gamma, d, theory::LogModifier::DivideByLogN);
      break;
    case MRuleKind::ThresholdLogAbove:
      m = theory::modified_threshold(n, gamma, d, theory::LogModifier::MultiplyByLogN);
      break;
  }
  return static_cast<Eigen::Index>(std::clamp<std::int64_t>(m, 1, n));
}

// ---------------------------------------------------------------------------
// External features
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline bool parse_double(std::string_view s, double &out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace detail

/*
 * Comma-separated numeric table, one observation per row. A first row with
 * any non-numeric field is treated as a header. Blank lines are skipped.
 * Returns rows x columns.
 */
inline Eigen::MatrixXd parse_feature_table(std::istream &in, const std::string &source = "<stream>") {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_number = 0;
  std::size_t columns = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_number;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (!detail::parse_double(fields[k], values[k])) {
        numeric = false;
        break;
      }
    }
    if (first_content_line) {
      first_content_line = false;
      columns = fields.size();
      if (!numeric) continue;  // header
    }
    std::ostringstream os;
    if (!numeric) {
      os << source << ": row " << line_number << " has a non-numeric field";
      throw IngestionError(os.str());
    }
    if (fields.size() != columns) {
      os << source << ": row " << line_number << " has " << fields.size() << " fields, expected " << columns;
      throw IngestionError(os.str());
    }
    rows.push_back(std::move(values));
  }
  Eigen::MatrixXd table(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < columns; ++k) {
      table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return table;
}

inline Eigen::MatrixXd load_feature_table(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("cannot open feature file '" + path + "'");
  }
  return parse_feature_table(in, path);
}

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

/*
 * Design points for `cfg` from the stream keyed by `seed`. For External
 * designs `features` (rows x columns) may be passed to avoid re-reading the
 * file; n rows are drawn without replacement, the first d columns kept and
 * each column standardised to mean zero and unit sample variance.
 */
inline Design generate_design(const ExperimentConfig &cfg, std::uint64_t seed,
                              const Eigen::MatrixXd *features = nullptr) {
  const Eigen::Index n = cfg.design.n;
  const int d = cfg.design.d;
  Design design;
  design.kind = cfg.design.kind;
  design.rho = cfg.design.rho;
  CounterStream rng(seed);
  switch (cfg.design.kind) {
    case DesignKind::RegularGrid1D:
      return regular_grid_design(n);
    case DesignKind::UniformRandom: {
      const auto [lo, hi] = uniform_box(cfg.design);
      design.points.resize(d, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) {
          design.points(k, i) = rng.uniform(lo, hi);
        }
      }
      return design;
    }
    case DesignKind::GaussianEquicorrelated: {
      const double shared = std::sqrt(cfg.design.rho);
      const double own = std::sqrt(1.0 - cfg.design.rho);
      design.points.resize(d, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z = rng.normal();
        for (int k = 0; k < d; ++k) {
          design.points(k, i) = shared * z + own * rng.normal();
        }
      }
      return design;
    }
    case DesignKind::External: {
      Eigen::MatrixXd loaded;
      if (features == nullptr) {
        loaded = load_feature_table(cfg.design.external_path);
        features = &loaded;
      }
      if (features->rows() < n || features->cols() < d) {
        std::ostringstream os;
        os << cfg.design.external_path << ": need at least " << n << " rows and " << d << " columns, found "
           << features->rows() << " x " << features->cols();
        throw IngestionError(os.str());
      }
      // partial Fisher-Yates over row indices
      std::vector<Eigen::Index> index(static_cast<std::size_t>(features->rows()));
      for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<Eigen::Index>(i);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto remaining = static_cast<std::uint64_t>(features->rows() - i);
        const auto pick = i + static_cast<Eigen::Index>(rng.below(remaining));
        std::swap(index[static_cast<std::size_t>(i)], index[static_cast<std::size_t>(pick)]);
      }
      design.points.resize(d, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) {
          design.points(k, i) = (*features)(index[static_cast<std::size_t>(i)], k);
        }
      }
      for (int k = 0; k < d; ++k) {
        auto row = design.points.row(k);
        const double mean = row.mean();
        row.array() -= mean;
        const double sd = n > 1 ? std::sqrt(row.squaredNorm() / static_cast<double>(n - 1)) : 0.0;
        if (!(sd > 0.0)) {
          std::ostringstream os;
          os << cfg.design.external_path << ": column " << k + 1 << " is constant over the sampled rows";
          throw IngestionError(os.str());
        }
        row /= sd;
      }
      return design;
    }
  }
  return design;
}

// y_i = f0(x_i) + eps_i with noise drawn from the stream keyed by `seed`.
inline Eigen::VectorXd generate_dataset(const Design &design, const Truth &truth, const NoiseModel &noise,
                                        std::uint64_t seed) {
  CounterStream rng(seed);
  Eigen::VectorXd y = truth_values(truth, design);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (noise.kind == NoiseKind::Gaussian) {
      if (noise.sigma > 0.0) y[i] += noise.sigma * rng.normal();
    } else {
      y[i] += rng.laplace();
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Monte-Carlo replication
// ---------------------------------------------------------------------------

struct ReplicateRecord {
  Eigen::Index replicate = 0;
  std::uint64_t seed = 0;
  Eigen::Index m = 0;
  double sigma2 = 0.0;
  bool sigma2_at_boundary = false;
  double lengthscale = 0.0;
  double truth = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  CredibleInterval interval;
  bool covered = false;
  double nlpd_term = 0.0;
  // full posterior at the same point, same data and sigma2
  double full_mean = 0.0;
  double full_variance = 0.0;
};

// -log N(value | mean, variance)
inline double negative_log_density(double value, double mean, double variance) {
  const double r = value - mean;
  return 0.5 * std::log(2.0 * std::numbers::pi * variance) + 0.5 * r * r / variance;
}

inline double sample_sd(const std::vector<double> &values, double mean) {
  if (values.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

struct Sigma2Summary {
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
  Eigen::Index boundary_hits = 0;
};

struct MetricsReport {
  double coverage = 0.0;
  double length_mean = 0.0;
  double length_sd = 0.0;
  double rmse = 0.0;
  double nlpd_mean = 0.0;
  double nlpd_sd = 0.0;
  Eigen::Index m_used = 0;
  Eigen::Index replicates = 0;
  Sigma2Summary sigma2;
};

/*
 * Monte-Carlo estimators over replicate records, folded in index order:
 * coverage = mean of indicators, length = mean interval length,
 * RMSE = sqrt(mean (posterior mean - f0(x0))^2), NLPD = mean of
 * -log N(f0(x0) | mean, variance). Dispersions are sample standard deviations.
 */
inline MetricsReport aggregate(const std::vector<ReplicateRecord> &records) {
  if (records.empty()) {
    throw ArgumentError("aggregate: no replicate records");
  }
  const auto count = static_cast<double>(records.size());
  MetricsReport report;
  report.replicates = static_cast<Eigen::Index>(records.size());
  report.m_used = records.front().m;
  std::vector<double> lengths;
  std::vector<double> nlpds;
  std::vector<double> sigmas;
  Eigen::Index covered = 0;
  double squared_error = 0.0;
  report.sigma2.min = std::numeric_limits<double>::infinity();
  report.sigma2.max = -std::numeric_limits<double>::infinity();
  for (const auto &r : records) {
    covered += r.covered ? 1 : 0;
    lengths.push_back(r.interval.length());
    nlpds.push_back(r.nlpd_term);
    sigmas.push_back(r.sigma2);
    squared_error += (r.mean - r.truth) * (r.mean - r.truth);
    report.sigma2.min = std::min(report.sigma2.min, r.sigma2);
    report.sigma2.max = std::max(report.sigma2.max, r.sigma2);
    report.sigma2.boundary_hits += r.sigma2_at_boundary ? 1 : 0;
  }
  auto mean_of = [&](const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / count;
  };
  report.coverage = static_cast<double>(covered) / count;
  report.length_mean = mean_of(lengths);
  report.length_sd = sample_sd(lengths, report.length_mean);
  report.rmse = std::sqrt(squared_error / count);
  report.nlpd_mean = mean_of(nlpds);
  report.nlpd_sd = sample_sd(nlpds, report.nlpd_mean);
  report.sigma2.mean = mean_of(sigmas);
  report.sigma2.sd = sample_sd(sigmas, report.sigma2.mean);
  return report;
}

/*
 * Shared, immutable state for one configuration: the validated config, the
 * fixed design and its eigensystem when the design does not change between
 * replicates, and loaded external features.
 */
class MonteCarloRunner {
 public:
  explicit MonteCarloRunner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    x0_ = query_point_of(cfg_);
    truth_at_x0_ = truth_value(cfg_.truth, x0_);
    kernel_ = resolve_kernel(cfg_.kernel, cfg_.design.n);
    if (cfg_.design.kind == DesignKind::External) {
      features_ = load_feature_table(cfg_.design.external_path);
    }
    if (design_is_fixed()) {
      fixed_design_ = generate_design(cfg_, derive_stream(cfg_.master_seed, 0, stream_tag::kDesign), &features_);
      if (!cfg_.fit_lengthscale) {
        fixed_spectrum_ = eigensystem_for(kernel_, *fixed_design_);
      }
    }
    m_ = resolve_m(cfg_.m_rule, cfg_.design.n, cfg_.truth.alpha, cfg_.kernel.gamma, cfg_.design.d);
  }

  const ExperimentConfig &config() const { return cfg_; }
  Eigen::Index m() const { return m_; }
  const Eigen::VectorXd &query_point() const { return x0_; }

  // Grid and external designs are drawn once per configuration.
  bool design_is_fixed() const {
    return cfg_.design.kind == DesignKind::RegularGrid1D || cfg_.design.kind == DesignKind::External;
  }

  std::uint64_t replicate_seed(Eigen::Index j) const {
    return derive_stream(cfg_.master_seed, static_cast<std::uint64_t>(j));
  }

  // Design and data of replicate j.
  std::pair<Design, Eigen::VectorXd> replicate_data(Eigen::Index j) const {
    const std::uint64_t seed = replicate_seed(j);
    Design design = design_is_fixed() ? *fixed_design_
                                      : generate_design(cfg_, derive_stream(seed, 0, stream_tag::kDesign), &features_);
    Eigen::VectorXd y = generate_dataset(design, cfg_.truth, cfg_.noise, derive_stream(seed, 0, stream_tag::kNoise));
    return {std::move(design), std::move(y)};
  }

  /*
   * One replicate: data -> eigensystem -> sigma2 -> rank-m posterior at x0 ->
   * credible interval -> coverage indicator and NLPD term.
   */
  ReplicateRecord run_replicate(Eigen::Index j) const {
    if (j < 0 || j >= cfg_.replicates) {
      throw ArgumentError("run_replicate: replicate index out of range");
    }
    ReplicateRecord record;
    record.replicate = j;
    record.seed = replicate_seed(j);
    record.truth = truth_at_x0_;
    record.m = m_;

    auto [design, y] = replicate_data(j);
    ResolvedKernel rk = kernel_;
    std::optional<EigenSystem> local;
    const EigenSystem *es = fixed_spectrum_ ? &*fixed_spectrum_ : nullptr;

    if (cfg_.fit_lengthscale) {
      const HyperparameterFit fit = fit_noise_and_lengthscale(rk, design, y, cfg_.noise_bounds);
      rk = with_lengthscale(rk, fit.lengthscale);
    }
    if (es == nullptr) {
      local = eigensystem_for(rk, design);
      es = &*local;
    }
    record.lengthscale = rk.lengthscale;

    const Eigen::VectorXd proj_y = es->eigenvectors.transpose() * y;
    if (cfg_.fixed_sigma2) {
      record.sigma2 = *cfg_.fixed_sigma2;
    } else {
      const NoiseEstimate noise = estimate_noise_variance_from_projections(es->eigenvalues, proj_y, cfg_.noise_bounds);
      record.sigma2 = noise.sigma2;
      record.sigma2_at_boundary = noise.at_boundary;
    }

    const Eigen::VectorXd kx = kernel_vector(rk, design, x0_);
    const Eigen::VectorXd proj_k = es->eigenvectors.transpose() * kx;
    const double prior_var = prior_variance(rk, x0_);
    const auto [mean, variance] = spectral_posterior(es->eigenvalues, proj_k, proj_y, prior_var, record.sigma2, m_);
    const auto [full_mean, full_variance] =
        spectral_posterior(es->eigenvalues, proj_k, proj_y, prior_var, record.sigma2, es->rank());
    record.mean = mean;
    record.variance = variance;
    record.full_mean = full_mean;
    record.full_variance = full_variance;
    record.interval = credible_interval(PosteriorSummary{x0_, mean, variance, m_}, cfg_.delta);
    record.covered = record.interval.contains(truth_at_x0_);
    record.nlpd_term = negative_log_density(truth_at_x0_, mean, variance);
    return record;
  }

  /*
   * All replicates, optionally on `workers` threads. Records are stored by
   * index, so the output does not depend on scheduling. A failure aborts the
   * run and reports the lowest failing replicate with its seed.
   */
  std::vector<ReplicateRecord> run_all(unsigned workers = 1) const {
    const Eigen::Index count = cfg_.replicates;
    std::vector<ReplicateRecord> records(static_cast<std::size_t>(count));
    std::atomic<Eigen::Index> next{0};
    std::mutex error_mutex;
    Eigen::Index failed_index = count;
    std::string failure;

    auto work = [&]() {
      while (true) {
        const Eigen::Index j = next.fetch_add(1);
        if (j >= count) return;
        {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (failed_index < count) return;
        }
        try {
          records[static_cast<std::size_t>(j)] = run_replicate(j);
        } catch (const std::exception &e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (j < failed_index) {
            failed_index = j;
            std::ostringstream os;
            os << "replicate " << j << " (seed 0x" << std::hex << std::setw(16) << std::setfill('0')
               << replicate_seed(j) << ") failed: " << e.what();
            failure = os.str();
          }
        }
      }
    };

    workers = std::max(1u, workers);
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto &t : pool) t.join();
    }
    if (failed_index < count) {
      throw std::runtime_error(failure);
    }
    return records;
  }

  MetricsReport run_monte_carlo(unsigned workers = 1) const { return aggregate(run_all(workers)); }

 private:
  ExperimentConfig cfg_;
  Eigen::VectorXd x0_;
  double truth_at_x0_ = 0.0;
  ResolvedKernel kernel_;
  Eigen::MatrixXd features_;
  std::optional<Design> fixed_design_;
  std::optional<EigenSystem> fixed_spectrum_;
  Eigen::Index m_ = 1;
};

inline ReplicateRecord run_replicate(const ExperimentConfig &cfg, Eigen::Index replicate_index) {
  return MonteCarloRunner(cfg).run_replicate(replicate_index);
}

inline MetricsReport run_monte_carlo(const ExperimentConfig &cfg, unsigned workers = 1) {
  if (cfg.replicates < 1) {
    throw ArgumentError("run_monte_carlo: number of replicates M must be at least 1");
  }
  return MonteCarloRunner(cfg).run_monte_carlo(workers);
}

// ---------------------------------------------------------------------------
// Posterior curves over a 1-D grid (input to ribbon plots)
// ---------------------------------------------------------------------------

struct GridRow {
  std::string label;
  Eigen::Index m = 0;
  double x = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double truth = 0.0;
};

/*
 * Posterior mean and (1 - delta) band on `points` equally spaced points of
 * [lo, hi], for each rank in `ranks` (values > n are clamped to n), using the
 * data of replicate 0. Labels are "SGPR m=<m>" or "GP" for the full posterior.
 */
inline std::vector<GridRow> evaluate_grid(const MonteCarloRunner &runner, Eigen::Index points,
                                          const std::vector<Eigen::Index> &ranks, double lo = 0.0,
                                          double hi = 1.0) {
  const ExperimentConfig &cfg = runner.config();
  if (cfg.design.d != 1) {
    throw ConfigurationError("grid output is available for one-dimensional designs only");
  }
  if (points < 2 || !(lo < hi)) {
    throw ArgumentError("evaluate_grid: need at least two points and lo < hi");
  }
  const auto [design, y] = runner.replicate_data(0);
  const ResolvedKernel rk = resolve_kernel(cfg.kernel, cfg.design.n);
  const EigenSystem es = eigensystem_for(rk, design);
  const double sigma2 = cfg.fixed_sigma2 ? *cfg.fixed_sigma2 : estimate_noise_variance(es, y, cfg.noise_bounds).sigma2;
  const Eigen::VectorXd proj_y = es.eigenvectors.transpose() * y;
  const double z = two_sided_quantile(cfg.delta);

  std::vector<GridRow> rows;
  for (Eigen::Index requested : ranks) {
    const Eigen::Index m = std::clamp<Eigen::Index>(requested, 1, es.rank());
    const std::string label = m == es.rank() ? std::string("GP") : "SGPR m=" + std::to_string(m);
    for (Eigen::Index i = 0; i < points; ++i) {
      Eigen::VectorXd x(1);
      x[0] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
      const Eigen::VectorXd proj_k = es.eigenvectors.transpose() * kernel_vector(rk, design, x);
      const auto [mean, variance] = spectral_posterior(es.eigenvalues, proj_k, proj_y, prior_variance(rk, x), sigma2, m);
      const double half = z * std::sqrt(variance);
      rows.push_back(GridRow{label, m, x[0], mean, variance, mean - half, mean + half, truth_value(cfg.truth, x)});
    }
  }
  return rows;
}

}  // namespace eigsgpr

#endif  // EIGSGPR_EXPERIMENTS_HPP_
