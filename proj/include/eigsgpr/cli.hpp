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

#ifndef EIGSGPR_CLI_HPP_
#define EIGSGPR_CLI_HPP_

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>

#include "CLI11.hpp"

#include "eigsgpr/config.hpp"
#include "eigsgpr/experiments.hpp"
#include "eigsgpr/theory.hpp"

#ifndef EIGSGPR_VERSION
#define EIGSGPR_VERSION "0.0.0"
#endif

namespace eigsgpr::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeError = 1, kUsageError = 2 };

// Column order of results.csv. Part of the file contract; do not reorder.
inline constexpr const char *kResultsHeader =
    "n,d,alpha,gamma,kernel,design,m,delta,coverage,length_mean,length_sd,rmse,nlpd_mean,nlpd_sd,seed";

inline constexpr const char *kReplicatesHeader =
    "run,replicate,seed,m,sigma2,sigma2_at_boundary,lengthscale,truth,mean,variance,lower,upper,length,covered,"
    "nlpd,full_mean,full_variance";

inline constexpr const char *kGridHeader = "run,label,m,x,mean,variance,lower,upper,truth";

// Shortest round-trip is not needed; 17 significant digits keep files byte-stable.
inline std::string num(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

inline std::string results_row(const ExperimentConfig &cfg, const MetricsReport &report) {
  std::string row;
  row += std::to_string(cfg.design.n) + ",";
  row += std::to_string(cfg.design.d) + ",";
  row += num(cfg.truth.alpha) + ",";
  row += num(cfg.kernel.gamma) + ",";
  row += std::string(to_string(cfg.kernel.family)) + ",";
  row += std::string(to_string(cfg.design.kind)) + ",";
  row += std::to_string(report.m_used) + ",";
  row += num(cfg.delta) + ",";
  row += num(report.coverage) + ",";
  row += num(report.length_mean) + ",";
  row += num(report.length_sd) + ",";
  row += num(report.rmse) + ",";
  row += num(report.nlpd_mean) + ",";
  row += num(report.nlpd_sd) + ",";
  row += std::to_string(cfg.master_seed);
  return row;
}

inline std::string replicate_row(std::size_t run, const ReplicateRecord &r) {
  std::string row;
  row += std::to_string(run) + ",";
  row += std::to_string(r.replicate) + ",";
  row += std::to_string(r.seed) + ",";
  row += std::to_string(r.m) + ",";
  row += num(r.sigma2) + ",";
  row += std::string(r.sigma2_at_boundary ? "1" : "0") + ",";
  row += num(r.lengthscale) + ",";
  row += num(r.truth) + ",";
  row += num(r.mean) + ",";
  row += num(r.variance) + ",";
  row += num(r.interval.lower()) + ",";
  row += num(r.interval.upper()) + ",";
  row += num(r.interval.length()) + ",";
  row += std::string(r.covered ? "1" : "0") + ",";
  row += num(r.nlpd_term) + ",";
  row += num(r.full_mean) + ",";
  row += num(r.full_variance);
  return row;
}

inline std::string grid_row(std::size_t run, const GridRow &g) {
  return std::to_string(run) + "," + g.label + "," + std::to_string(g.m) + "," + num(g.x) + "," + num(g.mean) + "," +
         num(g.variance) + "," + num(g.lower) + "," + num(g.upper) + "," + num(g.truth);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

inline std::optional<std::uint64_t> seed_from_environment() {
  const char *value = std::getenv("SGPR_SEED");
  if (value == nullptr || *value == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto seed = std::stoull(value, &used, 0);
    if (used != std::string(value).size()) throw std::invalid_argument("trailing characters");
    return seed;
  } catch (const std::exception &) {
    throw config::ConfigError(std::string("SGPR_SEED='") + value + "' is not an unsigned integer");
  }
}

struct RunOptions {
  std::string config_path;
  std::string output_dir = "results";
  std::vector<std::string> overrides;
  unsigned workers = 0;  // 0: available parallelism
  std::optional<double> fixed_sigma2;
};

inline std::vector<config::RunSpec> load_runs(const std::string &path, std::vector<std::string> overrides,
                                              std::optional<double> fixed_sigma2) {
  if (fixed_sigma2) overrides.push_back("sigma2.fixed=" + num(*fixed_sigma2));
  return config::expand(config::read_file(path), overrides, seed_from_environment());
}

/*
 * Runs every configuration and writes results.csv, replicates.csv (and
 * grid.csv when any run requests a grid) plus manifest.json to `output_dir`.
 */
inline int cmd_run(const RunOptions &options, std::ostream &out, std::ostream &err) {
  const std::string started = utc_timestamp();
  std::vector<config::RunSpec> runs;
  try {
    runs = load_runs(options.config_path, options.overrides, options.fixed_sigma2);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  const unsigned workers =
      options.workers > 0 ? options.workers : std::max(1u, std::thread::hardware_concurrency());

  namespace fs = std::filesystem;
  std::vector<std::string> results_lines{kResultsHeader};
  std::vector<std::string> replicate_lines{kReplicatesHeader};
  std::vector<std::string> grid_lines;
  config::json warnings = config::json::array();
  try {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const MonteCarloRunner runner(runs[i].experiment);
      const auto records = runner.run_all(workers);
      const MetricsReport report = aggregate(records);
      results_lines.push_back(results_row(runs[i].experiment, report));
      for (const auto &record : records) replicate_lines.push_back(replicate_row(i, record));
      if (report.sigma2.boundary_hits > 0) {
        std::string message = "run " + std::to_string(i) + ": noise variance estimate at a search bound in " +
                              std::to_string(report.sigma2.boundary_hits) + " of " +
                              std::to_string(report.replicates) + " replicates";
        err << "warning: " << message << "\n";
        warnings.push_back(message);
      }
      if (runs[i].grid) {
        if (grid_lines.empty()) grid_lines.push_back(kGridHeader);
        std::vector<Eigen::Index> ranks = runs[i].grid->ranks;
        if (ranks.empty()) ranks = {runner.m(), runs[i].experiment.design.n};
        for (const auto &row : evaluate_grid(runner, runs[i].grid->points, ranks)) {
          grid_lines.push_back(grid_row(i, row));
        }
      }
      out << "run " << i << (runs[i].experiment.name.empty() ? "" : " (" + runs[i].experiment.name + ")")
          << ": m=" << report.m_used << " coverage=" << num(report.coverage) << " length=" << num(report.length_mean)
          << " rmse=" << num(report.rmse) << " nlpd=" << num(report.nlpd_mean) << "\n";
    }
  } catch (const config::ConfigError &e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }

  try {
    fs::create_directories(options.output_dir);
    auto write_lines = [&](const std::string &name, const std::vector<std::string> &lines) {
      std::ofstream file(fs::path(options.output_dir) / name, std::ios::binary);
      for (const auto &line : lines) file << line << "\n";
      if (!file) throw std::runtime_error("cannot write " + (fs::path(options.output_dir) / name).string());
    };
    write_lines("results.csv", results_lines);
    write_lines("replicates.csv", replicate_lines);
    config::json outputs = {{"results", "results.csv"}, {"replicates", "replicates.csv"}};
    if (!grid_lines.empty()) {
      write_lines("grid.csv", grid_lines);
      outputs["grid"] = "grid.csv";
    }
    config::json manifest = {
        {"config_hash", config::config_hash(runs)},
        {"artifact_version", EIGSGPR_VERSION},
        {"config_path", options.config_path},
        {"started", started},
        {"finished", utc_timestamp()},
        {"workers", workers},
        {"runs", runs.size()},
        {"outputs", outputs},
        {"warnings", warnings},
    };
    std::ofstream file(fs::path(options.output_dir) / "manifest.json");
    file << manifest.dump(2) << "\n";
    if (!file) throw std::runtime_error("cannot write manifest.json");
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kSuccess;
}

struct PredictOptions {
  double alpha = 1.0;
  double gamma = 0.5;
  double delta = 0.1;
  std::int64_t n = 1000;
  int d = 1;
};

inline int cmd_predict(const PredictOptions &o, std::ostream &out, std::ostream &err) {
  try {
    if (o.n < 1 || o.d < 1) throw ArgumentError("n and d must be positive integers");
    const theory::RegimeReport report = theory::predicted_asymptotic_coverage(o.alpha, o.gamma, o.delta);
    const std::int64_t m_star = std::clamp<std::int64_t>(theory::inducing_threshold(o.n, o.alpha, o.gamma, o.d), 1, o.n);
    out << "regime=" << theory::to_string(report.regime) << "\n";
    if (report.predicted_coverage) {
      char buffer[32];
      std::snprintf(buffer, sizeof buffer, "%.3f", *report.predicted_coverage);
      out << "predicted_coverage=" << buffer << "\n";
    } else {
      out << "predicted_coverage=none\n";
    }
    out << "m_star=" << m_star << "\n";
    out << "contraction_exponent=" << num(theory::contraction_exponent(o.alpha, o.gamma)) << "\n";
    out << "kl_regime=" << theory::to_string(theory::kl_regime(o.n, m_star, o.gamma)) << "\n";
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kSuccess;
}

/*
 * Wall-clock comparison, per configuration, of the dense full posterior
 * (Cholesky of K_nn + sigma2 I) against the SGPR route (leading m eigenpairs,
 * closed form where available, then the rank-m sum). Informational only.
 */
inline int cmd_profile(const std::string &config_path, const std::vector<std::string> &overrides, std::ostream &out,
                       std::ostream &err) {
  std::vector<config::RunSpec> runs;
  try {
    runs = load_runs(config_path, overrides, std::nullopt);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
  try {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const ExperimentConfig &cfg = runs[i].experiment;
      const MonteCarloRunner runner(cfg);
      const auto [design, y] = runner.replicate_data(0);
      const ResolvedKernel rk = resolve_kernel(cfg.kernel, cfg.design.n);
      const Eigen::VectorXd x0 = runner.query_point();
      const double sigma2 = cfg.fixed_sigma2.value_or(1.0);
      const Eigen::Index m = runner.m();

      const auto t0 = clock::now();
      Eigen::MatrixXd A = kernel_matrix(rk, design);
      A.diagonal().array() += sigma2;
      const Eigen::LLT<Eigen::MatrixXd> llt(A);
      const Eigen::VectorXd kx = kernel_vector(rk, design, x0);
      const double full_mean = kx.dot(llt.solve(y));
      const auto t1 = clock::now();

      const bool closed_form = design.kind == DesignKind::RegularGrid1D &&
                               rk.spec.family == KernelFamily::RescaledBrownianMotion;
      const EigenSystem es = closed_form ? brownian_eigensystem_closed_form(design.size(), rk.spec.gamma, m)
                                         : eigensystem_for(rk, design);
      const auto V = es.eigenvectors.leftCols(m);
      const Eigen::VectorXd proj_k = V.transpose() * kernel_vector(rk, design, x0);
      const Eigen::VectorXd proj_y = V.transpose() * y;
      const auto [sgpr_mean, sgpr_var] = spectral_posterior(es.eigenvalues, proj_k, proj_y, prior_variance(rk, x0), sigma2, m);
      const auto t2 = clock::now();
      (void)sgpr_var;

      const double full_s = seconds(t0, t1);
      const double sgpr_s = seconds(t1, t2);
      out << "run=" << i << " n=" << cfg.design.n << " m=" << m
          << " spectrum=" << (closed_form ? "closed_form" : "dense_numeric") << " full_seconds=" << num(full_s)
          << " sgpr_seconds=" << num(sgpr_s) << " ratio=" << num(sgpr_s > 0.0 ? full_s / sgpr_s : 0.0)
          << " full_mean=" << num(full_mean) << " sgpr_mean=" << num(sgpr_mean) << "\n";
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kSuccess;
}

inline int run_cli(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  CLI::App app{"Eigenvector-inducing sparse GP regression: experiments and theory"};
  app.set_version_flag("--version", std::string(EIGSGPR_VERSION));
  app.require_subcommand(1);

  RunOptions run_options;
  auto *run = app.add_subcommand("run", "Run Monte-Carlo experiments from a configuration file");
  run->add_option("--config", run_options.config_path, "Configuration file (JSON)")->required();
  run->add_option("--out", run_options.output_dir, "Output directory")->capture_default_str();
  run->add_option("--set", run_options.overrides, "Override KEY=VALUE (dotted keys, repeatable)");
  run->add_option("--workers", run_options.workers, "Worker threads (default: available parallelism)");
  double fixed_sigma2 = 0.0;
  auto *fixed_flag = run->add_option("--fixed-sigma2", fixed_sigma2, "Use this noise variance instead of estimating it")
                         ->check(CLI::PositiveNumber);

  PredictOptions predict_options;
  auto *predict = app.add_subcommand("predict", "Print theoretical predictions");
  predict->add_option("--alpha", predict_options.alpha, "Truth smoothness")->required();
  predict->add_option("--gamma", predict_options.gamma, "Prior smoothness")->required();
  predict->add_option("--delta", predict_options.delta, "Credible set complement")->capture_default_str();
  predict->add_option("--n", predict_options.n, "Sample size")->capture_default_str();
  predict->add_option("--d", predict_options.d, "Dimension")->capture_default_str();

  std::string profile_config;
  std::vector<std::string> profile_overrides;
  auto *profile = app.add_subcommand("profile", "Time the full posterior against SGPR");
  profile->add_option("--config", profile_config, "Configuration file (JSON)")->required();
  profile->add_option("--set", profile_overrides, "Override KEY=VALUE (dotted keys, repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success &e) {
    // --help / --version
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  if (*run) {
    if (*fixed_flag) run_options.fixed_sigma2 = fixed_sigma2;
    return cmd_run(run_options, out, err);
  }
  if (*predict) {
    return cmd_predict(predict_options, out, err);
  }
  return cmd_profile(profile_config, profile_overrides, out, err);
}

}  // namespace eigsgpr::cli

#endif  // EIGSGPR_CLI_HPP_
