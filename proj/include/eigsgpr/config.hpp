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

#ifndef EIGSGPR_CONFIG_HPP_
#define EIGSGPR_CONFIG_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "eigsgpr/errors.hpp"
#include "eigsgpr/experiments.hpp"

namespace eigsgpr::config {

using json = nlohmann::json;

// Malformed or semantically invalid configuration; maps to exit code 2.
struct ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridRequest {
  Eigen::Index points = 101;
  std::vector<Eigen::Index> ranks;
};

struct RunSpec {
  json effective;  // fully populated, after overrides
  ExperimentConfig experiment;
  std::optional<GridRequest> grid;
};

/*
 * Every key a run may carry, with its default. A configuration file is this
 * object (possibly partial) plus an optional "runs" array of partial objects
 * merged over the top level.
 */
inline json defaults() {
  return json{
      {"name", ""},
      {"kernel", {{"family", "rbm"}, {"gamma", 0.5}, {"lengthscale", nullptr}, {"fit_lengthscale", false}}},
      {"design",
       {{"kind", "grid"}, {"n", 1000}, {"d", 1}, {"rho", 0.0}, {"path", ""}, {"lower", nullptr}, {"upper", nullptr}}},
      {"truth", {{"family", "abs_power"}, {"alpha", 1.0}, {"center", nullptr}}},
      {"noise", {{"kind", "gaussian"}, {"sigma", 1.0}}},
      {"m_rule", "ThresholdAlphaGamma"},
      {"delta", 0.1},
      {"query_point", nullptr},
      {"replicates", 500},
      {"seed", 0},
      {"sigma2", {{"lower", 1e-4}, {"upper", 1e2}, {"fixed", nullptr}}},
      {"grid", nullptr},
  };
}

namespace detail {

inline void merge_into(json &base, const json &patch, const std::string &where) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!base.contains(it.key())) {
      throw ConfigError("unknown configuration key '" + where + it.key() + "'");
    }
    json &target = base[it.key()];
    if (target.is_object() && it.value().is_object()) {
      merge_into(target, it.value(), where + it.key() + ".");
    } else {
      target = it.value();
    }
  }
}

inline std::string lower(std::string s) {
  for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

template <typename T>
T get(const json &j, const char *key, const std::string &where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError("configuration key '" + where + key + "' has the wrong type");
  }
}

inline Eigen::VectorXd point_from(const json &j, const std::string &where) {
  if (j.is_number()) {
    return Eigen::VectorXd::Constant(1, j.get<double>());
  }
  if (!j.is_array()) {
    throw ConfigError("'" + where + "' must be a number or an array of numbers");
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("'" + where + "' must contain numbers only");
    p[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return p;
}

}  // namespace detail

inline MRule parse_m_rule(const std::string &text) {
  static const std::regex explicit_form(R"(\s*Explicit\s*\(\s*(\d+)\s*\)\s*)");
  std::smatch match;
  if (std::regex_match(text, match, explicit_form)) {
    return MRule{MRuleKind::Explicit, static_cast<Eigen::Index>(std::stoll(match[1].str()))};
  }
  if (text == "Full") return MRule{MRuleKind::Full, 0};
  if (text == "ThresholdAlphaGamma") return MRule{MRuleKind::ThresholdAlphaGamma, 0};
  if (text == "ThresholdD") return MRule{MRuleKind::ThresholdD, 0};
  if (text == "ThresholdLogBelow") return MRule{MRuleKind::ThresholdLogBelow, 0};
  if (text == "ThresholdLogAbove") return MRule{MRuleKind::ThresholdLogAbove, 0};
  throw ConfigError("unknown m_rule '" + text +
                    "' (expected Full, Explicit(<m>), ThresholdAlphaGamma, ThresholdD, "
                    "ThresholdLogBelow or ThresholdLogAbove)");
}

// Typed experiment from a fully populated run object.
inline ExperimentConfig to_experiment(const json &run) {
  using detail::get;
  ExperimentConfig cfg;
  cfg.name = get<std::string>(run, "name", "");

  const json &design = run.at("design");
  const std::string design_kind = detail::lower(get<std::string>(design, "kind", "design."));
  if (design_kind == "grid") {
    cfg.design.kind = DesignKind::RegularGrid1D;
  } else if (design_kind == "uniform") {
    cfg.design.kind = DesignKind::UniformRandom;
  } else if (design_kind == "gaussian") {
    cfg.design.kind = DesignKind::GaussianEquicorrelated;
  } else if (design_kind == "external") {
    cfg.design.kind = DesignKind::External;
  } else {
    throw ConfigError("unknown design.kind '" + design_kind + "' (grid, uniform, gaussian, external)");
  }
  cfg.design.n = get<Eigen::Index>(design, "n", "design.");
  cfg.design.d = get<int>(design, "d", "design.");
  cfg.design.rho = get<double>(design, "rho", "design.");
  cfg.design.external_path = get<std::string>(design, "path", "design.");
  if (!design.at("lower").is_null()) cfg.design.lower = get<double>(design, "lower", "design.");
  if (!design.at("upper").is_null()) cfg.design.upper = get<double>(design, "upper", "design.");

  const json &kernel = run.at("kernel");
  const std::string family = detail::lower(get<std::string>(kernel, "family", "kernel."));
  if (family == "rbm") {
    cfg.kernel.family = KernelFamily::RescaledBrownianMotion;
  } else if (family == "matern") {
    cfg.kernel.family = KernelFamily::Matern;
  } else if (family == "se") {
    cfg.kernel.family = KernelFamily::SquaredExponential;
  } else {
    throw ConfigError("unknown kernel.family '" + family + "' (rbm, matern, se)");
  }
  cfg.kernel.gamma = get<double>(kernel, "gamma", "kernel.");
  if (!kernel.at("lengthscale").is_null()) cfg.kernel.lengthscale_override = get<double>(kernel, "lengthscale", "kernel.");
  cfg.kernel.dimension = cfg.design.d;
  cfg.fit_lengthscale = get<bool>(kernel, "fit_lengthscale", "kernel.");

  const json &truth = run.at("truth");
  const std::string truth_family = detail::lower(get<std::string>(truth, "family", "truth."));
  if (truth_family == "abs_power") {
    cfg.truth.family = TruthFamily::AbsPower;
  } else if (truth_family == "signed_square") {
    cfg.truth.family = TruthFamily::SignedSquare;
  } else if (truth_family == "norm_power") {
    cfg.truth.family = TruthFamily::NormPower;
  } else {
    throw ConfigError("unknown truth.family '" + truth_family + "' (abs_power, signed_square, norm_power)");
  }
  cfg.truth.alpha = get<double>(truth, "alpha", "truth.");
  if (truth.at("center").is_null()) {
    cfg.truth.center = cfg.truth.family == TruthFamily::NormPower ? Eigen::VectorXd::Zero(cfg.design.d)
                                                                   : Eigen::VectorXd::Constant(1, 0.5);
  } else {
    cfg.truth.center = detail::point_from(truth.at("center"), "truth.center");
  }

  const json &noise = run.at("noise");
  const std::string noise_kind = detail::lower(get<std::string>(noise, "kind", "noise."));
  if (noise_kind == "gaussian") {
    cfg.noise.kind = NoiseKind::Gaussian;
  } else if (noise_kind == "laplace") {
    cfg.noise.kind = NoiseKind::Laplace;
  } else {
    throw ConfigError("unknown noise.kind '" + noise_kind + "' (gaussian, laplace)");
  }
  cfg.noise.sigma = get<double>(noise, "sigma", "noise.");

  cfg.m_rule = parse_m_rule(get<std::string>(run, "m_rule", ""));
  cfg.delta = get<double>(run, "delta", "");
  if (!run.at("query_point").is_null()) cfg.query_point = detail::point_from(run.at("query_point"), "query_point");
  cfg.replicates = get<Eigen::Index>(run, "replicates", "");
  cfg.master_seed = get<std::uint64_t>(run, "seed", "");

  const json &sigma2 = run.at("sigma2");
  cfg.noise_bounds.lower = get<double>(sigma2, "lower", "sigma2.");
  cfg.noise_bounds.upper = get<double>(sigma2, "upper", "sigma2.");
  if (!sigma2.at("fixed").is_null()) cfg.fixed_sigma2 = get<double>(sigma2, "fixed", "sigma2.");

  try {
    validate(cfg);
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("invalid configuration") + (cfg.name.empty() ? "" : " '" + cfg.name + "'") +
                      ": " + e.what());
  }
  return cfg;
}

inline std::optional<GridRequest> to_grid(const json &run) {
  const json &grid = run.at("grid");
  if (grid.is_null()) return std::nullopt;
  if (!grid.is_object()) throw ConfigError("'grid' must be an object with 'points' and 'ranks'");
  GridRequest request;
  if (grid.contains("points")) request.points = detail::get<Eigen::Index>(grid, "points", "grid.");
  if (grid.contains("ranks")) request.ranks = detail::get<std::vector<Eigen::Index>>(grid, "ranks", "grid.");
  for (const auto &item : grid.items()) {
    if (item.key() != "points" && item.key() != "ranks") {
      throw ConfigError("unknown configuration key 'grid." + item.key() + "'");
    }
  }
  return request;
}

// Parses JSON text, reporting syntax errors with line and column.
inline json parse_text(const std::string &text, const std::string &source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    // nlohmann reports a byte offset; translate to line/column.
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << column << ": parse error: " << e.what();
    throw ConfigError(os.str());
  }
}

inline json read_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_text(text, path);
}

// Value text of --set KEY=VALUE: JSON when it parses as JSON, a string otherwise.
inline json override_value(const std::string &text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &) {
    return json(text);
  }
}

inline void apply_override(json &run, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form KEY=VALUE");
  }
  const std::string key = assignment.substr(0, eq);
  json *node = &run;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("override key '" + key + "' does not name an existing configuration key");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = override_value(assignment.substr(eq + 1));
}

/*
 * Effective runs of a configuration document: defaults <- top level <- each
 * entry of "runs" <- overrides <- seed override.
 */
inline std::vector<RunSpec> expand(const json &document, const std::vector<std::string> &overrides = {},
                                   std::optional<std::uint64_t> seed_override = std::nullopt) {
  if (!document.is_object()) throw ConfigError("configuration must be a JSON object");
  json top = document;
  json runs = json::array({json::object()});
  if (top.contains("runs")) {
    runs = top["runs"];
    top.erase("runs");
    if (!runs.is_array() || runs.empty()) throw ConfigError("'runs' must be a non-empty array of objects");
  }
  json base = defaults();
  detail::merge_into(base, top, "");

  std::vector<RunSpec> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].is_object()) throw ConfigError("'runs' entries must be objects");
    json run = base;
    detail::merge_into(run, runs[i], "runs[" + std::to_string(i) + "].");
    for (const auto &assignment : overrides) apply_override(run, assignment);
    if (seed_override) run["seed"] = *seed_override;
    RunSpec spec;
    spec.experiment = to_experiment(run);
    spec.grid = to_grid(run);
    spec.effective = std::move(run);
    out.push_back(std::move(spec));
  }
  return out;
}

/*
 * Canonical text: keys sorted, no whitespace, integral numbers printed as
 * integers (so 1000, 1000.0 and 1e3 agree) and other numbers with 17
 * significant digits.
 */
inline std::string canonicalize(const json &value) {
  switch (value.type()) {
    case json::value_t::object: {
      std::string out = "{";
      bool first = true;
      for (const auto &[key, item] : value.items()) {  // nlohmann objects iterate in key order
        if (!first) out += ",";
        first = false;
        out += json(key).dump() + ":" + canonicalize(item);
      }
      return out + "}";
    }
    case json::value_t::array: {
      std::string out = "[";
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i) out += ",";
        out += canonicalize(value[i]);
      }
      return out + "]";
    }
    case json::value_t::number_integer:
      return std::to_string(value.get<std::int64_t>());
    case json::value_t::number_unsigned:
      return std::to_string(value.get<std::uint64_t>());
    case json::value_t::number_float: {
      // integral floats below 2^53 print as integers so that 1000.0 == 1000
      const double v = value.get<double>();
      char buffer[40];
      if (std::isfinite(v) && std::abs(v) < 0x1p53 && v == std::trunc(v)) {
        std::snprintf(buffer, sizeof buffer, "%.0f", v);
      } else {
        std::snprintf(buffer, sizeof buffer, "%.17g", v);
      }
      return buffer;
    }
    default:
      return value.dump();
  }
}

inline std::string sha256_hex(const std::string &data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline std::string config_hash(const std::vector<RunSpec> &runs) {
  json all = json::array();
  for (const auto &run : runs) all.push_back(run.effective);
  return sha256_hex(canonicalize(all));
}

}  // namespace eigsgpr::config

#endif  // EIGSGPR_CONFIG_HPP_
