/*
 * Copyright (C) 2026 The seitphr Authors
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
#ifndef SEITPHR_CONFIG_HPP
#define SEITPHR_CONFIG_HPP

/**
 * @file
 * @brief Flat key/value run configuration.
 *
 * One `key = value` per line; `#` starts a comment. Vector and matrix
 * entries are addressed 1-based as `vector.<name>.<i>` and
 * `matrix.<name>.<i>.<j>`; lists are comma separated. Unknown and repeated
 * keys are errors.
 */

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seitphr/errors.hpp"
#include "seitphr/ocp.hpp"
#include "seitphr/parameters.hpp"

namespace seitphr {

using ConfigMap = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto at = s.find(sep, start);
    out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) return out;
    start = at + 1;
  }
}

}  // namespace detail

inline double parse_double(std::string_view key, std::string_view text) {
  text = detail::trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + std::string(text) + "'");
  }
  return v;
}

inline std::size_t parse_count(std::string_view key, std::string_view text) {
  text = detail::trim(text);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("config: '" + std::string(key) + "' expects a nonnegative integer, got '" + std::string(text) + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  text = detail::trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects true or false");
}

inline std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  for (auto item : detail::split(text, ',')) out.push_back(parse_double(key, item));
  return out;
}

/// Parses the text of a configuration file.
inline ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0;
  for (auto line : detail::split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) + " is not of the form key = value");
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(line_no) + " has an empty key");
    if (!out.emplace(key, value).second) throw ConfigError("config: key '" + key + "' repeated");
  }
  return out;
}

inline ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Everything a CLI run needs; defaults reproduce the published setting.
struct RunConfig {
  ModelParameters p = default_parameters();
  double e0 = kDefaultLatent;
  double i0 = kDefaultInfectious;

  double step_days = 1.0;
  double interval_days = 7.0;
  double constraint_step_days = 1.0;
  std::optional<std::size_t> horizon_weeks;  ///< scenario default if unset

  OcpKind kind = OcpKind::HomogeneousDistancing;
  double kappa = 1e-5;
  double cap_backoff = 1e-3;
  bool symmetric_beta = true;
  std::optional<Eigen::MatrixXd> beta_min;  ///< derived from a homogeneous solve if unset
  int max_iterations = 400;

  std::size_t k_weeks = 12;
  std::optional<std::size_t> total_weeks;
  bool warm_start = true;

  std::vector<double> delta_list = {0.40, 0.45, 0.487, 0.50, 0.55, 0.60};
  double bisect_lo = 0.40;
  double bisect_hi = 0.60;
  double bisect_tol = 1e-3;
  std::size_t lift_after_weeks = 156;
  std::size_t rebound_weeks = 104;
  std::vector<double> tmax_factors = {1.0, 2.0, 4.0};
  std::vector<double> hmax_list = {5000.0, 10000.0, 20000.0, 40000.0};
  std::vector<double> k_list = {3.0, 6.0, 12.0, 26.0};

  bool plots = false;

  std::size_t horizon_or(std::size_t fallback) const { return horizon_weeks.value_or(fallback); }

  /// OCP template of this run over [0, weeks * interval_days].
  OcpSpec ocp_spec(OcpKind k, std::size_t weeks) const {
    OcpSpec s;
    s.kind = k;
    s.p = p;
    s.x0 = initial_state(p, e0, i0);
    s.t0 = 0.0;
    s.tf = static_cast<double>(weeks) * interval_days;
    s.interval_days = interval_days;
    s.kappa = kappa;
    s.constraint_step_days = constraint_step_days;
    s.step_days = step_days;
    s.symmetric_beta = symmetric_beta;
    s.cap_backoff = cap_backoff;
    if (beta_min) s.beta_min = *beta_min;
    return s;
  }
};

namespace detail {

inline Eigen::Index config_index(std::string_view key, std::string_view text, std::size_t n) {
  const std::size_t i = parse_count(key, text);
  if (i < 1 || i > n) throw ConfigError("config: index in '" + std::string(key) + "' outside 1.." + std::to_string(n));
  return static_cast<Eigen::Index>(i - 1);
}

}  // namespace detail

/**
 * Applies `entries` on top of `base`. A changed n_groups resets the group
 * data to zero, so every vector and matrix entry must then be given.
 */
inline RunConfig apply_config(const ConfigMap& entries, RunConfig base = {}) {
  RunConfig c = std::move(base);
  ModelParameters& p = c.p;
  if (auto it = entries.find("n_groups"); it != entries.end()) {
    const std::size_t n = parse_count(it->first, it->second);
    if (n == 0) throw ConfigError("config: n_groups must be positive");
    if (n != p.n_groups) {
      const auto m = static_cast<Eigen::Index>(n);
      p.n_groups = n;
      p.N = Eigen::VectorXd::Zero(m);
      p.pi_s = p.pi_m = p.pi_a = Eigen::VectorXd::Zero(m);
      p.beta0 = Eigen::MatrixXd::Zero(m, m);
      c.beta_min.reset();
    }
  }
  const std::size_t n = p.n_groups;

  const std::map<std::string_view, double*, std::less<>> scalars = {
      {"gamma", &p.gamma},         {"eta_s", &p.eta_s},
      {"eta_m", &p.eta_m},         {"eta_a", &p.eta_a},
      {"tau_s", &p.tau_s},         {"tau_o", &p.tau_o},
      {"rho", &p.rho},             {"sigma", &p.sigma},
      {"n_pop", &p.n_pop},         {"h_icu_max", &p.h_icu_max},
      {"t_max", &p.t_max},         {"e0", &c.e0},
      {"i0", &c.i0},               {"step_days", &c.step_days},
      {"interval_days", &c.interval_days}, {"constraint_step_days", &c.constraint_step_days},
      {"kappa", &c.kappa},         {"cap_backoff", &c.cap_backoff},
      {"bisect_lo", &c.bisect_lo}, {"bisect_hi", &c.bisect_hi},
      {"bisect_tol", &c.bisect_tol}};
  const std::map<std::string_view, std::vector<double>*, std::less<>> lists = {
      {"delta_list", &c.delta_list},
      {"tmax_factors", &c.tmax_factors},
      {"hmax_list", &c.hmax_list},
      {"k_list", &c.k_list}};
  const std::map<std::string_view, Eigen::VectorXd*, std::less<>> vectors = {
      {"N", &p.N}, {"pi_s", &p.pi_s}, {"pi_m", &p.pi_m}, {"pi_a", &p.pi_a}};

  for (const auto& [key, value] : entries) {
    if (key == "n_groups") continue;
    if (auto s = scalars.find(key); s != scalars.end()) {
      *s->second = parse_double(key, value);
    } else if (auto l = lists.find(key); l != lists.end()) {
      *l->second = parse_list(key, value);
      if (l->second->empty()) throw ConfigError("config: '" + key + "' must not be empty");
    } else if (key == "kind") {
      try {
        c.kind = parse_ocp_kind(value);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "horizon_weeks") {
      c.horizon_weeks = parse_count(key, value);
    } else if (key == "total_weeks") {
      c.total_weeks = parse_count(key, value);
    } else if (key == "k_weeks") {
      c.k_weeks = parse_count(key, value);
    } else if (key == "lift_after_weeks") {
      c.lift_after_weeks = parse_count(key, value);
    } else if (key == "rebound_weeks") {
      c.rebound_weeks = parse_count(key, value);
    } else if (key == "max_iterations") {
      c.max_iterations = static_cast<int>(parse_count(key, value));
    } else if (key == "warm_start") {
      c.warm_start = parse_bool(key, value);
    } else if (key == "symmetric_beta") {
      c.symmetric_beta = parse_bool(key, value);
    } else if (key == "plots") {
      c.plots = parse_bool(key, value);
    } else if (key.starts_with("vector.")) {
      const auto parts = detail::split(key, '.');
      auto v = parts.size() == 3 ? vectors.find(parts[1]) : vectors.end();
      if (v == vectors.end()) throw ConfigError("config: unknown vector key '" + key + "'");
      (*v->second)[detail::config_index(key, parts[2], n)] = parse_double(key, value);
    } else if (key.starts_with("matrix.")) {
      const auto parts = detail::split(key, '.');
      if (parts.size() != 4 || (parts[1] != "beta0" && parts[1] != "beta_min")) {
        throw ConfigError("config: unknown matrix key '" + key + "'");
      }
      const auto i = detail::config_index(key, parts[2], n);
      const auto j = detail::config_index(key, parts[3], n);
      if (parts[1] == "beta0") {
        p.beta0(i, j) = parse_double(key, value);
      } else {
        const auto m = static_cast<Eigen::Index>(n);
        if (!c.beta_min) c.beta_min = Eigen::MatrixXd::Zero(m, m);
        (*c.beta_min)(i, j) = parse_double(key, value);
      }
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }

  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!(c.step_days > 0.0 && c.interval_days > 0.0 && c.constraint_step_days > 0.0)) {
    throw ConfigError("config: step, interval and constraint grid must be positive");
  }
  if (!(c.bisect_lo < c.bisect_hi && c.bisect_tol > 0.0)) throw ConfigError("config: bad bisection bracket");
  if (c.k_weeks < 1) throw ConfigError("config: k_weeks must be at least 1");
  for (double k : c.k_list) {
    if (!(k >= 1.0 && k == std::floor(k))) throw ConfigError("config: k_list entries must be positive integers");
  }
  return c;
}

/// Canonical `key = value` lines describing `c`, readable by apply_config.
inline std::string echo_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  const ModelParameters& p = c.p;
  auto line = [&](std::string_view k, const auto& v) { out << k << " = " << v << '\n'; };
  auto list = [&](std::string_view k, const std::vector<double>& v) {
    out << k << " = ";
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    out << '\n';
  };
  line("n_groups", p.n_groups);
  const auto n = static_cast<Eigen::Index>(p.n_groups);
  for (auto [name, v] : {std::pair{"N", &p.N}, {"pi_s", &p.pi_s}, {"pi_m", &p.pi_m}, {"pi_a", &p.pi_a}}) {
    for (Eigen::Index i = 0; i < n; ++i) out << "vector." << name << '.' << i + 1 << " = " << (*v)[i] << '\n';
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out << "matrix.beta0." << i + 1 << '.' << j + 1 << " = " << p.beta0(i, j) << '\n';
  }
  if (c.beta_min) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out << "matrix.beta_min." << i + 1 << '.' << j + 1 << " = " << (*c.beta_min)(i, j) << '\n';
      }
    }
  }
  line("gamma", p.gamma);
  line("eta_s", p.eta_s);
  line("eta_m", p.eta_m);
  line("eta_a", p.eta_a);
  line("tau_s", p.tau_s);
  line("tau_o", p.tau_o);
  line("rho", p.rho);
  line("sigma", p.sigma);
  line("n_pop", p.n_pop);
  line("h_icu_max", p.h_icu_max);
  line("t_max", p.t_max);
  line("e0", c.e0);
  line("i0", c.i0);
  line("step_days", c.step_days);
  line("interval_days", c.interval_days);
  line("constraint_step_days", c.constraint_step_days);
  if (c.horizon_weeks) line("horizon_weeks", *c.horizon_weeks);
  line("kind", to_string(c.kind));
  line("kappa", c.kappa);
  line("cap_backoff", c.cap_backoff);
  line("symmetric_beta", c.symmetric_beta ? "true" : "false");
  line("max_iterations", c.max_iterations);
  line("k_weeks", c.k_weeks);
  if (c.total_weeks) line("total_weeks", *c.total_weeks);
  line("warm_start", c.warm_start ? "true" : "false");
  list("delta_list", c.delta_list);
  line("bisect_lo", c.bisect_lo);
  line("bisect_hi", c.bisect_hi);
  line("bisect_tol", c.bisect_tol);
  line("lift_after_weeks", c.lift_after_weeks);
  line("rebound_weeks", c.rebound_weeks);
  list("tmax_factors", c.tmax_factors);
  list("hmax_list", c.hmax_list);
  list("k_list", c.k_list);
  line("plots", c.plots ? "true" : "false");
  return out.str();
}

}  // namespace seitphr

#endif  // SEITPHR_CONFIG_HPP
