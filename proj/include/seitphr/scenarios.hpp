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
#ifndef SEITPHR_SCENARIOS_HPP
#define SEITPHR_SCENARIOS_HPP

/**
 * @file
 * @brief The reference experiments as pure functions of a RunConfig.
 */

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "seitphr/config.hpp"
#include "seitphr/mpc.hpp"
#include "seitphr/output.hpp"
#include "seitphr/ocp.hpp"

namespace seitphr {

inline constexpr std::size_t kDefaultWeeks = 104;
inline constexpr std::size_t kConstantDeltaWeeks = 156;
inline constexpr std::size_t kMpcAgeDependentWeeks = 78;

/// Homogeneous distancing delta * beta0 without tests.
inline ControlInput distancing_control(const ModelParameters& p, double delta) {
  ControlInput u = lifted_control(p);
  u.beta = delta * p.beta0;
  return u;
}

inline Trajectory run_constant(const RunConfig& c, const ModelParameters& p, const StateVector& x0, double delta,
                               std::size_t weeks) {
  const auto policy = PiecewisePolicy::constant(distancing_control(p, delta), weeks, c.interval_days);
  return simulate(x0, policy, p, static_cast<double>(weeks) * c.interval_days, c.step_days);
}

// ---------------------------------------------------------------- baseline

struct BaselineResult {
  Trajectory three_groups;
  Trajectory one_group;
  ModelParameters one_group_parameters;
};

/// No countermeasures, for the configured groups and their one-group aggregate.
inline BaselineResult scenario_baseline(const RunConfig& c) {
  const std::size_t weeks = c.horizon_or(kDefaultWeeks);
  BaselineResult out;
  out.three_groups = run_constant(c, c.p, initial_state(c.p, c.e0, c.i0), 1.0, weeks);
  out.one_group_parameters = aggregate_to_one_group(c.p);
  out.one_group = run_constant(c, out.one_group_parameters, initial_state(out.one_group_parameters, c.e0, c.i0), 1.0, weeks);
  return out;
}

// ---------------------------------------------------------- constant delta

struct ThresholdResult {
  double delta = 0.0;  ///< largest feasible delta found
  double infeasible_delta = 0.0;
  int bisections = 0;
};

/// Bisection for the largest constant delta whose ICU peak stays at or below the cap.
inline ThresholdResult find_max_feasible_delta(const RunConfig& c, double lo, double hi, double tol, std::size_t weeks) {
  const StateVector x0 = initial_state(c.p, c.e0, c.i0);
  auto feasible = [&](double d) { return run_constant(c, c.p, x0, d, weeks).peak_icu() <= c.p.h_icu_max; };
  if (!feasible(lo) || feasible(hi)) {
    throw BracketError("find_max_feasible_delta: [" + format_number(lo) + ", " + format_number(hi) +
                       "] does not straddle the ICU cap");
  }
  ThresholdResult out;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
    ++out.bisections;
  }
  out.delta = lo;
  out.infeasible_delta = hi;
  return out;
}

struct ReboundResult {
  double delta = 0.0;
  Trajectory trajectory;  ///< restrictions for lift_after_weeks, then fully lifted
  double peak_before = 0.0;
  double peak_after = 0.0;
  double peak_after_day = 0.0;
};

inline ReboundResult lift_restrictions(const RunConfig& c, double delta) {
  const std::size_t total = c.lift_after_weeks + c.rebound_weeks;
  PiecewisePolicy policy = PiecewisePolicy::constant(distancing_control(c.p, delta), c.lift_after_weeks, c.interval_days);
  policy.controls.resize(total, lifted_control(c.p));
  ReboundResult out;
  out.delta = delta;
  out.trajectory = simulate(initial_state(c.p, c.e0, c.i0), policy, c.p, static_cast<double>(total) * c.interval_days,
                            c.step_days);
  const double lift_day = static_cast<double>(c.lift_after_weeks) * c.interval_days;
  for (std::size_t n = 0; n < out.trajectory.size(); ++n) {
    double& peak = out.trajectory.times[n] <= lift_day ? out.peak_before : out.peak_after;
    if (out.trajectory.icu_abs[n] > peak) {
      peak = out.trajectory.icu_abs[n];
      if (out.trajectory.times[n] > lift_day) out.peak_after_day = out.trajectory.times[n];
    }
  }
  return out;
}

struct ConstantDeltaResult {
  std::vector<double> deltas;
  std::vector<Trajectory> runs;
  ThresholdResult threshold;
  std::vector<ReboundResult> rebounds;  ///< for min(delta_list) and the threshold
};

inline ConstantDeltaResult scenario_constant_delta(const RunConfig& c) {
  const std::size_t weeks = c.horizon_or(kConstantDeltaWeeks);
  const StateVector x0 = initial_state(c.p, c.e0, c.i0);
  ConstantDeltaResult out;
  out.deltas = c.delta_list;
  for (double d : c.delta_list) out.runs.push_back(run_constant(c, c.p, x0, d, weeks));
  out.threshold = find_max_feasible_delta(c, c.bisect_lo, c.bisect_hi, c.bisect_tol, weeks);
  const double strict = *std::min_element(c.delta_list.begin(), c.delta_list.end());
  out.rebounds.push_back(lift_restrictions(c, strict));
  out.rebounds.push_back(lift_restrictions(c, out.threshold.delta));
  return out;
}

// --------------------------------------------------------------------- OCP

struct OcpScenarioResult {
  OcpSpec spec;
  OcpSolution solution;
  /// Homogeneous solve that seeds an age-dependent run.
  std::optional<OcpSolution> seed;
  double seed_objective = 0.0;
};

inline OcpSolveOptions solve_options(const RunConfig& c) {
  OcpSolveOptions o;
  o.nlp.max_iterations = c.max_iterations;
  return o;
}

/**
 * Solves the OCP of `kind` over the configured horizon. An age-dependent run
 * first solves the homogeneous problem; its solution is the warm start and,
 * unless beta_min is configured, fixes beta_min = (min delta*) beta0.
 */
inline OcpScenarioResult scenario_ocp(const RunConfig& c, OcpKind kind) {
  const std::size_t weeks = c.horizon_or(kDefaultWeeks);
  OcpScenarioResult out;
  out.spec = c.ocp_spec(kind, weeks);
  PiecewisePolicy guess;
  if (kind == OcpKind::AgeDependentDistancing) {
    const OcpSpec homogeneous = c.ocp_spec(OcpKind::HomogeneousDistancing, weeks);
    out.seed = solve_ocp(homogeneous, default_initial_guess(homogeneous), solve_options(c));
    if (!c.beta_min) out.spec.beta_min = derive_beta_min(distancing_series(out.seed->policy, c.p), c.p);
    guess = out.seed->policy;
    const Eigen::MatrixXd lo = out.spec.effective_beta_min();
    for (auto& u : guess.controls) u.beta = u.beta.cwiseMax(lo);
    out.seed_objective = objective_j3(guess, c.p, c.kappa);
  } else {
    guess = default_initial_guess(out.spec);
  }
  out.solution = solve_ocp(out.spec, guess, solve_options(c));
  return out;
}

/// Summary of a testing-only solution over its active phase.
struct TestingSummary {
  double active_begin_day = 0.0;
  double active_end_day = 0.0;
  double peak_mean_rate = 0.0;      ///< max over active weeks of sum_i N_i theta_i
  double average_daily_tests = 0.0; ///< mean T^tot over active-phase daily samples
  double turnpike_fraction = 0.0;   ///< share of active-phase samples with |ICU - cap| < 1% of cap
  double peak_detected = 0.0;       ///< max of T^S + T^O, agents
};

/**
 * The active phase is the span of weeks whose population-mean testing rate
 * exceeds 1% of its maximum.
 */
inline TestingSummary summarize_testing(const OcpSolution& sol, const ModelParameters& p) {
  TestingSummary out;
  const auto& policy = sol.policy;
  std::vector<double> mean_rate;
  for (const auto& u : policy.controls) mean_rate.push_back(p.N.dot(u.theta));
  const double top = mean_rate.empty() ? 0.0 : *std::max_element(mean_rate.begin(), mean_rate.end());
  if (!(top > 0.0)) return out;
  std::size_t first = mean_rate.size(), last = 0;
  for (std::size_t k = 0; k < mean_rate.size(); ++k) {
    if (mean_rate[k] > 0.01 * top) {
      first = std::min(first, k);
      last = k;
    }
  }
  const double t0 = sol.trajectory.times.front();
  out.active_begin_day = t0 + static_cast<double>(first) * policy.interval_days;
  out.active_end_day = t0 + static_cast<double>(last + 1) * policy.interval_days;
  out.peak_mean_rate = top;
  std::size_t count = 0, riding = 0;
  double tests = 0.0;
  for (std::size_t n = 0; n < sol.trajectory.size(); ++n) {
    const double t = sol.trajectory.times[n];
    if (t < out.active_begin_day || t >= out.active_end_day || t != std::floor(t)) continue;
    ++count;
    tests += sol.trajectory.t_tot[n];
    if (std::abs(sol.trajectory.icu_abs[n] - p.h_icu_max) < 0.01 * p.h_icu_max) ++riding;
  }
  out.average_daily_tests = count ? tests / static_cast<double>(count) : 0.0;
  out.turnpike_fraction = count ? static_cast<double>(riding) / static_cast<double>(count) : 0.0;
  const auto detected = detected_cases(sol.trajectory, p);
  out.peak_detected = detected.empty() ? 0.0 : *std::max_element(detected.begin(), detected.end());
  return out;
}

/// Average contact reduction of group i, 1 - (beta N)_i / (beta0 N)_i.
inline Eigen::VectorXd contact_reduction(const ControlInput& u, const ModelParameters& p) {
  const Eigen::VectorXd nominal = p.beta0 * p.N;
  const Eigen::VectorXd actual = u.beta * p.N;
  return Eigen::VectorXd::Ones(nominal.size()) - actual.cwiseQuotient(nominal);
}

/// Week with the smallest mean contact rate.
inline std::size_t most_restrictive_week(const PiecewisePolicy& policy, const ModelParameters& p) {
  const auto d = distancing_series(policy, p);
  return static_cast<std::size_t>(std::min_element(d.begin(), d.end()) - d.begin());
}

// --------------------------------------------------------------------- MPC

/// Occupancy fraction at which the ICU counts as having reached its cap.
inline constexpr double kCapReachedFraction = 0.9;

/// First sample day with ICU at or above `fraction` of the cap.
inline std::optional<double> first_cap_day(const Trajectory& traj, double cap, double fraction = kCapReachedFraction) {
  for (std::size_t n = 0; n < traj.size(); ++n) {
    if (traj.icu_abs[n] >= fraction * cap) return traj.times[n];
  }
  return std::nullopt;
}

/// Last sample day with ICU at or above `fraction` of the cap.
inline std::optional<double> last_cap_day(const Trajectory& traj, double cap, double fraction = kCapReachedFraction) {
  for (std::size_t n = traj.size(); n-- > 0;) {
    if (traj.icu_abs[n] >= fraction * cap) return traj.times[n];
  }
  return std::nullopt;
}

inline MpcConfig mpc_config(const RunConfig& c, OcpKind kind, std::size_t k_weeks, std::size_t total_weeks,
                            const std::optional<Eigen::MatrixXd>& beta_min = std::nullopt) {
  MpcConfig m;
  m.ocp = c.ocp_spec(kind, k_weeks);
  if (beta_min) m.ocp.beta_min = *beta_min;
  m.k_weeks = k_weeks;
  m.total_weeks = total_weeks;
  m.warm_start = c.warm_start;
  m.solve = solve_options(c);
  return m;
}

/**
 * beta_min of age-dependent MPC runs: configured, or derived from the
 * homogeneous open-loop solution over the default horizon.
 */
inline Eigen::MatrixXd mpc_beta_min(const RunConfig& c) {
  if (c.beta_min) return *c.beta_min;
  const OcpSpec homogeneous = c.ocp_spec(OcpKind::HomogeneousDistancing, c.horizon_or(kDefaultWeeks));
  const OcpSolution sol = solve_ocp(homogeneous, default_initial_guess(homogeneous), solve_options(c));
  return derive_beta_min(distancing_series(sol.policy, c.p), c.p);
}

struct MpcRun {
  std::size_t k_weeks = 0;
  MpcResult result;
  double distancing_cost = 0.0;
  std::optional<double> first_cap_day;
  std::optional<double> last_cap_day;
};

inline MpcRun summarize_mpc(const RunConfig& c, OcpKind kind, std::size_t k, MpcResult r) {
  MpcRun run;
  run.k_weeks = k;
  run.distancing_cost = distancing_cost(r.applied, c.p, kind);
  run.first_cap_day = first_cap_day(r.trajectory, c.p.h_icu_max);
  run.last_cap_day = last_cap_day(r.trajectory, c.p.h_icu_max);
  run.result = std::move(r);
  return run;
}

inline std::size_t default_mpc_weeks(const RunConfig& c, OcpKind kind) {
  if (c.total_weeks) return *c.total_weeks;
  return kind == OcpKind::AgeDependentDistancing ? kMpcAgeDependentWeeks : c.horizon_or(kDefaultWeeks);
}

inline MpcRun scenario_mpc(const RunConfig& c, OcpKind kind, std::size_t k_weeks,
                           const std::optional<Eigen::MatrixXd>& beta_min = std::nullopt) {
  std::optional<Eigen::MatrixXd> lo = beta_min;
  if (!lo && kind == OcpKind::AgeDependentDistancing) lo = mpc_beta_min(c);
  const std::size_t weeks = default_mpc_weeks(c, kind);
  const MpcConfig m = mpc_config(c, kind, std::min(k_weeks, weeks), weeks, lo);
  return summarize_mpc(c, kind, m.k_weeks, run_mpc(m, initial_state(c.p, c.e0, c.i0)));
}

/// Runs `points` through `fn` on up to `workers` threads; results keep the input order.
template <typename T, typename Fn>
auto run_pool(const std::vector<T>& points, Fn fn, std::size_t workers = 0) {
  using R = decltype(fn(points.front()));
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::optional<R>> slots(points.size());
  for (std::size_t start = 0; start < points.size(); start += workers) {
    std::vector<std::future<R>> batch;
    const std::size_t end = std::min(points.size(), start + workers);
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, fn, points[i]));
    }
    for (std::size_t i = start; i < end; ++i) slots[i] = batch[i - start].get();
  }
  std::vector<R> out;
  out.reserve(points.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// The K ladder for `kind`; beta_min is derived once and shared by all rungs.
inline std::vector<MpcRun> scenario_mpc_ladder(const RunConfig& c, OcpKind kind, std::size_t workers = 0) {
  std::optional<Eigen::MatrixXd> lo;
  if (kind == OcpKind::AgeDependentDistancing) lo = mpc_beta_min(c);
  std::vector<std::size_t> ks;
  for (double k : c.k_list) ks.push_back(static_cast<std::size_t>(k));
  return run_pool(ks, [&](std::size_t k) { return scenario_mpc(c, kind, k, lo); }, workers);
}

// ------------------------------------------------------------------ sweeps

struct SweepPoint {
  double t_max_factor = 1.0;
  double h_icu_max = 0.0;
  MpcRun run;
  double total_tests = 0.0;          ///< sum of daily T^tot samples over the run
  double min_test_utilisation = 0.0; ///< min over all but the last interval of the interval peak of T^tot / T^max
  bool feasible = false;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<std::pair<std::string, bool>> checks;  ///< monotonicity summaries
};

inline SweepPoint sweep_point(const RunConfig& base, OcpKind kind, double t_factor, double hmax) {
  RunConfig c = base;
  c.p.t_max *= t_factor;
  c.p.h_icu_max = hmax;
  SweepPoint pt;
  pt.t_max_factor = t_factor;
  pt.h_icu_max = hmax;
  try {
    pt.run = scenario_mpc(c, kind, c.k_weeks);
    pt.feasible = pt.run.result.status != MpcStatus::Infeasible;
  } catch (const Error&) {
    pt.feasible = false;
    return pt;
  }
  const Trajectory& tr = pt.run.result.trajectory;
  for (std::size_t n = 0; n < tr.size(); ++n) {
    if (tr.times[n] == std::floor(tr.times[n])) pt.total_tests += tr.t_tot[n];
  }
  // The final step sees a one-interval horizon, so tests bought there cannot pay off.
  const auto& steps = pt.run.result.steps;
  pt.min_test_utilisation = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    const double start = static_cast<double>(steps[i].index) * c.interval_days;
    double peak = 0.0;
    for (std::size_t n = 0; n < tr.size(); ++n) {
      if (tr.times[n] >= start && tr.times[n] < start + c.interval_days) peak = std::max(peak, tr.t_tot[n]);
    }
    pt.min_test_utilisation = std::min(pt.min_test_utilisation, peak / c.p.t_max);
  }
  return pt;
}

/// True if `v` never increases by more than rel_tol of its first value.
inline bool nonincreasing(const std::vector<double>& v, double rel_tol = 1e-3) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] + rel_tol * std::abs(v.front())) return false;
  }
  return true;
}

/// Homogeneous MPC with horizon k_weeks for every T^max factor.
inline SweepResult sweep_tmax(const RunConfig& c, std::size_t workers = 0) {
  SweepResult out;
  out.points = run_pool(
      c.tmax_factors, [&](double f) { return sweep_point(c, OcpKind::HomogeneousDistancing, f, c.p.h_icu_max); }, workers);
  std::vector<double> cost;
  bool all = true;
  for (const auto& pt : out.points) {
    cost.push_back(pt.run.distancing_cost);
    all = all && pt.feasible;
  }
  out.checks.emplace_back("all_points_feasible", all);
  out.checks.emplace_back("cost_nonincreasing_in_tmax", all && nonincreasing(cost));
  return out;
}

/// Age-dependent MPC for every (T^max factor, H^ICU_max) pair, H varying fastest; beta_min is derived per point.
inline SweepResult sweep_hmax(const RunConfig& c, std::size_t workers = 0) {
  std::vector<std::pair<double, double>> grid;
  for (double f : c.tmax_factors) {
    for (double h : c.hmax_list) grid.emplace_back(f, h);
  }
  SweepResult out;
  out.points = run_pool(
      grid, [&](const std::pair<double, double>& g) { return sweep_point(c, OcpKind::AgeDependentDistancing, g.first, g.second); },
      workers);
  const std::size_t nh = c.hmax_list.size();
  for (std::size_t f = 0; f < c.tmax_factors.size(); ++f) {
    std::vector<double> cost;
    bool all = true;
    for (std::size_t h = 0; h < nh; ++h) {
      cost.push_back(out.points[f * nh + h].run.distancing_cost);
      all = all && out.points[f * nh + h].feasible;
    }
    const std::string tag = "tmax_factor_" + format_number(c.tmax_factors[f]);
    bool decreasing = all;
    for (std::size_t h = 1; h < nh && decreasing; ++h) decreasing = cost[h] < cost[h - 1];
    out.checks.emplace_back(tag + "_all_points_feasible", all);
    out.checks.emplace_back(tag + "_cost_decreasing_in_hmax", decreasing);
    if (nh >= 3) {
      // Benefit of the last doubling against the one before it.
      const double last = cost[nh - 2] - cost[nh - 1];
      const double prior = cost[nh - 3] - cost[nh - 2];
      out.checks.emplace_back(tag + "_saturation", all && prior > 0.0 && last < 0.25 * prior);
    }
  }
  return out;
}

}  // namespace seitphr

#endif  // SEITPHR_SCENARIOS_HPP
