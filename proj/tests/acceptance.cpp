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
// Acceptance harness: one PASS/FAIL line per criterion; exit status 0 iff all selected criteria pass.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seitphr/seitphr.hpp"
#include "support.hpp"

namespace {

using namespace seitphr;

// Pinned tolerances and brackets.
constexpr double kWeightedContactTarget = 0.4167;
constexpr double kWeightedContactTol = 5e-4;
constexpr double kR0Target = 2.5;
constexpr double kR0Tol = 0.01;
constexpr double kBaselinePeakFloor = 100000.0;
constexpr double kThresholdLo = 0.47;
constexpr double kThresholdHi = 0.50;
constexpr double kStrictDelta = 0.40;
constexpr double kFeasTol = 1e-6;
constexpr double kTurnpikeShare = 0.8;
constexpr double kTestingRateLo = 0.35;
constexpr double kTestingRateHi = 0.65;
constexpr double kDailyTestsFloor = 1e7;
constexpr double kMinDeltaLo = 0.25;
constexpr double kMinDeltaHi = 0.35;
constexpr double kUntestedGroupsShare = 0.05;
constexpr double kDistancingActive = 0.99;
constexpr double kTestCapBand = 0.01;
constexpr double kOpenLoopTol = 1e-9;
constexpr double kLadderTrendSlack = 0.05;
constexpr double kCapSlack = 1e-6;
constexpr double kPinnedUtilisation = 0.99;
constexpr double kConservationTol = 1e-9;
constexpr double kNonnegativityTol = 1e-9;
constexpr double kRk4RatioLo = 13.0;
constexpr double kRk4RatioHi = 19.0;
constexpr double kNgmTol = 1e-8;
constexpr double kGradientTol = 1e-4;

#ifndef SEITPHR_CLI_PATH
#define SEITPHR_CLI_PATH "seitphr"
#endif

/// Accumulates the sub-checks of one criterion into a single line.
// A waived check still reports FAILED and fails the criterion line; it only leaves the exit code alone.
class Verdict {
 public:
  explicit Verdict(std::vector<std::string> waived = {}) : waived_(std::move(waived)) {}

  void check(bool ok, const std::string& text) {
    pass_ = pass_ && ok;
    if (!ok && !is_waived(text)) unwaived_failure_ = true;
    if (!detail_.empty()) detail_ += "; ";
    detail_ += text + (ok ? "" : is_waived(text) ? " [FAILED, waived]" : " [FAILED]");
  }
  bool pass() const { return pass_; }
  bool acceptable() const { return !unwaived_failure_; }
  const std::string& detail() const { return detail_; }

 private:
  bool is_waived(const std::string& text) const {
    return std::any_of(waived_.begin(), waived_.end(), [&](const std::string& w) { return text.find(w) != std::string::npos; });
  }

  std::vector<std::string> waived_;
  bool pass_ = true;
  bool unwaived_failure_ = false;
  std::string detail_;
};

std::string num(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

RunConfig base_config() { return apply_config({}); }

void criterion_parameters(Verdict& v) {
  const auto p = default_parameters();
  double weighted = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) weighted += p.N[i] * p.N[j] * p.beta0(i, j);
  }
  v.check(std::abs(weighted - kWeightedContactTarget) <= kWeightedContactTol,
          "sum N_i N_j beta0_ij = " + num(weighted) + " (target 0.4167 +- 5e-4)");
  v.check(std::abs(6.0 * weighted - kR0Target) <= kR0Tol, "R0 = 6 * sum = " + num(6.0 * weighted) + " (target 2.5 +- 0.01)");
}

void criterion_baseline(Verdict& v) {
  const RunConfig c = base_config();
  const BaselineResult r = scenario_baseline(c);
  const Trajectory& a = r.three_groups;
  const Trajectory& b = r.one_group;
  v.check(a.size() == 729 && a.times[1] - a.times[0] == 1.0, "104 weeks at 1-day steps");
  v.check(a.peak_icu() > kBaselinePeakFloor, "3-group ICU peak " + num(a.peak_icu()) + " > 100000");
  v.check(a.peak_icu_day() < b.peak_icu_day(),
          "peak day " + num(a.peak_icu_day()) + " earlier than 1-group " + num(b.peak_icu_day()));
  v.check(a.peak_icu() < b.peak_icu(), "peak lower than 1-group " + num(b.peak_icu()));
}

void criterion_threshold(Verdict& v) {
  const RunConfig c = base_config();
  const ThresholdResult t = find_max_feasible_delta(c, c.bisect_lo, c.bisect_hi, c.bisect_tol, kConstantDeltaWeeks);
  v.check(c.p.h_icu_max == 10000.0, "ICU cap 10000 over 156 weeks");
  v.check(t.delta >= kThresholdLo && t.delta <= kThresholdHi,
          "max feasible delta " + num(t.delta) + " in [0.47, 0.50] (infeasible at " + num(t.infeasible_delta) + ")");
  // The bracket really separates feasible from infeasible.
  const StateVector x0 = initial_state(c.p, c.e0, c.i0);
  const double below = run_constant(c, c.p, x0, t.delta, kConstantDeltaWeeks).peak_icu();
  const double above = run_constant(c, c.p, x0, t.infeasible_delta, kConstantDeltaWeeks).peak_icu();
  v.check(below <= c.p.h_icu_max && above > c.p.h_icu_max,
          "peaks " + num(below) + " / " + num(above) + " straddle the cap");
}

void criterion_rebound(Verdict& v) {
  const RunConfig c = base_config();
  const ThresholdResult t = find_max_feasible_delta(c, c.bisect_lo, c.bisect_hi, c.bisect_tol, kConstantDeltaWeeks);
  const ReboundResult strict = lift_restrictions(c, kStrictDelta);
  const ReboundResult loose = lift_restrictions(c, t.delta);
  v.check(c.lift_after_weeks == 156, "lift after 156 weeks");
  v.check(strict.peak_after > strict.trajectory.icu_abs[static_cast<std::size_t>(156 * 7)],
          "second wave after lifting delta = 0.40 (post-lift peak " + num(strict.peak_after) + " on day " +
              num(strict.peak_after_day) + ")");
  v.check(strict.peak_after > loose.peak_after,
          "post-lift peak for 0.40 exceeds threshold delta " + num(t.delta) + " (" + num(loose.peak_after) + ")");
}

void criterion_testing(Verdict& v) {
  const RunConfig c = base_config();
  const OcpScenarioResult r = scenario_ocp(c, OcpKind::TestingOnly);
  const OcpSolution& sol = r.solution;
  const TestingSummary s = summarize_testing(sol, c.p);
  v.check(sol.status != OcpStatus::Infeasible && sol.feasible(kFeasTol),
          std::string("status ") + std::string(to_string(sol.status)) + ", violation " + num(sol.diagnostics.max_violation));
  v.check(s.turnpike_fraction >= kTurnpikeShare,
          "active days " + num(s.active_begin_day) + ".." + num(s.active_end_day) + " within 1% of cap: " +
              num(s.turnpike_fraction) + " >= 0.8");
  v.check(s.peak_mean_rate >= kTestingRateLo && s.peak_mean_rate <= kTestingRateHi,
          "population-mean testing rate " + num(s.peak_mean_rate) + " in [0.35, 0.65]");
  v.check(s.average_daily_tests > kDailyTestsFloor, "average daily tests " + num(s.average_daily_tests) + " > 1e7");
  const double r_end = sol.trajectory.r_ngm.back();
  v.check(r_end < 1.0, "terminal R_NGM " + num(r_end) + " < 1");
}

/// Per-interval peak of T^tot, including the left limit at the interval end.
std::vector<double> interval_peak_tests(const OcpSolution& sol, const ModelParameters& p) {
  const Trajectory& tr = sol.trajectory;
  const std::size_t per = static_cast<std::size_t>(sol.policy.interval_days / (tr.times[1] - tr.times[0]));
  const std::vector<double> ends = interval_end_tests(tr, sol.policy, p);
  std::vector<double> out(sol.policy.size(), 0.0);
  for (std::size_t n = 0; n < tr.size(); ++n) {
    const std::size_t k = std::min(n / per, out.size() - 1);
    out[k] = std::max(out[k], tr.t_tot[n]);
  }
  for (std::size_t k = 0; k < ends.size(); ++k) out[k] = std::max(out[k], ends[k]);
  return out;
}

void criterion_homogeneous(Verdict& v) {
  const RunConfig c = base_config();
  const OcpSolution sol = scenario_ocp(c, OcpKind::HomogeneousDistancing).solution;
  v.check(sol.status != OcpStatus::Infeasible && sol.feasible(kFeasTol),
          std::string("status ") + std::string(to_string(sol.status)) + ", J2 " + num(sol.objective));
  const auto delta = distancing_series(sol.policy, c.p);
  const double dmin = *std::min_element(delta.begin(), delta.end());
  v.check(dmin >= kMinDeltaLo && dmin <= kMinDeltaHi, "min delta " + num(dmin) + " in [0.25, 0.35]");

  // Controlled tests n_pop theta_i U_i per group, trapezoid over days.
  Eigen::Vector3d per_group = Eigen::Vector3d::Zero();
  const Trajectory& tr = sol.trajectory;
  const std::size_t per = static_cast<std::size_t>(sol.policy.interval_days / (tr.times[1] - tr.times[0]));
  for (std::size_t n = 0; n < tr.size(); ++n) {
    const double w = (n == 0 || n + 1 == tr.size()) ? 0.5 : 1.0;
    const ControlInput& u = sol.policy.interval(n / per);
    for (std::size_t g = 0; g < 3; ++g) {
      per_group[static_cast<Eigen::Index>(g)] += w * c.p.n_pop * u.theta[static_cast<Eigen::Index>(g)] *
                                                 tr.states[n].group(g).untested();
    }
  }
  const double share = per_group.sum() > 0.0 ? (per_group[0] + per_group[2]) / per_group.sum() : 1.0;
  v.check(share < kUntestedGroupsShare, "groups 1 and 3 share of controlled tests " + num(share) + " < 0.05");

  const std::vector<double> peaks = interval_peak_tests(sol, c.p);
  std::size_t active = 0, pinned = 0;
  double worst = 1.0;
  for (std::size_t k = 0; k < delta.size(); ++k) {
    if (delta[k] >= kDistancingActive) continue;
    ++active;
    const double ratio = peaks[k] / c.p.t_max;
    worst = std::min(worst, ratio);
    if (std::abs(ratio - 1.0) <= kTestCapBand) ++pinned;
  }
  v.check(active > 0 && pinned == active, "T^tot peak within 1% of T^max on " + std::to_string(pinned) + "/" +
                                              std::to_string(active) + " distancing weeks (worst " + num(worst) + ")");
}

void criterion_age_dependent(Verdict& v) {
  const RunConfig c = base_config();
  const OcpScenarioResult r = scenario_ocp(c, OcpKind::AgeDependentDistancing);
  const OcpSolution& sol = r.solution;
  const auto seed_delta = distancing_series(r.seed->policy, c.p);
  const double dmin = *std::min_element(seed_delta.begin(), seed_delta.end());
  v.check((r.spec.beta_min - dmin * c.p.beta0).cwiseAbs().maxCoeff() <= 1e-15,
          "beta_min = " + num(dmin) + " beta0 from the homogeneous solution");
  v.check(sol.status != OcpStatus::Infeasible && sol.feasible(kFeasTol),
          std::string("status ") + std::string(to_string(sol.status)));
  v.check(sol.objective <= r.seed_objective, "J3 " + num(sol.objective) + " <= seed " + num(r.seed_objective));
  const std::size_t week = most_restrictive_week(sol.policy, c.p);
  const Eigen::VectorXd red = contact_reduction(sol.policy.controls[week], c.p);
  v.check(red[2] > red[1], "week " + std::to_string(week) + " reductions (" + num(red[0]) + ", " + num(red[1]) + ", " +
                               num(red[2]) + "): group 3 above group 2");
  const double r_end = sol.trajectory.r_ngm.back();
  v.check(r_end < 1.0, "terminal R_NGM " + num(r_end) + " < 1");
}

std::string beta_min_config(const Eigen::MatrixXd& lo) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index i = 0; i < lo.rows(); ++i) {
    for (Eigen::Index j = 0; j < lo.cols(); ++j) out << "matrix.beta_min." << i + 1 << '.' << j + 1 << " = " << lo(i, j) << '\n';
  }
  return out.str();
}

void criterion_mpc(Verdict& v) {
  RunConfig c = base_config();
  c.k_list = {1, 2, 3, 6, 12, 26};
  const OcpKind kind = OcpKind::AgeDependentDistancing;
  const Eigen::MatrixXd lo = mpc_beta_min(c);
  const std::size_t weeks = default_mpc_weeks(c, kind);

  // Full horizon against the open-loop solve of the same problem.
  const MpcConfig full = mpc_config(c, kind, weeks, weeks, lo);
  OcpSpec spec = full.ocp;
  spec.tf = static_cast<double>(weeks) * spec.interval_days;
  OcpSolveOptions options = full.solve;
  options.compute_ngm = false;
  const OcpSolution open = solve_ocp(spec, default_initial_guess(spec), options);
  const MpcResult closed = run_mpc(full, spec.x0);
  double diff = closed.applied.size() == open.policy.size() ? 0.0 : 1.0;
  for (std::size_t k = 0; k < std::min(closed.applied.size(), open.policy.size()); ++k) {
    diff = std::max(diff, (closed.applied.controls[k].beta - open.policy.controls[k].beta).cwiseAbs().maxCoeff());
    diff = std::max(diff, (closed.applied.controls[k].theta - open.policy.controls[k].theta).cwiseAbs().maxCoeff());
  }
  v.check(diff <= kOpenLoopTol, "K = " + std::to_string(weeks) + " matches open loop, max control gap " + num(diff));

  const auto runs = scenario_mpc_ladder(c, kind, 1);
  auto rung = [&](std::size_t k) -> const MpcRun& {
    for (const auto& r : runs) {
      if (r.k_weeks == k) return r;
    }
    throw std::runtime_error("missing rung");
  };
  const MpcRun& k3 = rung(3);
  const MpcRun& k12 = rung(12);
  v.check(k3.first_cap_day && k12.first_cap_day && *k3.first_cap_day < *k12.first_cap_day,
          "ICU reaches 90% of cap on day " + (k3.first_cap_day ? num(*k3.first_cap_day) : "never") + " (K=3) vs " +
              (k12.first_cap_day ? num(*k12.first_cap_day) : "never") + " (K=12)");

  std::vector<double> cost;
  bool usable = true;
  std::string listing;
  for (std::size_t k : {6, 12, 26}) {
    const MpcRun& r = rung(k);
    usable = usable && r.result.status != MpcStatus::Infeasible;
    cost.push_back(r.distancing_cost);
    listing += (listing.empty() ? "" : ", ") + std::string("K=") + std::to_string(k) + ": " + num(r.distancing_cost) +
               " (" + std::string(to_string(r.result.status)) + ")";
  }
  bool trend = usable && cost.back() <= cost.front();
  for (std::size_t i = 1; i < cost.size(); ++i) trend = trend && cost[i] <= cost[i - 1] * (1.0 + kLadderTrendSlack);
  v.check(trend, "distancing cost " + listing);

  bool clean = true;
  std::optional<std::size_t> failing;
  for (std::size_t k : {1, 2}) {
    const MpcRun& r = rung(k);
    const double peak = r.result.trajectory.peak_icu();
    const bool within = peak <= c.p.h_icu_max * (1.0 + kCapSlack);
    if (r.result.status == MpcStatus::Infeasible) {
      clean = clean && r.result.failed_step.has_value() && within;
      if (!failing) failing = k;
    } else {
      clean = clean && within;
    }
  }
  std::string cli_note = "no K <= 2 run failed";
  if (failing) {
    const auto dir = std::filesystem::temp_directory_path() / "seitphr_acceptance_mpc";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_text_file(dir / "run.cfg", beta_min_config(lo));
    const std::string cmd = std::string(SEITPHR_CLI_PATH) + " --config " + (dir / "run.cfg").string() + " --out " +
                            (dir / "out").string() + " mpc age-dependent -k " + std::to_string(*failing) +
                            " > /dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    clean = clean && code == 2 && std::filesystem::exists(dir / "out" / "manifest.json");
    cli_note = "K=" + std::to_string(*failing) + " stops at step " + std::to_string(*rung(*failing).result.failed_step) +
               ", CLI exit code " + std::to_string(code);
    std::filesystem::remove_all(dir);
  }
  v.check(clean, "short horizons never exceed the cap; " + cli_note);
}

void criterion_sweeps(Verdict& v) {
  const RunConfig c = base_config();
  v.check(c.k_weeks == 12, "K = 12");
  const SweepResult t = sweep_tmax(c, 1);
  std::string costs;
  for (const auto& pt : t.points) costs += (costs.empty() ? "" : ", ") + num(pt.run.distancing_cost);
  for (const auto& [name, ok] : t.checks) v.check(ok, name);
  v.check(true, "cost by T^max factor: " + costs);

  const SweepResult h = sweep_hmax(c, 1);
  for (const auto& [name, ok] : h.checks) v.check(ok, name);
  const std::size_t nh = c.hmax_list.size();
  for (std::size_t f = 0; f < c.tmax_factors.size(); ++f) {
    std::string costs;
    for (std::size_t i = 0; i < nh; ++i) costs += (i ? ", " : "") + num(h.points[f * nh + i].run.distancing_cost);
    std::string ratio = "n/a";
    if (nh >= 3) {
      const double last = h.points[f * nh + nh - 2].run.distancing_cost - h.points[f * nh + nh - 1].run.distancing_cost;
      const double prior = h.points[f * nh + nh - 3].run.distancing_cost - h.points[f * nh + nh - 2].run.distancing_cost;
      ratio = num(last / prior);
    }
    v.check(true, "T^max factor " + num(c.tmax_factors[f]) + ": cost by H " + costs + ", last/prior benefit " + ratio);
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& pt : h.points) {
    if (pt.h_icu_max == 5000.0) worst = std::min(worst, pt.min_test_utilisation);
  }
  v.check(worst >= kPinnedUtilisation, "H = 5000: min interval peak T^tot / T^max before the last interval " + num(worst) + " >= 0.99");
}

void criterion_properties(Verdict& v) {
  const auto p = default_parameters();
  std::mt19937_64 rng(2024);

  double conservation = 0.0, negative = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 3; ++trial) {
    const PiecewisePolicy policy = seitphr::testing::random_policy(p, rng, 104);
    const Trajectory t = simulate(default_initial_state(p), policy, p, 728.0, 1.0, {.compute_ngm = false});
    for (std::size_t n = 0; n < t.size(); ++n) {
      conservation = std::max(conservation, std::abs(t.states[n].sum() - 1.0));
      negative = std::min(negative, t.states[n].values().minCoeff());
      if (n == 0) continue;
      for (std::size_t g = 0; g < 3; ++g) {
        monotone = monotone && t.states[n](g, Compartment::RU) >= t.states[n - 1](g, Compartment::RU) &&
                   t.states[n](g, Compartment::RK) >= t.states[n - 1](g, Compartment::RK);
      }
    }
  }
  v.check(conservation <= kConservationTol, "conservation " + num(conservation));
  v.check(negative >= -kNonnegativityTol, "min entry " + num(negative));
  v.check(monotone, "R_U, R_K monotone");

  const Trajectory warm = simulate(default_initial_state(p), PiecewisePolicy::constant(lifted_control(p), 12), p, 84.0,
                                   1.0, {.compute_ngm = false});
  ControlInput u = lifted_control(p);
  u.beta *= 0.6;
  u.theta.setConstant(0.05);
  auto end = [&](double h) {
    return simulate(warm.states.back(), PiecewisePolicy::constant(u, 2), p, 14.0, h, {.compute_ngm = false})
        .states.back()
        .values();
  };
  const Eigen::VectorXd ref = end(1.0 / 128.0);
  const double ratio = (end(0.5) - ref).norm() / (end(0.25) - ref).norm();
  v.check(ratio > kRk4RatioLo && ratio < kRk4RatioHi, "RK4 step-halving error ratio " + num(ratio));

  double ngm_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const StateVector x = seitphr::testing::random_state(p, rng);
    const ControlInput w = seitphr::testing::random_control(p, rng);
    const double dense = seitphr::testing::dense_ngm_radius(x, w, p);
    ngm_gap = std::max(ngm_gap, std::abs(ngm_reproduction_number(x, w, p) - dense) / std::max(1.0, dense));
  }
  v.check(ngm_gap <= kNgmTol, "NGM vs dense eigensolver " + num(ngm_gap));

  double grad_gap = 0.0;
  const OcpKind kinds[] = {OcpKind::TestingOnly, OcpKind::HomogeneousDistancing, OcpKind::AgeDependentDistancing};
  for (int trial = 0; trial < 10; ++trial) {
    OcpSpec spec;
    spec.kind = kinds[trial % 3];
    spec.p = p;
    spec.x0 = initial_state(p, 3e-3, 3e-3);
    spec.tf = 28.0;
    if (spec.kind == OcpKind::AgeDependentDistancing) spec.beta_min = 0.2 * p.beta0;
    Transcription tr(spec);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    Eigen::VectorXd z(tr.n_variables());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double hi = std::isfinite(tr.upper()[i]) ? tr.upper()[i] : tr.lower()[i] + 0.5;
      z[i] = tr.lower()[i] + unit(rng) * (hi - tr.lower()[i]);
    }
    Eigen::VectorXd w(tr.n_constraints());
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = unit(rng);
    double f = 0.0;
    Eigen::VectorXd g;
    tr.evaluate(z, f, g);
    const Eigen::VectorXd exact = tr.gradient(1.0, w);
    const Eigen::VectorXd fd = finite_difference_gradient(tr, z, 1.0, w, 1e-7);
    grad_gap = std::max(grad_gap, (exact - fd).lpNorm<Eigen::Infinity>() / std::max(1.0, fd.lpNorm<Eigen::Infinity>()));
  }
  v.check(grad_gap <= kGradientTol, "adjoint vs finite-difference gradient " + num(grad_gap));

  const PiecewisePolicy policy = seitphr::testing::random_policy(p, rng, 20);
  auto render = [&] {
    const Trajectory t = simulate(default_initial_state(p), policy, p, 140.0);
    return trajectory_csv(t) + policy_csv(policy, p);
  };
  v.check(render() == render(), "byte-identical reruns");
}

struct Criterion {
  const char* title;
  std::function<void(Verdict&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"parameter recovery", criterion_parameters},
      {"baseline severity", criterion_baseline},
      {"constant-delta threshold", criterion_threshold},
      {"rebound after lifting", criterion_rebound},
      {"testing-only OCP", criterion_testing},
      {"homogeneous OCP", criterion_homogeneous},
      {"age-dependent OCP", criterion_age_dependent},
      {"MPC horizon ladder", criterion_mpc},
      {"sensitivity sweeps", criterion_sweeps},
      {"property suites", criterion_properties},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  std::vector<std::string> waived;
  app.add_option("--criterion", selected, "criterion numbers (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--waive", waived, "check names whose failure does not affect the exit code");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) {
    for (int i = 1; i <= static_cast<int>(criteria().size()); ++i) selected.push_back(i);
  }
  bool all = true;
  for (int id : selected) {
    const Criterion& c = criteria()[static_cast<std::size_t>(id - 1)];
    Verdict v(waived);
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s (%.1f s): %s\n", id, v.pass() ? "PASS" : "FAIL", c.title, secs, v.detail().c_str());
    std::fflush(stdout);
    all = all && v.acceptable();
  }
  return all ? 0 : 1;
}
