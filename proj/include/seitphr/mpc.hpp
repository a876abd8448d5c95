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
#ifndef SEITPHR_MPC_HPP
#define SEITPHR_MPC_HPP

/**
 * @file
 * @brief Receding-horizon control around the weekly OCPs.
 *
 * Each step solves the OCP over min(K, remaining) intervals from the current
 * plant state, applies the first interval and advances the plant, which is
 * the simulator itself. Once the prediction window reaches the end of the run
 * the horizon shrinks; the previous plan's tail is then reused verbatim
 * because, with an exact plant, it solves the shrunken problem already.
 */

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include "seitphr/ocp.hpp"

namespace seitphr {

struct MpcConfig {
  /// Kind, weights, bounds, parameters and grids; x0, t0 and tf are set per step.
  OcpSpec ocp;
  std::size_t k_weeks = 12;
  std::size_t total_weeks = 104;
  bool warm_start = true;
  /// Warm start of the first step; the OCP default guess if empty.
  std::optional<PiecewisePolicy> initial_guess;
  OcpSolveOptions solve;

  void validate() const {
    if (k_weeks < 1) throw ValidationError("mpc: k_weeks must be at least 1");
    if (total_weeks < k_weeks) throw ValidationError("mpc: total_weeks must be at least k_weeks");
    OcpSpec probe = ocp;
    probe.t0 = 0.0;
    probe.tf = static_cast<double>(k_weeks) * ocp.interval_days;
    probe.validate();
  }
};

enum class MpcStatus { Completed, Infeasible, NonConvergence };

inline std::string_view to_string(MpcStatus s) {
  switch (s) {
    case MpcStatus::Completed: return "completed";
    case MpcStatus::Infeasible: return "infeasible";
    case MpcStatus::NonConvergence: return "nonconvergence";
  }
  return "?";
}

struct MpcStep {
  std::size_t index = 0;
  double t_days = 0.0;
  std::size_t horizon_weeks = 0;
  bool reused = false;  ///< tail of the previous plan applied without a solve
  OcpStatus status = OcpStatus::Converged;
  double objective = 0.0;
  SolverDiagnostics diagnostics;
  ControlInput applied;
  double icu_abs = 0.0;  ///< plant ICU occupancy at the start of the step
  double t_tot = 0.0;    ///< plant T^tot at the start of the step under the applied control
};

struct MpcResult {
  MpcStatus status = MpcStatus::Completed;
  std::optional<std::size_t> failed_step;  ///< first step whose OCP had no feasible solution
  PiecewisePolicy applied;
  Trajectory trajectory;  ///< closed loop over the applied intervals
  std::vector<MpcStep> steps;
};

namespace detail {

/// Shifts a plan by `shift` intervals and pads with its last control up to `length`.
inline PiecewisePolicy shifted_plan(const PiecewisePolicy& plan, std::size_t shift, std::size_t length) {
  PiecewisePolicy out{plan.interval_days, {}};
  out.controls.reserve(length);
  for (std::size_t k = 0; k < length; ++k) out.controls.push_back(plan.interval(k + shift));
  return out;
}

}  // namespace detail

/**
 * Runs the closed loop from x0 for total_weeks intervals. A step whose OCP
 * ends infeasible aborts the run and is reported as a recursive-feasibility
 * failure; a step that stops short of stationarity but is feasible is applied
 * and the run finishes with NonConvergence.
 */
inline MpcResult run_mpc(const MpcConfig& config, const StateVector& x0) {
  config.validate();
  const ModelParameters& p = config.ocp.p;
  const double dt = config.ocp.interval_days;
  const double feas_tol = config.solve.nlp.feasibility_tol;

  MpcResult out;
  out.applied.interval_days = dt;
  StateVector x = x0;
  PiecewisePolicy plan;
  std::size_t plan_start = 0;
  std::size_t plan_end = 0;
  bool any_nonconvergence = false;

  for (std::size_t j = 0; j < config.total_weeks; ++j) {
    const std::size_t horizon = std::min(config.k_weeks, config.total_weeks - j);
    MpcStep step;
    step.index = j;
    step.t_days = static_cast<double>(j) * dt;
    step.horizon_weeks = horizon;
    step.icu_abs = detail::aggregate_icu(x.data(), p);

    if (j > 0 && plan_end == config.total_weeks && j + horizon == plan_end) {
      step.reused = true;
    } else {
      OcpSpec spec = config.ocp;
      spec.x0 = x;
      spec.t0 = step.t_days;
      spec.tf = step.t_days + static_cast<double>(horizon) * dt;
      PiecewisePolicy guess;
      if (j == 0) {
        guess = config.initial_guess ? detail::shifted_plan(*config.initial_guess, 0, horizon) : default_initial_guess(spec);
      } else if (config.warm_start) {
        guess = detail::shifted_plan(plan, j - plan_start, horizon);
      } else {
        guess = default_initial_guess(spec);
      }
      OcpSolveOptions options = config.solve;
      options.compute_ngm = false;
      const OcpSolution sol = solve_ocp(spec, guess, options);
      step.status = sol.status;
      step.objective = sol.objective;
      step.diagnostics = sol.diagnostics;
      if (!sol.feasible(feas_tol)) {
        step.status = OcpStatus::Infeasible;
        out.steps.push_back(step);
        out.status = MpcStatus::Infeasible;
        out.failed_step = j;
        break;
      }
      if (sol.status != OcpStatus::Converged) any_nonconvergence = true;
      plan = sol.policy;
      plan_start = j;
      plan_end = j + horizon;
    }

    step.applied = plan.controls[j - plan_start];
    step.t_tot = detail::total_tests(x.data(), step.applied.theta, p);
    out.applied.controls.push_back(step.applied);
    out.steps.push_back(step);

    const PiecewisePolicy one{dt, {step.applied}};
    const Trajectory leg = simulate(x, one, p, dt, config.ocp.step_days, {.compute_ngm = false});
    x = leg.states.back();
  }

  if (out.status == MpcStatus::Completed && any_nonconvergence) out.status = MpcStatus::NonConvergence;
  if (!out.applied.controls.empty()) {
    out.trajectory = simulate(x0, out.applied, p, static_cast<double>(out.applied.size()) * dt, config.ocp.step_days,
                              {.compute_ngm = config.solve.compute_ngm});
  }
  return out;
}

}  // namespace seitphr

#endif  // SEITPHR_MPC_HPP
