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
#ifndef SEITPHR_SIMULATOR_HPP
#define SEITPHR_SIMULATOR_HPP

/**
 * @file
 * @brief Fixed-step RK4 integration under weekly piecewise-constant policies,
 * next-generation-matrix reproduction numbers and the SIR reference model.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "seitphr/errors.hpp"
#include "seitphr/model.hpp"

namespace seitphr {

/// Controls held constant on consecutive intervals of interval_days.
struct PiecewisePolicy {
  double interval_days = 7.0;
  std::vector<ControlInput> controls;

  std::size_t size() const { return controls.size(); }

  /// Control of interval k; the last control is held beyond the end.
  const ControlInput& interval(std::size_t k) const { return controls[std::min(k, controls.size() - 1)]; }

  static PiecewisePolicy constant(const ControlInput& u, std::size_t intervals, double interval_days = 7.0) {
    return PiecewisePolicy{interval_days, std::vector<ControlInput>(intervals, u)};
  }

  void validate(const ModelParameters& p) const {
    if (!(interval_days > 0.0)) throw ValidationError("policy: interval length must be positive");
    if (controls.empty()) throw ValidationError("policy: no controls");
    for (const auto& u : controls) {
      detail::check_dimensions(p.n_groups, u, p);
      detail::check_control(u, p);
    }
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<double> icu_abs;
  std::vector<double> t_tot;
  std::vector<double> r_ngm;  ///< under the lifted control (beta0, 0); empty if not requested
  std::optional<double> herd_immunity_day;

  std::size_t size() const { return times.size(); }
  std::size_t n_groups() const { return states.empty() ? 0 : states.front().n_groups(); }

  double peak_icu() const { return icu_abs.empty() ? 0.0 : *std::max_element(icu_abs.begin(), icu_abs.end()); }

  double peak_icu_day() const {
    if (icu_abs.empty()) return 0.0;
    return times[static_cast<std::size_t>(std::max_element(icu_abs.begin(), icu_abs.end()) - icu_abs.begin())];
  }
};

struct SimulationOptions {
  bool compute_ngm = true;
};

namespace detail {

/// Number of whole steps of length `step` in `span`; throws if they do not tile it.
inline std::size_t whole_steps(double span, double step, const char* what) {
  if (!(step > 0.0)) throw ValidationError(std::string(what) + ": step must be positive");
  const double ratio = span / step;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ValidationError(std::string(what) + ": step " + std::to_string(step) + " does not divide " +
                          std::to_string(span));
  }
  return static_cast<std::size_t>(rounded);
}

/// Classical RK4 with reusable stage buffers.
class Rk4 {
 public:
  explicit Rk4(std::size_t dim) : k1_(dim), k2_(dim), k3_(dim), k4_(dim), y_(dim) {}

  void step(const double* x, const ControlInput& u, const ModelParameters& p, double h, double* out) {
    const std::size_t n = y_.size();
    rhs(x, u, p, k1_.data());
    for (std::size_t i = 0; i < n; ++i) y_[i] = x[i] + 0.5 * h * k1_[i];
    rhs(y_.data(), u, p, k2_.data());
    for (std::size_t i = 0; i < n; ++i) y_[i] = x[i] + 0.5 * h * k2_[i];
    rhs(y_.data(), u, p, k3_.data());
    for (std::size_t i = 0; i < n; ++i) y_[i] = x[i] + h * k3_[i];
    rhs(y_.data(), u, p, k4_.data());
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6.0 * (k1_[i] + 2.0 * (k2_[i] + k3_[i]) + k4_[i]);
  }

  /// Derivative at the start of the last step.
  const std::vector<double>& slope() const { return k1_; }

 private:
  std::vector<double> k1_, k2_, k3_, k4_, y_;
};

/// Throws IntegrationError when a state leaves Omega beyond the simplex tolerance.
inline void check_integrated_state(const double* x, std::size_t dim, double t) {
  double sum = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    sum += x[k];
    if (!(x[k] >= -tolerance::simplex)) {
      const std::string comp(kCompartmentNames[k % kCompartments]);
      throw IntegrationError("integration left the simplex at t = " + std::to_string(t) + " days: " + comp +
                                 " of group " + std::to_string(k / kCompartments + 1) + " = " + std::to_string(x[k]),
                             t, k / kCompartments, comp);
    }
  }
  if (!(std::abs(sum - 1.0) <= tolerance::simplex)) {
    throw IntegrationError("integration broke conservation at t = " + std::to_string(t) +
                               " days: shares sum to " + std::to_string(sum),
                           t, 0, "sum");
  }
}

}  // namespace detail

/**
 * Spectral radius of F V^{-1} over the infected classes (E, I^S, I^M, I^A, T^S, T^O)
 * of every group. P and H^ICU are isolated and do not transmit.
 *
 * New infections only enter E, so F V^{-1} has nonzero rows only at the E
 * positions and its nonzero spectrum is that of the n_g x n_g block
 * K_ij = beta_ij S_i * (expected infectious residence of one E_j entrant).
 * The radius is found by power iteration on K + I, which is nonnegative and
 * aperiodic.
 */
inline double ngm_reproduction_number(const StateVector& x, const ControlInput& u, const ModelParameters& p,
                                      double rel_tol = 1e-10) {
  detail::check_dimensions(x.n_groups(), u, p);
  const auto n = static_cast<Eigen::Index>(p.n_groups);
  // Residence time in transmitting classes of one agent entering E_j: a lower
  // triangular solve of V per group, done in closed form.
  Eigen::VectorXd residence(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double th = u.theta[j];
    const double d_is = p.eta_s + th, d_im = p.eta_m + th, d_ia = p.eta_a + th;
    for (double d : {p.gamma, d_is, d_im, d_ia, p.tau_s, p.tau_o}) {
      if (!(d > 0.0)) throw DecompositionError("next-generation matrix: singular transition matrix V");
    }
    // E -> I^c with probability pi^c; I^c stays 1/d_c and moves to T with probability th/d_c.
    const double stay_s = p.pi_s[j] / d_is, stay_m = p.pi_m[j] / d_im, stay_a = p.pi_a[j] / d_ia;
    residence[j] = stay_s + stay_m + stay_a + th * stay_s / p.tau_s + th * (stay_m + stay_a) / p.tau_o;
  }
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = x(static_cast<std::size_t>(i), Compartment::S);
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = u.beta(i, j) * s * residence[j];
  }
  if (k.maxCoeff() <= 0.0) return 0.0;

  const Eigen::MatrixXd shifted = k + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / static_cast<double>(n);
  double estimate = 0.0;
  // The estimate converges linearly, so stop on a change well below rel_tol.
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd w = shifted * v;
    const double next = w.sum();  // ||Mv||_1 with ||v||_1 = 1, v >= 0
    v = w / next;
    if (it > 0 && std::abs(next - estimate) <= 1e-3 * rel_tol * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return std::max(estimate - 1.0, 0.0);
}

/// First sample time with R^NGM < 1 under fully lifted countermeasures.
inline std::optional<double> herd_immunity_time(const Trajectory& traj, const ModelParameters& p) {
  const ControlInput lifted = lifted_control(p);
  for (std::size_t n = 0; n < traj.size(); ++n) {
    const double r = traj.r_ngm.size() == traj.size() ? traj.r_ngm[n] : ngm_reproduction_number(traj.states[n], lifted, p);
    if (r < 1.0) return traj.times[n];
  }
  return std::nullopt;
}

/**
 * Integrates the model with classical RK4 from x0 over [0, horizon_days].
 * The control of the interval containing t is active on [t, t + step);
 * derived series are sampled at every step.
 */
inline Trajectory simulate(const StateVector& x0, const PiecewisePolicy& policy, const ModelParameters& p,
                           double horizon_days, double step_days = 1.0, SimulationOptions options = {}) {
  p.validate();
  policy.validate(p);
  if (x0.n_groups() != p.n_groups) throw StructuralError("simulate: state and parameters disagree on n_groups");
  detail::require_in_simplex(x0);
  const std::size_t n_steps = detail::whole_steps(horizon_days, step_days, "simulate horizon");
  const std::size_t per_interval = detail::whole_steps(policy.interval_days, step_days, "simulate interval");

  const ControlInput lifted = lifted_control(p);
  Trajectory traj;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  auto record = [&](double t, const StateVector& x, const ControlInput& u) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.icu_abs.push_back(detail::aggregate_icu(x.data(), p));
    traj.t_tot.push_back(detail::total_tests(x.data(), u.theta, p));
    if (options.compute_ngm) traj.r_ngm.push_back(ngm_reproduction_number(x, lifted, p));
  };

  detail::Rk4 rk(x0.size());
  StateVector x = x0;
  StateVector next = x0;
  for (std::size_t n = 0; n < n_steps; ++n) {
    const ControlInput& u = policy.interval(n / per_interval);
    record(static_cast<double>(n) * step_days, x, u);
    rk.step(x.data(), u, p, step_days, next.data());
    const double t = static_cast<double>(n + 1) * step_days;
    detail::check_integrated_state(next.data(), next.size(), t);
    std::swap(x, next);
  }
  record(static_cast<double>(n_steps) * step_days, x, policy.interval(n_steps / per_interval));
  if (options.compute_ngm) traj.herd_immunity_day = herd_immunity_time(traj, p);
  return traj;
}

struct SirTrajectory {
  std::vector<double> times;
  std::vector<double> s;
  std::vector<double> i;
  std::vector<double> r;
};

/// Classical SIR model S' = -beta S I, I' = beta S I - eta I, R' = eta I, same RK4 scheme.
inline SirTrajectory sir_reference(double s0, double i0, double beta, double eta, double horizon, double step) {
  if (s0 < 0.0 || i0 < 0.0 || s0 + i0 > 1.0 + 1e-12) throw ValidationError("sir_reference: need s0, i0 >= 0 and s0 + i0 <= 1");
  if (beta < 0.0 || eta < 0.0) throw ValidationError("sir_reference: negative rate");
  const std::size_t n_steps = detail::whole_steps(horizon, step, "sir_reference");
  auto f = [&](const Eigen::Vector3d& y) {
    const double inf = beta * y[0] * y[1];
    return Eigen::Vector3d(-inf, inf - eta * y[1], eta * y[1]);
  };
  SirTrajectory out;
  Eigen::Vector3d y(s0, i0, 1.0 - s0 - i0);
  for (std::size_t n = 0; n <= n_steps; ++n) {
    out.times.push_back(static_cast<double>(n) * step);
    out.s.push_back(y[0]);
    out.i.push_back(y[1]);
    out.r.push_back(y[2]);
    if (n == n_steps) break;
    const Eigen::Vector3d k1 = f(y);
    const Eigen::Vector3d k2 = f(y + 0.5 * step * k1);
    const Eigen::Vector3d k3 = f(y + 0.5 * step * k2);
    const Eigen::Vector3d k4 = f(y + step * k3);
    y += step / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
  }
  return out;
}

}  // namespace seitphr

#endif  // SEITPHR_SIMULATOR_HPP
