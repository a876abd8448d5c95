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
#ifndef SEITPHR_OCP_HPP
#define SEITPHR_OCP_HPP

/**
 * @file
 * @brief Direct single-shooting transcription of the three policy problems.
 *
 * Controls are constant per interval (one week by default). The state is
 * integrated with the same RK4 scheme as simulate(); path constraints on ICU
 * occupancy and daily tests are sampled on a fixed grid and scaled by their
 * caps, so every inequality reads ratio - 1 <= 0. Gradients of any weighted
 * sum of objective and constraints come from the discrete adjoint of the RK4
 * recursion, i.e. they are exact derivatives of the discretized problem.
 *
 *  - TestingOnly:            min int T^tot,                      beta = beta0
 *  - HomogeneousDistancing:  min int (1 - delta)^2 + kappa sum theta, beta = delta beta0
 *  - AgeDependentDistancing: min int sum N_i N_j (beta_ij - beta0_ij)^2 + kappa sum theta
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seitphr/errors.hpp"
#include "seitphr/model.hpp"
#include "seitphr/nlp.hpp"
#include "seitphr/simulator.hpp"

namespace seitphr {

enum class OcpKind { TestingOnly, HomogeneousDistancing, AgeDependentDistancing };

inline std::string_view to_string(OcpKind k) {
  switch (k) {
    case OcpKind::TestingOnly: return "testing";
    case OcpKind::HomogeneousDistancing: return "homogeneous";
    case OcpKind::AgeDependentDistancing: return "age-dependent";
  }
  return "unknown";
}

inline OcpKind parse_ocp_kind(std::string_view s) {
  if (s == "testing" || s == "1") return OcpKind::TestingOnly;
  if (s == "homogeneous" || s == "2") return OcpKind::HomogeneousDistancing;
  if (s == "age-dependent" || s == "3") return OcpKind::AgeDependentDistancing;
  throw ConfigError("unknown problem kind '" + std::string(s) + "' (expected testing, homogeneous or age-dependent)");
}

struct OcpSpec {
  OcpKind kind = OcpKind::TestingOnly;
  double t0 = 0.0;
  double tf = 728.0;
  double interval_days = 7.0;
  double kappa = 1e-5;
  Eigen::MatrixXd beta_min;  ///< age-dependent lower bounds; empty means zero
  StateVector x0;
  ModelParameters p;
  double constraint_step_days = 1.0;
  double step_days = 1.0;
  bool symmetric_beta = true;
  /// Relative tightening of both caps inside the optimizer; absorbs the excursion between daily samples.
  double cap_backoff = 1e-3;

  double horizon_days() const { return tf - t0; }
  std::size_t n_intervals() const { return detail::whole_steps(horizon_days(), interval_days, "ocp horizon"); }
  bool caps_tests() const { return kind != OcpKind::TestingOnly; }

  Eigen::MatrixXd effective_beta_min() const {
    const auto n = static_cast<Eigen::Index>(p.n_groups);
    return beta_min.size() == 0 ? Eigen::MatrixXd::Zero(n, n) : beta_min;
  }

  void validate() const {
    p.validate();
    if (!(tf > t0)) throw ValidationError("ocp: tf must exceed t0");
    if (!(kappa >= 0.0)) throw ValidationError("ocp: kappa must be nonnegative");
    if (!(cap_backoff >= 0.0 && cap_backoff < 1.0)) throw ValidationError("ocp: cap_backoff must lie in [0, 1)");
    if (x0.n_groups() != p.n_groups) throw StructuralError("ocp: x0 and parameters disagree on n_groups");
    detail::require_in_simplex(x0);
    (void)n_intervals();
    (void)detail::whole_steps(interval_days, step_days, "ocp interval");
    (void)detail::whole_steps(constraint_step_days, step_days, "ocp constraint grid");
    (void)detail::whole_steps(horizon_days(), constraint_step_days, "ocp constraint grid");
    const Eigen::MatrixXd lo = effective_beta_min();
    const auto n = static_cast<Eigen::Index>(p.n_groups);
    if (lo.rows() != n || lo.cols() != n) throw StructuralError("ocp: beta_min has the wrong shape");
    if ((lo.array() < 0.0).any() || (lo.array() > p.beta0.array() + 1e-15).any()) {
      throw ValidationError("ocp: beta_min must satisfy 0 <= beta_min <= beta0");
    }
    if (kind == OcpKind::AgeDependentDistancing && symmetric_beta && !p.beta0.isApprox(p.beta0.transpose(), 0.0)) {
      throw ValidationError("ocp: symmetric contact control needs a symmetric beta0");
    }
  }
};

/// Homogeneous distancing factor of a contact matrix, mean(beta) / mean(beta0).
inline double distancing_factor(const Eigen::MatrixXd& beta, const ModelParameters& p) {
  const double nominal = mean_contact_rate(p.beta0, p.N);
  return nominal > 0.0 ? mean_contact_rate(beta, p.N) / nominal : 1.0;
}

/// J1 = int T^tot dt, trapezoid rule on the samples of `traj` lying on multiples of sample_days.
inline double objective_j1(const Trajectory& traj, double sample_days = 1.0) {
  std::vector<double> values;
  double spacing = 0.0;
  if (traj.size() < 2) return 0.0;
  const double step = traj.times[1] - traj.times[0];
  const std::size_t every = detail::whole_steps(sample_days, step, "objective_j1");
  for (std::size_t n = 0; n < traj.size(); n += every) values.push_back(traj.t_tot[n]);
  spacing = step * static_cast<double>(every);
  double acc = 0.0;
  for (std::size_t c = 1; c < values.size(); ++c) acc += 0.5 * spacing * (values[c - 1] + values[c]);
  return acc;
}

/// J2 = sum_k dt [(1 - delta_k)^2 + kappa sum_i theta_ik] with delta_k = mean(beta_k) / mean(beta0).
inline double objective_j2(const PiecewisePolicy& policy, const ModelParameters& p, double kappa) {
  double acc = 0.0;
  for (const auto& u : policy.controls) {
    const double delta = distancing_factor(u.beta, p);
    acc += policy.interval_days * ((1.0 - delta) * (1.0 - delta) + kappa * u.theta.sum());
  }
  return acc;
}

/// J3 = sum_k dt [sum_ij N_i N_j (beta_ij - beta0_ij)^2 + kappa sum_i theta_ik].
inline double objective_j3(const PiecewisePolicy& policy, const ModelParameters& p, double kappa) {
  double acc = 0.0;
  for (const auto& u : policy.controls) {
    const Eigen::MatrixXd dev = u.beta - p.beta0;
    const double weighted = (p.N * p.N.transpose()).cwiseProduct(dev.cwiseProduct(dev)).sum();
    acc += policy.interval_days * (weighted + kappa * u.theta.sum());
  }
  return acc;
}

/// Social-distancing part of the objective of `kind` (the kappa-weighted testing term dropped).
inline double distancing_cost(const PiecewisePolicy& policy, const ModelParameters& p, OcpKind kind) {
  return kind == OcpKind::AgeDependentDistancing ? objective_j3(policy, p, 0.0) : objective_j2(policy, p, 0.0);
}

/// beta_min = (min_t delta*(t)) beta0, the worst case of a homogeneous policy.
inline Eigen::MatrixXd derive_beta_min(const std::vector<double>& delta_star, const ModelParameters& p) {
  if (delta_star.empty()) throw ValidationError("derive_beta_min: empty distancing sequence");
  for (double d : delta_star) {
    if (!(d >= 0.0 && d <= 1.0)) throw ValidationError("derive_beta_min: distancing factors must lie in [0, 1]");
  }
  return *std::min_element(delta_star.begin(), delta_star.end()) * p.beta0;
}

/**
 * Decision vector layout, bounds and evaluators of one OcpSpec.
 *
 * Per interval the decision block is
 *  - TestingOnly:            theta_1..theta_ng (per day)
 *  - HomogeneousDistancing:  delta, theta_i / theta_ref
 *  - AgeDependentDistancing: beta_ij / beta0_ij for i <= j (all i, j if asymmetric), theta_i / theta_ref
 * with theta_ref = T^max / n_pop, the testing rate that exhausts the daily
 * test budget when every agent is untested.
 *
 * Constraint vector: ICU samples at grid points 1..M, then (if tests are
 * capped) test samples at grid points 0..M under the control active there,
 * then tests at every interior interval boundary under the control of the
 * interval that ends there (the left limit, where T^tot peaks when the
 * symptomatic flow grows within an interval).
 */
class Transcription {
 public:
  explicit Transcription(OcpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const auto& p = spec_.p;
    ng_ = p.n_groups;
    dim_ = ng_ * kCompartments;
    n_intervals_ = spec_.n_intervals();
    n_steps_ = detail::whole_steps(spec_.horizon_days(), spec_.step_days, "ocp horizon");
    per_interval_ = detail::whole_steps(spec_.interval_days, spec_.step_days, "ocp interval");
    per_sample_ = detail::whole_steps(spec_.constraint_step_days, spec_.step_days, "ocp constraint grid");
    n_samples_ = n_steps_ / per_sample_;
    theta_ref_ = spec_.kind == OcpKind::TestingOnly ? 1.0 : p.t_max / p.n_pop;
    if (!(theta_ref_ > 0.0)) throw ValidationError("ocp: testing cap must be positive");

    const Eigen::MatrixXd lo = spec_.effective_beta_min();
    if (spec_.kind == OcpKind::AgeDependentDistancing) {
      for (std::size_t i = 0; i < ng_; ++i) {
        for (std::size_t j = spec_.symmetric_beta ? i : 0; j < ng_; ++j) pairs_.push_back({i, j});
      }
    }
    per_block_ = ng_ + (spec_.kind == OcpKind::TestingOnly ? 0 : spec_.kind == OcpKind::HomogeneousDistancing ? 1 : pairs_.size());
    lower_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_variables()));
    upper_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_variables()), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < n_intervals_; ++k) {
      const std::size_t base = k * per_block_;
      if (spec_.kind == OcpKind::HomogeneousDistancing) upper_[static_cast<Eigen::Index>(base)] = 1.0;
      for (std::size_t q = 0; q < pairs_.size(); ++q) {
        const auto [i, j] = pairs_[q];
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        const double nominal = p.beta0(ii, jj);
        const auto at = static_cast<Eigen::Index>(base + q);
        if (nominal > 0.0) {
          const double floor = spec_.symmetric_beta ? std::max(lo(ii, jj), lo(jj, ii)) : lo(ii, jj);
          lower_[at] = std::min(1.0, floor / nominal);
          upper_[at] = 1.0;
        } else {
          upper_[at] = 0.0;
        }
      }
    }
    states_.assign((n_steps_ + 1) * dim_, 0.0);
    controls_.assign(n_intervals_, lifted_control(p));
    tests_by_step_.assign(n_steps_ + 1, {});
    if (spec_.caps_tests()) {
      for (std::size_t c = 0; c <= n_samples_; ++c) test_points_.push_back({c * per_sample_, interval_of(c * per_sample_)});
      for (std::size_t k = 1; k < n_intervals_; ++k) test_points_.push_back({k * per_interval_, k - 1});
      for (std::size_t j = 0; j < test_points_.size(); ++j) tests_by_step_[test_points_[j].step].push_back(j);
    }
  }

  const OcpSpec& spec() const { return spec_; }
  std::size_t n_intervals() const { return n_intervals_; }
  std::size_t variables_per_interval() const { return per_block_; }
  std::size_t n_variables() const { return n_intervals_ * per_block_; }
  std::size_t n_samples() const { return n_samples_; }
  std::size_t n_constraints() const { return n_samples_ + test_points_.size(); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  double theta_reference() const { return theta_ref_; }

  /// Scale dividing the objective inside the optimizer.
  double objective_scale() const {
    const double horizon = spec_.horizon_days();
    return spec_.kind == OcpKind::TestingOnly ? spec_.p.n_pop * horizon : horizon;
  }

  ControlInput decode_interval(const Eigen::VectorXd& z, std::size_t k) const {
    const auto& p = spec_.p;
    ControlInput u = lifted_control(p);
    const std::size_t base = k * per_block_;
    std::size_t theta_at = base;
    switch (spec_.kind) {
      case OcpKind::TestingOnly:
        break;
      case OcpKind::HomogeneousDistancing:
        u.beta = z[static_cast<Eigen::Index>(base)] * p.beta0;
        theta_at = base + 1;
        break;
      case OcpKind::AgeDependentDistancing:
        for (std::size_t q = 0; q < pairs_.size(); ++q) {
          const auto ii = static_cast<Eigen::Index>(pairs_[q].first), jj = static_cast<Eigen::Index>(pairs_[q].second);
          const double r = z[static_cast<Eigen::Index>(base + q)];
          u.beta(ii, jj) = r * p.beta0(ii, jj);
          if (spec_.symmetric_beta) u.beta(jj, ii) = r * p.beta0(jj, ii);
        }
        theta_at = base + pairs_.size();
        break;
    }
    for (std::size_t i = 0; i < ng_; ++i) {
      u.theta[static_cast<Eigen::Index>(i)] = theta_ref_ * z[static_cast<Eigen::Index>(theta_at + i)];
    }
    return u;
  }

  PiecewisePolicy decode(const Eigen::VectorXd& z) const {
    PiecewisePolicy policy{spec_.interval_days, {}};
    policy.controls.reserve(n_intervals_);
    for (std::size_t k = 0; k < n_intervals_; ++k) policy.controls.push_back(decode_interval(z, k));
    return policy;
  }

  /// Decision vector closest to `policy` (projected into the box); short policies hold their last control.
  Eigen::VectorXd encode(const PiecewisePolicy& policy) const {
    const auto& p = spec_.p;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_variables()));
    for (std::size_t k = 0; k < n_intervals_; ++k) {
      const ControlInput& u = policy.interval(k);
      detail::check_dimensions(ng_, u, p);
      const std::size_t base = k * per_block_;
      std::size_t theta_at = base;
      if (spec_.kind == OcpKind::HomogeneousDistancing) {
        z[static_cast<Eigen::Index>(base)] = distancing_factor(u.beta, p);
        theta_at = base + 1;
      } else if (spec_.kind == OcpKind::AgeDependentDistancing) {
        for (std::size_t q = 0; q < pairs_.size(); ++q) {
          const auto ii = static_cast<Eigen::Index>(pairs_[q].first), jj = static_cast<Eigen::Index>(pairs_[q].second);
          const double nominal = p.beta0(ii, jj);
          double r = nominal > 0.0 ? u.beta(ii, jj) / nominal : 0.0;
          if (spec_.symmetric_beta && ii != jj && p.beta0(jj, ii) > 0.0) r = 0.5 * (r + u.beta(jj, ii) / p.beta0(jj, ii));
          z[static_cast<Eigen::Index>(base + q)] = r;
        }
        theta_at = base + pairs_.size();
      }
      for (std::size_t i = 0; i < ng_; ++i) {
        z[static_cast<Eigen::Index>(theta_at + i)] = u.theta[static_cast<Eigen::Index>(i)] / theta_ref_;
      }
    }
    return nlp::project(z, lower_, upper_);
  }

  /// Scaled objective f = J / objective_scale() and constraints g (ratio - 1).
  void evaluate(const Eigen::VectorXd& z, double& f, Eigen::VectorXd& g) {
    const auto& p = spec_.p;
    for (std::size_t k = 0; k < n_intervals_; ++k) controls_[k] = decode_interval(z, k);
    std::copy(spec_.x0.data(), spec_.x0.data() + dim_, states_.begin());
    detail::Rk4 rk(dim_);
    for (std::size_t n = 0; n < n_steps_; ++n) {
      rk.step(&states_[n * dim_], control_at_step(n), p, spec_.step_days, &states_[(n + 1) * dim_]);
    }

    g.resize(static_cast<Eigen::Index>(n_constraints()));
    const double icu_cap = p.h_icu_max * (1.0 - spec_.cap_backoff);
    f = 0.0;
    for (std::size_t c = 0; c <= n_samples_; ++c) {
      const std::size_t n = c * per_sample_;
      const double* x = &states_[n * dim_];
      if (c > 0) g[static_cast<Eigen::Index>(c - 1)] = detail::aggregate_icu(x, p) / icu_cap - 1.0;
      if (spec_.kind == OcpKind::TestingOnly) {
        f += trapezoid_weight(c) * spec_.constraint_step_days * detail::total_tests(x, control_at_step(n).theta, p);
      }
    }
    for (std::size_t j = 0; j < test_points_.size(); ++j) {
      const auto& pt = test_points_[j];
      g[static_cast<Eigen::Index>(n_samples_ + j)] =
          detail::total_tests(&states_[pt.step * dim_], controls_[pt.interval].theta, p) / test_cap() - 1.0;
    }
    if (spec_.kind != OcpKind::TestingOnly) f = control_cost(z);
    f /= objective_scale();
  }

  /// Gradient of wf f + w^T g at the point of the last evaluate().
  Eigen::VectorXd gradient(double wf, const Eigen::VectorXd& w) {
    const auto& p = spec_.p;
    const auto n = static_cast<Eigen::Index>(ng_);
    std::vector<Eigen::MatrixXd> adj_beta(n_intervals_, Eigen::MatrixXd::Zero(n, n));
    std::vector<Eigen::VectorXd> adj_theta(n_intervals_, Eigen::VectorXd::Zero(n));
    std::vector<double> lambda(dim_, 0.0), next(dim_, 0.0);
    const double icu_coeff = p.n_pop / (p.h_icu_max * (1.0 - spec_.cap_backoff));

    StepAdjoint step_adjoint(dim_, ng_);
    for (std::size_t n_step = n_steps_ + 1; n_step-- > 0;) {
      if (n_step % per_sample_ == 0) {
        const std::size_t c = n_step / per_sample_;
        const double* x = &states_[n_step * dim_];
        const std::size_t k = interval_of(n_step);
        if (c > 0) {
          const double wi = w[static_cast<Eigen::Index>(c - 1)];
          for (std::size_t i = 0; i < ng_; ++i) lambda[i * kCompartments + index(Compartment::HICU)] += wi * icu_coeff;
        }
        if (spec_.kind == OcpKind::TestingOnly) {
          // Coefficient of d(T^tot / n_pop).
          const double coeff = wf * trapezoid_weight(c) * spec_.constraint_step_days * p.n_pop / objective_scale();
          if (coeff != 0.0) add_tests_adjoint(x, controls_[k].theta, coeff, lambda.data(), adj_theta[k]);
        }
      }
      for (std::size_t j : tests_by_step_[n_step]) {
        const auto& pt = test_points_[j];
        const double coeff = w[static_cast<Eigen::Index>(n_samples_ + j)] * p.n_pop / test_cap();
        if (coeff != 0.0) {
          add_tests_adjoint(&states_[n_step * dim_], controls_[pt.interval].theta, coeff, lambda.data(),
                            adj_theta[pt.interval]);
        }
      }
      if (n_step == 0) break;
      const std::size_t k = interval_of(n_step - 1);
      std::fill(next.begin(), next.end(), 0.0);
      step_adjoint.apply(&states_[(n_step - 1) * dim_], controls_[k], p, spec_.step_days, lambda.data(), next.data(),
                         adj_beta[k], adj_theta[k]);
      std::swap(lambda, next);
    }
    return chain_to_decisions(wf, adj_beta, adj_theta);
  }

  /// Constraint Jacobian dg/dz at the point of the last evaluate(), by forward sensitivities of the RK4 recursion.
  void jacobian(Eigen::MatrixXd& jac) const {
    const auto& p = spec_.p;
    const auto dim = static_cast<Eigen::Index>(dim_);
    const auto block = static_cast<Eigen::Index>(per_block_);
    jac.setZero(static_cast<Eigen::Index>(n_constraints()), static_cast<Eigen::Index>(n_variables()));
    Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(n_variables()));
    const Eigen::MatrixXd map = control_map();
    const double icu_coeff = p.n_pop / (p.h_icu_max * (1.0 - spec_.cap_backoff));
    const double test_coeff = p.n_pop / test_cap();
    StepJacobian step_jacobian(dim_, ng_);
    Eigen::MatrixXd a, bu;
    for (std::size_t n_step = 0; n_step <= n_steps_; ++n_step) {
      const std::size_t k = interval_of(n_step);
      const auto started = static_cast<Eigen::Index>(std::min(n_step / per_interval_ + 1, n_intervals_)) * block;
      if (n_step % per_sample_ == 0 && n_step > 0) {
        const auto row = static_cast<Eigen::Index>(n_step / per_sample_ - 1);
        for (std::size_t i = 0; i < ng_; ++i) {
          const auto h = static_cast<Eigen::Index>(i * kCompartments + index(Compartment::HICU));
          jac.row(row).head(started) += icu_coeff * sens.row(h).head(started);
        }
      }
      for (std::size_t j : tests_by_step_[n_step]) {
        const std::size_t kt = test_points_[j].interval;
        const double* x = &states_[n_step * dim_];
        const auto row = static_cast<Eigen::Index>(n_samples_ + j);
        for (std::size_t i = 0; i < ng_; ++i) {
          const auto base = static_cast<Eigen::Index>(i * kCompartments);
          const double th = controls_[kt].theta[static_cast<Eigen::Index>(i)];
          for (Compartment cc : {Compartment::S, Compartment::E, Compartment::IS, Compartment::IM, Compartment::IA,
                                 Compartment::RU}) {
            jac.row(row).head(started) += test_coeff * th * sens.row(base + static_cast<Eigen::Index>(index(cc))).head(started);
          }
          jac.row(row).head(started) +=
              test_coeff * (p.eta_s * sens.row(base + static_cast<Eigen::Index>(index(Compartment::IS))).head(started) +
                            p.eta_m * sens.row(base + static_cast<Eigen::Index>(index(Compartment::IM))).head(started));
          const double* xi = x + i * kCompartments;
          const double untested = xi[0] + xi[1] + xi[2] + xi[3] + xi[4] + xi[9];
          jac(row, static_cast<Eigen::Index>(theta_index(kt, i))) += test_coeff * untested * theta_ref_;
        }
      }
      if (n_step == n_steps_) break;
      step_jacobian.compute(&states_[n_step * dim_], controls_[k], p, spec_.step_days, a, bu);
      const Eigen::MatrixXd advanced = a * sens.leftCols(started);
      sens.leftCols(started) = advanced;
      sens.middleCols(static_cast<Eigen::Index>(k) * block, block) += bu * map;
    }
  }

  /// Diagonal of the Hessian of the explicit (scaled) control cost; zero where it is linear.
  Eigen::VectorXd curvature_hint() const {
    const auto& p = spec_.p;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_variables()));
    const double w = 2.0 * spec_.interval_days / objective_scale();
    for (std::size_t k = 0; k < n_intervals_; ++k) {
      const std::size_t base = k * per_block_;
      if (spec_.kind == OcpKind::HomogeneousDistancing) h[static_cast<Eigen::Index>(base)] = w;
      for (std::size_t q = 0; q < pairs_.size(); ++q) {
        const auto ii = static_cast<Eigen::Index>(pairs_[q].first), jj = static_cast<Eigen::Index>(pairs_[q].second);
        double v = p.N[ii] * p.N[jj] * p.beta0(ii, jj) * p.beta0(ii, jj);
        if (spec_.symmetric_beta && ii != jj) v += p.N[jj] * p.N[ii] * p.beta0(jj, ii) * p.beta0(jj, ii);
        h[static_cast<Eigen::Index>(base + q)] = w * v;
      }
    }
    return h;
  }

  /// Explicit control-cost part of J2/J3 for the decision vector z (unscaled).
  double control_cost(const Eigen::VectorXd& z) const {
    const auto& p = spec_.p;
    if (spec_.kind == OcpKind::TestingOnly) return 0.0;
    const PiecewisePolicy policy = decode(z);
    return spec_.kind == OcpKind::HomogeneousDistancing ? objective_j2(policy, p, spec_.kappa)
                                                        : objective_j3(policy, p, spec_.kappa);
  }

  /// Stored state at integration step n of the last evaluate().
  StateVector state_at_step(std::size_t n) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
    std::copy(&states_[n * dim_], &states_[n * dim_] + dim_, v.data());
    return StateVector(std::move(v));
  }

 private:
  /// Transposed Jacobian of one RK4 step with respect to its start state and control.
  class StepAdjoint {
   public:
    StepAdjoint(std::size_t dim, std::size_t ng)
        : k1_(dim), k2_(dim), k3_(dim), y2_(dim), y3_(dim), y4_(dim), g1_(dim), g2_(dim), g3_(dim), g4_(dim),
          a_(dim), ab_(ng * ng), at_(ng) {}

    void apply(const double* x, const ControlInput& u, const ModelParameters& p, double h, const double* lambda,
               double* out, Eigen::MatrixXd& adj_beta, Eigen::VectorXd& adj_theta) {
      const std::size_t dim = a_.size();
      detail::rhs(x, u, p, k1_.data());
      for (std::size_t i = 0; i < dim; ++i) y2_[i] = x[i] + 0.5 * h * k1_[i];
      detail::rhs(y2_.data(), u, p, k2_.data());
      for (std::size_t i = 0; i < dim; ++i) y3_[i] = x[i] + 0.5 * h * k2_[i];
      detail::rhs(y3_.data(), u, p, k3_.data());
      for (std::size_t i = 0; i < dim; ++i) y4_[i] = x[i] + h * k3_[i];

      for (std::size_t i = 0; i < dim; ++i) {
        out[i] += lambda[i];
        g1_[i] = h / 6.0 * lambda[i];
        g2_[i] = h / 3.0 * lambda[i];
        g3_[i] = h / 3.0 * lambda[i];
        g4_[i] = h / 6.0 * lambda[i];
      }
      std::fill(ab_.begin(), ab_.end(), 0.0);
      std::fill(at_.begin(), at_.end(), 0.0);
      stage(y4_.data(), u, p, g4_.data(), out, g3_.data(), h);
      stage(y3_.data(), u, p, g3_.data(), out, g2_.data(), 0.5 * h);
      stage(y2_.data(), u, p, g2_.data(), out, g1_.data(), 0.5 * h);
      stage(x, u, p, g1_.data(), out, nullptr, 0.0);
      const std::size_t ng = at_.size();
      for (std::size_t i = 0; i < ng; ++i) {
        adj_theta[static_cast<Eigen::Index>(i)] += at_[i];
        for (std::size_t j = 0; j < ng; ++j) {
          adj_beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += ab_[i * ng + j];
        }
      }
    }

   private:
    // Stage y = x + c k_prev: the adjoint of y flows to x and, scaled by c, to k_prev.
    void stage(const double* y, const ControlInput& u, const ModelParameters& p, const double* gk, double* out,
               double* g_prev, double c) {
      std::fill(a_.begin(), a_.end(), 0.0);
      detail::rhs_vjp(y, u, p, gk, a_.data(), ab_.data(), at_.data());
      for (std::size_t i = 0; i < a_.size(); ++i) {
        out[i] += a_[i];
        if (g_prev != nullptr) g_prev[i] += c * a_[i];
      }
    }

    std::vector<double> k1_, k2_, k3_, y2_, y3_, y4_, g1_, g2_, g3_, g4_, a_, ab_, at_;
  };

  /// Dense one-step RK4 Jacobians with respect to the start state and to the control (beta row-major, theta).
  class StepJacobian {
   public:
    StepJacobian(std::size_t dim, std::size_t ng)
        : ng_(ng), k_(dim), w_(dim, 0.0), ax_(dim), ab_(ng * ng), at_(ng) {}

    void compute(const double* x, const ControlInput& u, const ModelParameters& p, double h, Eigen::MatrixXd& a,
                 Eigen::MatrixXd& bu) {
      const auto dim = static_cast<Eigen::Index>(k_.size());
      const Eigen::Map<const Eigen::VectorXd> x0(x, dim);
      Eigen::MatrixXd fx, fu, kx, ku, sum_x, sum_u;
      const double weights[4] = {1.0, 2.0, 2.0, 1.0};
      const double shifts[4] = {0.0, 0.5 * h, 0.5 * h, h};
      Eigen::VectorXd slope = Eigen::VectorXd::Zero(dim);
      for (int stage = 0; stage < 4; ++stage) {
        const Eigen::VectorXd y = x0 + shifts[stage] * slope;
        linearize(y.data(), u, p, fx, fu);
        if (stage == 0) {
          kx = fx;
          ku = fu;
          sum_x = kx;
          sum_u = ku;
        } else {
          kx = fx + shifts[stage] * (fx * kx);
          ku = fu + shifts[stage] * (fx * ku);
          sum_x += weights[stage] * kx;
          sum_u += weights[stage] * ku;
        }
        detail::rhs(y.data(), u, p, k_.data());
        slope = Eigen::Map<const Eigen::VectorXd>(k_.data(), dim);
      }
      a = Eigen::MatrixXd::Identity(dim, dim) + (h / 6.0) * sum_x;
      bu = (h / 6.0) * sum_u;
    }

   private:
    void linearize(const double* y, const ControlInput& u, const ModelParameters& p, Eigen::MatrixXd& fx,
                   Eigen::MatrixXd& fu) {
      const auto dim = static_cast<Eigen::Index>(k_.size());
      const auto nb = static_cast<Eigen::Index>(ng_ * ng_);
      fx.resize(dim, dim);
      fu.resize(dim, nb + static_cast<Eigen::Index>(ng_));
      for (Eigen::Index r = 0; r < dim; ++r) {
        std::fill(ax_.begin(), ax_.end(), 0.0);
        std::fill(ab_.begin(), ab_.end(), 0.0);
        std::fill(at_.begin(), at_.end(), 0.0);
        w_[static_cast<std::size_t>(r)] = 1.0;
        detail::rhs_vjp(y, u, p, w_.data(), ax_.data(), ab_.data(), at_.data());
        w_[static_cast<std::size_t>(r)] = 0.0;
        for (Eigen::Index c = 0; c < dim; ++c) fx(r, c) = ax_[static_cast<std::size_t>(c)];
        for (Eigen::Index c = 0; c < nb; ++c) fu(r, c) = ab_[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < ng_; ++i) fu(r, nb + static_cast<Eigen::Index>(i)) = at_[i];
      }
    }

    std::size_t ng_;
    std::vector<double> k_, w_, ax_, ab_, at_;
  };

  /// d(beta row-major, theta) / d(decision block) for one interval; constant because the map is linear.
  Eigen::MatrixXd control_map() const {
    const auto& p = spec_.p;
    const auto nb = static_cast<Eigen::Index>(ng_ * ng_);
    Eigen::MatrixXd map = Eigen::MatrixXd::Zero(nb + static_cast<Eigen::Index>(ng_), static_cast<Eigen::Index>(per_block_));
    Eigen::Index theta_at = 0;
    if (spec_.kind == OcpKind::HomogeneousDistancing) {
      for (std::size_t i = 0; i < ng_; ++i) {
        for (std::size_t j = 0; j < ng_; ++j) {
          map(static_cast<Eigen::Index>(i * ng_ + j), 0) = p.beta0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
      }
      theta_at = 1;
    } else if (spec_.kind == OcpKind::AgeDependentDistancing) {
      for (std::size_t q = 0; q < pairs_.size(); ++q) {
        const auto [i, j] = pairs_[q];
        const auto col = static_cast<Eigen::Index>(q);
        map(static_cast<Eigen::Index>(i * ng_ + j), col) = p.beta0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (spec_.symmetric_beta && i != j) {
          map(static_cast<Eigen::Index>(j * ng_ + i), col) = p.beta0(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        }
      }
      theta_at = static_cast<Eigen::Index>(pairs_.size());
    }
    for (std::size_t i = 0; i < ng_; ++i) map(nb + static_cast<Eigen::Index>(i), theta_at + static_cast<Eigen::Index>(i)) = theta_ref_;
    return map;
  }

  std::size_t theta_index(std::size_t k, std::size_t i) const { return (k + 1) * per_block_ - ng_ + i; }

  std::size_t interval_of(std::size_t step) const { return std::min(step / per_interval_, n_intervals_ - 1); }
  const ControlInput& control_at_step(std::size_t step) const { return controls_[interval_of(step)]; }

  double trapezoid_weight(std::size_t c) const { return (c == 0 || c == n_samples_) ? 0.5 : 1.0; }

  void add_tests_adjoint(const double* x, const Eigen::VectorXd& theta, double coeff, double* lambda,
                         Eigen::VectorXd& adj_theta) const {
    const auto& p = spec_.p;
    for (std::size_t i = 0; i < ng_; ++i) {
      const double* xi = x + i * kCompartments;
      double* li = lambda + i * kCompartments;
      const double th = theta[static_cast<Eigen::Index>(i)];
      for (Compartment c : {Compartment::S, Compartment::E, Compartment::IS, Compartment::IM, Compartment::IA,
                            Compartment::RU}) {
        li[index(c)] += coeff * th;
      }
      li[index(Compartment::IS)] += coeff * p.eta_s;
      li[index(Compartment::IM)] += coeff * p.eta_m;
      adj_theta[static_cast<Eigen::Index>(i)] += coeff * (xi[0] + xi[1] + xi[2] + xi[3] + xi[4] + xi[9]);
    }
  }

  Eigen::VectorXd chain_to_decisions(double wf, const std::vector<Eigen::MatrixXd>& adj_beta,
                                     const std::vector<Eigen::VectorXd>& adj_theta) const {
    const auto& p = spec_.p;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_variables()));
    const double dt = spec_.interval_days;
    const double explicit_scale = wf * dt / objective_scale();
    for (std::size_t k = 0; k < n_intervals_; ++k) {
      const std::size_t base = k * per_block_;
      const ControlInput& u = controls_[k];
      std::size_t theta_at = base;
      if (spec_.kind == OcpKind::HomogeneousDistancing) {
        const double delta = distancing_factor(u.beta, p);
        grad[static_cast<Eigen::Index>(base)] =
            p.beta0.cwiseProduct(adj_beta[k]).sum() - 2.0 * (1.0 - delta) * explicit_scale;
        theta_at = base + 1;
      } else if (spec_.kind == OcpKind::AgeDependentDistancing) {
        for (std::size_t q = 0; q < pairs_.size(); ++q) {
          const auto ii = static_cast<Eigen::Index>(pairs_[q].first), jj = static_cast<Eigen::Index>(pairs_[q].second);
          auto entry = [&](Eigen::Index a, Eigen::Index b) {
            const double nominal = p.beta0(a, b);
            return nominal * adj_beta[k](a, b) +
                   2.0 * p.N[a] * p.N[b] * (u.beta(a, b) - nominal) * nominal * explicit_scale;
          };
          double value = entry(ii, jj);
          if (spec_.symmetric_beta && ii != jj) value += entry(jj, ii);
          grad[static_cast<Eigen::Index>(base + q)] = value;
        }
        theta_at = base + pairs_.size();
      }
      for (std::size_t i = 0; i < ng_; ++i) {
        double value = theta_ref_ * adj_theta[k][static_cast<Eigen::Index>(i)];
        if (spec_.kind != OcpKind::TestingOnly) value += spec_.kappa * theta_ref_ * explicit_scale;
        grad[static_cast<Eigen::Index>(theta_at + i)] = value;
      }
    }
    return grad;
  }

  OcpSpec spec_;
  std::size_t ng_ = 0, dim_ = 0, n_intervals_ = 0, n_steps_ = 0, per_interval_ = 0, per_sample_ = 0, n_samples_ = 0;
  std::size_t per_block_ = 0;
  double theta_ref_ = 1.0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  Eigen::VectorXd lower_, upper_;
  std::vector<double> states_;
  std::vector<ControlInput> controls_;
  struct TestPoint {
    std::size_t step;
    std::size_t interval;  ///< whose testing rates apply
  };
  std::vector<TestPoint> test_points_;

  double test_cap() const { return spec_.p.t_max * (1.0 - spec_.cap_backoff); }
  std::vector<std::vector<std::size_t>> tests_by_step_;
};

/// Forward-difference gradient of wf f + w^T g with relative perturbation `rel_step`.
inline Eigen::VectorXd finite_difference_gradient(Transcription& tr, const Eigen::VectorXd& z, double wf,
                                                  const Eigen::VectorXd& w, double rel_step = 1e-6) {
  double f0 = 0.0;
  Eigen::VectorXd g0;
  tr.evaluate(z, f0, g0);
  const double base = wf * f0 + w.dot(g0);
  Eigen::VectorXd grad(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Eigen::VectorXd zp = z;
    const double h = rel_step * std::max(1.0, std::abs(z[i]));
    // Step inward at an upper bound so the perturbed point stays admissible.
    const double signed_h = z[i] + h > tr.upper()[i] ? -h : h;
    zp[i] += signed_h;
    double f = 0.0;
    Eigen::VectorXd g;
    tr.evaluate(zp, f, g);
    grad[i] = (wf * f + w.dot(g) - base) / signed_h;
  }
  return grad;
}

struct ConstraintActivity {
  std::vector<double> times;        ///< constraint grid (days)
  std::vector<double> icu_ratio;    ///< ICU occupancy / cap
  std::vector<double> tests_ratio;  ///< T^tot / T^max
  std::vector<std::size_t> at_lower;  ///< per interval: decisions on their lower bound
  std::vector<std::size_t> at_upper;  ///< per interval: decisions on their upper bound
};

enum class OcpStatus { Converged, Infeasible, NonConvergence };

inline std::string_view to_string(OcpStatus s) {
  switch (s) {
    case OcpStatus::Converged: return "converged";
    case OcpStatus::Infeasible: return "infeasible";
    case OcpStatus::NonConvergence: return "nonconvergence";
  }
  return "unknown";
}

struct SolverDiagnostics {
  int iterations = 0;
  int qp_iterations = 0;
  int evaluations = 0;
  double stationarity = 0.0;
  double max_violation = 0.0;        ///< scaled, on the optimization grid
  double best_violation = 0.0;       ///< smallest scaled violation seen across iterations
  double complementarity = 0.0;
  double verification_violation = 0.0;  ///< scaled, on the twice finer verification grid
  std::size_t n_variables = 0;
  std::size_t n_constraints = 0;
};

struct OcpSolution {
  OcpStatus status = OcpStatus::NonConvergence;
  PiecewisePolicy policy;
  double objective = 0.0;
  Trajectory trajectory;
  ConstraintActivity activity;
  SolverDiagnostics diagnostics;

  bool feasible(double tol = 1e-6) const { return diagnostics.max_violation <= tol; }
};

struct OcpSolveOptions {
  nlp::Options nlp;
  bool compute_ngm = true;
  bool verify = true;
};

/// T^tot at each interior interval boundary under the testing rates of the interval ending there.
inline std::vector<double> interval_end_tests(const Trajectory& traj, const PiecewisePolicy& policy,
                                              const ModelParameters& p) {
  std::vector<double> out;
  if (traj.size() < 2) return out;
  const double step = traj.times[1] - traj.times[0];
  const std::size_t per_interval = detail::whole_steps(policy.interval_days, step, "interval_end_tests");
  for (std::size_t n = per_interval, k = 0; n + 1 < traj.size(); n += per_interval, ++k) {
    out.push_back(total_tests(traj.states[n], policy.interval(k).theta, p));
  }
  return out;
}

/// Largest scaled violation of the ICU and test caps over the samples of `traj` on multiples of sample_days.
inline double path_violation(const OcpSpec& spec, const PiecewisePolicy& policy, const Trajectory& traj,
                             double sample_days) {
  const double step = traj.times[1] - traj.times[0];
  const std::size_t every = detail::whole_steps(sample_days, step, "path_violation");
  double worst = 0.0;
  for (std::size_t n = every; n < traj.size(); n += every) worst = std::max(worst, traj.icu_abs[n] / spec.p.h_icu_max - 1.0);
  if (spec.caps_tests()) {
    for (std::size_t n = 0; n < traj.size(); n += every) worst = std::max(worst, traj.t_tot[n] / spec.p.t_max - 1.0);
    for (double t : interval_end_tests(traj, policy, spec.p)) worst = std::max(worst, t / spec.p.t_max - 1.0);
  }
  return worst;
}

/// Largest scaled path-constraint violation of `policy` with half the integration step and half the sampling grid.
inline double verify_constraints(const OcpSpec& spec, const PiecewisePolicy& policy) {
  const double step = 0.5 * spec.step_days;
  const Trajectory fine = simulate(spec.x0, policy, spec.p, spec.horizon_days(), step, {.compute_ngm = false});
  return path_violation(spec, policy, fine, 0.5 * spec.constraint_step_days);
}

/// Unscaled objective of `kind` for a policy and its trajectory.
inline double evaluate_objective(const OcpSpec& spec, const PiecewisePolicy& policy, const Trajectory& traj) {
  switch (spec.kind) {
    case OcpKind::TestingOnly: return objective_j1(traj, spec.constraint_step_days);
    case OcpKind::HomogeneousDistancing: return objective_j2(policy, spec.p, spec.kappa);
    case OcpKind::AgeDependentDistancing: return objective_j3(policy, spec.p, spec.kappa);
  }
  return 0.0;
}

/// Default warm start: theta = 0.3 for testing, delta = 0.45 otherwise (clipped to beta_min).
inline PiecewisePolicy default_initial_guess(const OcpSpec& spec) {
  const auto& p = spec.p;
  ControlInput u = lifted_control(p);
  switch (spec.kind) {
    case OcpKind::TestingOnly:
      u.theta.setConstant(0.3);
      break;
    case OcpKind::HomogeneousDistancing:
      u.beta = 0.45 * p.beta0;
      break;
    case OcpKind::AgeDependentDistancing:
      u.beta = (0.45 * p.beta0).cwiseMax(spec.effective_beta_min());
      break;
  }
  return PiecewisePolicy::constant(u, spec.n_intervals(), spec.interval_days);
}

/// Solves the transcribed problem from `initial_guess` and post-processes the optimum.
inline OcpSolution solve_ocp(const OcpSpec& spec, const PiecewisePolicy& initial_guess, const OcpSolveOptions& options = {}) {
  Transcription tr(spec);
  const Eigen::VectorXd z0 = tr.encode(initial_guess);
  const nlp::Result res = nlp::solve(tr, z0, options.nlp);

  OcpSolution sol;
  sol.policy = tr.decode(res.z);
  sol.trajectory = simulate(spec.x0, sol.policy, spec.p, spec.horizon_days(), spec.step_days,
                            {.compute_ngm = options.compute_ngm});
  for (auto& t : sol.trajectory.times) t += spec.t0;
  if (sol.trajectory.herd_immunity_day) *sol.trajectory.herd_immunity_day += spec.t0;
  sol.objective = evaluate_objective(spec, sol.policy, sol.trajectory);

  const std::size_t every = detail::whole_steps(spec.constraint_step_days, spec.step_days, "ocp constraint grid");
  for (std::size_t n = 0; n < sol.trajectory.size(); n += every) {
    sol.activity.times.push_back(sol.trajectory.times[n]);
    sol.activity.icu_ratio.push_back(sol.trajectory.icu_abs[n] / spec.p.h_icu_max);
    sol.activity.tests_ratio.push_back(sol.trajectory.t_tot[n] / spec.p.t_max);
  }
  const std::size_t block = tr.variables_per_interval();
  for (std::size_t k = 0; k < tr.n_intervals(); ++k) {
    std::size_t lo = 0, hi = 0;
    for (std::size_t q = 0; q < block; ++q) {
      const auto at = static_cast<Eigen::Index>(k * block + q);
      if (res.z[at] <= tr.lower()[at]) ++lo;
      if (res.z[at] >= tr.upper()[at]) ++hi;
    }
    sol.activity.at_lower.push_back(lo);
    sol.activity.at_upper.push_back(hi);
  }

  auto& d = sol.diagnostics;
  d.iterations = res.iterations;
  d.qp_iterations = res.qp_iterations;
  d.evaluations = res.evaluations;
  d.stationarity = res.stationarity;
  d.complementarity = res.complementarity;
  d.best_violation = res.best_violation;
  d.n_variables = tr.n_variables();
  d.n_constraints = tr.n_constraints();
  // Violation against the true caps, independent of any optimizer back-off.
  d.max_violation = path_violation(spec, sol.policy, sol.trajectory, spec.constraint_step_days);
  d.verification_violation = options.verify ? verify_constraints(spec, sol.policy) : 0.0;

  switch (res.status) {
    case nlp::Status::Converged: sol.status = OcpStatus::Converged; break;
    case nlp::Status::Infeasible: sol.status = OcpStatus::Infeasible; break;
    case nlp::Status::IterationLimit:
      sol.status = res.max_violation > options.nlp.feasibility_tol ? OcpStatus::Infeasible : OcpStatus::NonConvergence;
      break;
  }
  return sol;
}

/// Homogeneous factors delta_k of a policy.
inline std::vector<double> distancing_series(const PiecewisePolicy& policy, const ModelParameters& p) {
  std::vector<double> out;
  out.reserve(policy.size());
  for (const auto& u : policy.controls) out.push_back(distancing_factor(u.beta, p));
  return out;
}

}  // namespace seitphr

#endif  // SEITPHR_OCP_HPP
