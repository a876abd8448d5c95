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
#ifndef SEITPHR_NLP_HPP
#define SEITPHR_NLP_HPP

/**
 * @file
 * @brief Bound- and inequality-constrained nonlinear programming by SQP.
 *
 * Solves
 * \f[ \min_z f(z) \quad \text{s.t.} \quad g(z) \le 0,\; l \le z \le u \f]
 * with a line-search SQP method. The Lagrangian Hessian is either the
 * eigenvalue-modified finite-difference Hessian of exact gradients or a
 * damped BFGS approximation. QP subproblems are elastic with one
 * l-infinity slack, so inconsistent linearizations still yield a step; steps
 * are globalized with an l1 exact penalty merit function and a second-order
 * correction against the Maratos effect.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <limits>

#include "seitphr/qp.hpp"

namespace seitphr::nlp {

/**
 * A problem exposes its box and evaluators. gradient() and jacobian() are
 * only ever called at the point most recently passed to evaluate().
 */
template <class P>
concept Problem = requires(P& prob, const Eigen::VectorXd& z, double& f, Eigen::VectorXd& g, double wf,
                           Eigen::MatrixXd& jac) {
  { prob.n_variables() } -> std::convertible_to<std::size_t>;
  { prob.n_constraints() } -> std::convertible_to<std::size_t>;
  { prob.lower() } -> std::convertible_to<const Eigen::VectorXd&>;
  { prob.upper() } -> std::convertible_to<const Eigen::VectorXd&>;
  prob.evaluate(z, f, g);
  { prob.gradient(wf, g) } -> std::convertible_to<Eigen::VectorXd>;
  prob.jacobian(jac);
};

/// Problems may supply a diagonal Hessian guess for the objective.
template <class P>
concept HasCurvatureHint = requires(const P& prob) {
  { prob.curvature_hint() } -> std::convertible_to<Eigen::VectorXd>;
};

enum class HessianMode { Exact, Bfgs };

struct Options {
  /// Exact: finite differences of Lagrangian gradients, made positive definite. Bfgs: damped quasi-Newton.
  HessianMode hessian = HessianMode::Exact;
  double feasibility_tol = 1e-6;
  double stationarity_tol = 1e-6;
  double complementarity_tol = 1e-6;
  double penalty_init = 10.0;
  double penalty_max = 1e10;
  int max_iterations = 400;
  /// Stop after this many consecutive iterations without merit progress above 1e-12 (relative).
  int max_stalled = 15;
  /// Lower bound on the l1 merit weight; constraints are assumed scaled to O(1).
  double merit_floor = 1e-2;
  bool trace = false;  ///< one line per iteration on stderr
};

enum class Status { Converged, Infeasible, IterationLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::Infeasible: return "infeasible";
    case Status::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

struct Result {
  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;
  Eigen::VectorXd constraints;
  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double best_violation = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int qp_iterations = 0;
  int evaluations = 0;
  Status status = Status::IterationLimit;
};

inline Eigen::VectorXd project(const Eigen::VectorXd& z, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return z.cwiseMax(lo).cwiseMin(hi);
}

/// Infinity norm of the projected gradient step P(z - grad) - z.
inline double projected_gradient_norm(const Eigen::VectorXd& z, const Eigen::VectorXd& grad, const Eigen::VectorXd& lo,
                                      const Eigen::VectorXd& hi) {
  return (project(z - grad, lo, hi) - z).lpNorm<Eigen::Infinity>();
}

inline double max_violation(const Eigen::VectorXd& g) {
  return g.size() == 0 ? 0.0 : std::max(0.0, g.maxCoeff());
}

namespace detail {

struct Step {
  Eigen::VectorXd d;
  Eigen::VectorXd lambda;
  double slack = 0.0;  ///< linearized max violation after the step
  bool ok = false;
  int iterations = 0;
};

/// Elastic subproblem: min 1/2 d'Bd + grad'd + nu (t + t^2/2), g + J d <= t, t >= 0, lo <= z + d <= hi.
inline Step solve_subproblem(const Eigen::MatrixXd& B, const Eigen::VectorXd& grad, const Eigen::MatrixXd& jac,
                             const Eigen::VectorXd& g, const Eigen::VectorXd& dlo, const Eigen::VectorXd& dhi, double nu) {
  const Eigen::Index n = B.rows();
  const Eigen::Index m = jac.rows();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n + 1, n + 1);
  G.topLeftCorner(n, n) = B;
  G(n, n) = nu;
  Eigen::VectorXd a(n + 1);
  a.head(n) = grad;
  a[n] = nu;
  Eigen::MatrixXd C(m, n + 1);
  C.leftCols(n) = -jac;
  C.col(n).setOnes();
  Eigen::VectorXd lo(n + 1), hi(n + 1);
  lo.head(n) = dlo;
  hi.head(n) = dhi;
  lo[n] = 0.0;
  hi[n] = std::numeric_limits<double>::infinity();
  const qp::Result r = qp::solve(G, a, C, g, lo, hi);
  Step out;
  out.iterations = r.iterations;
  if (r.status != qp::Status::Optimal) return out;
  out.d = r.x.head(n).cwiseMax(dlo).cwiseMin(dhi);
  out.slack = r.x[n];
  out.lambda = r.multipliers;
  out.ok = true;
  return out;
}

inline void damped_bfgs(Eigen::MatrixXd& B, const Eigen::VectorXd& s, Eigen::VectorXd y) {
  const Eigen::VectorXd bs = B * s;
  const double sbs = s.dot(bs);
  if (!(sbs > 1e-300)) return;
  double sy = s.dot(y);
  if (sy < 0.2 * sbs) {
    const double w = 0.8 * sbs / (sbs - sy);
    y = w * y + (1.0 - w) * bs;
    sy = s.dot(y);
  }
  if (!(sy > 1e-300)) return;
  B += y * y.transpose() / sy - bs * bs.transpose() / sbs;
  B = 0.5 * (B + B.transpose());
}

}  // namespace detail

/// Finite-difference Hessian of the Lagrangian f + lambda^T g at the problem's cached point z.
template <Problem P>
Eigen::MatrixXd lagrangian_hessian(P& problem, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
                                   const Eigen::VectorXd& grad_lagrangian, double rel_step, int& evaluations) {
  const Eigen::VectorXd& hi = problem.upper();
  const Eigen::Index n = z.size();
  Eigen::MatrixXd H(n, n);
  double f = 0.0;
  Eigen::VectorXd g;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd zp = z;
    double h = rel_step * std::max(1.0, std::abs(z[i]));
    if (z[i] + h > hi[i]) h = -h;
    zp[i] += h;
    problem.evaluate(zp, f, g);
    ++evaluations;
    H.col(i) = (problem.gradient(1.0, lambda) - grad_lagrangian) / h;
  }
  problem.evaluate(z, f, g);
  ++evaluations;
  return 0.5 * (H + H.transpose());
}

/// Symmetric positive definite modification: eigenvalues replaced by max(|ev|, floor).
inline Eigen::MatrixXd make_positive_definite(const Eigen::MatrixXd& H, double rel_floor) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double floor = rel_floor * std::max(1e-300, ev.cwiseAbs().maxCoeff());
  const Eigen::VectorXd fixed = ev.cwiseAbs().cwiseMax(floor);
  return eig.eigenvectors() * fixed.asDiagonal() * eig.eigenvectors().transpose();
}

/// SQP solve from z0 (projected into the box first).
template <Problem P>
Result solve(P& problem, const Eigen::VectorXd& z0, const Options& opt = {}) {
  const Eigen::VectorXd& lo = problem.lower();
  const Eigen::VectorXd& hi = problem.upper();
  const auto n = static_cast<Eigen::Index>(problem.n_variables());
  const auto m = static_cast<Eigen::Index>(problem.n_constraints());

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  if constexpr (HasCurvatureHint<P>) diag = problem.curvature_hint();
  const double positive_mean =
      (diag.array() > 0.0).any() ? diag.sum() / static_cast<double>((diag.array() > 0.0).count()) : 1.0;
  const Eigen::VectorXd b0 = diag.cwiseMax(1e-2 * positive_mean);
  Eigen::MatrixXd B = b0.asDiagonal();

  Result res;
  res.z = project(z0, lo, hi);
  res.multipliers = Eigen::VectorXd::Zero(m);
  double f = 0.0;
  Eigen::VectorXd g(m);
  Eigen::MatrixXd jac(m, n);
  problem.evaluate(res.z, f, g);
  ++res.evaluations;
  Eigen::VectorXd grad = problem.gradient(1.0, Eigen::VectorXd::Zero(m));
  problem.jacobian(jac);

  double nu = opt.penalty_init;
  double nu_merit = 0.0;
  double viol = max_violation(g);
  int stalled = 0;
  int line_search_failures = 0;
  auto l1 = [](const Eigen::VectorXd& v) { return v.cwiseMax(0.0).sum(); };

  auto finish = [&](Status status) {
    res.status = status;
    res.objective = f;
    res.constraints = g;
    res.max_violation = viol;
    res.best_violation = std::min(res.best_violation, viol);
    return res;
  };

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    res.best_violation = std::min(res.best_violation, viol);
    const Eigen::VectorXd dlo = lo - res.z, dhi = hi - res.z;

    if (opt.hessian == HessianMode::Exact) {
      const Eigen::VectorXd gl = grad + jac.transpose() * res.multipliers;
      B = make_positive_definite(lagrangian_hessian(problem, res.z, res.multipliers, gl, 1e-6, res.evaluations) +
                                     Eigen::MatrixXd(1e-8 * b0.asDiagonal()),
                                 1e-8);
    }
    detail::Step step = detail::solve_subproblem(B, grad, jac, g, dlo, dhi, nu);
    res.qp_iterations += step.iterations;
    // Raise the elastic weight while the linearization stays inconsistent.
    while (step.ok && step.slack > opt.feasibility_tol && nu < opt.penalty_max) {
      nu = std::min(opt.penalty_max, nu * 10.0);
      step = detail::solve_subproblem(B, grad, jac, g, dlo, dhi, nu);
      res.qp_iterations += step.iterations;
    }
    if (!step.ok) {
      B = b0.asDiagonal();
      step = detail::solve_subproblem(B, grad, jac, g, dlo, dhi, nu);
      res.qp_iterations += step.iterations;
      if (!step.ok) break;
    }

    // KKT residuals at the current point with the subproblem multipliers.
    const Eigen::VectorXd grad_lagrangian = grad + jac.transpose() * step.lambda;
    res.stationarity = projected_gradient_norm(res.z, grad_lagrangian, lo, hi);
    res.complementarity = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      res.complementarity = std::max(res.complementarity, std::abs(std::min(-g[k], step.lambda[k])));
    }
    if (opt.trace) {
      std::fprintf(stderr, "sqp %3d f %.10e viol %.2e kkt %.2e compl %.2e |d| %.2e slack %.1e nu %.1e qp %d", it, f,
                   viol, res.stationarity, res.complementarity, step.d.lpNorm<Eigen::Infinity>(), step.slack, nu,
                   step.iterations);
    }
    if (viol <= opt.feasibility_tol && res.stationarity <= opt.stationarity_tol &&
        res.complementarity <= opt.complementarity_tol) {
      if (opt.trace) std::fprintf(stderr, "\n");
      res.multipliers = step.lambda;
      return finish(Status::Converged);
    }
    if (step.d.lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(1.0, res.z.lpNorm<Eigen::Infinity>())) {
      if (opt.trace) std::fprintf(stderr, "\n");
      res.multipliers = step.lambda;
      return finish(viol <= opt.feasibility_tol ? Status::Converged : Status::Infeasible);
    }

    // l1 merit line search with one second-order correction.
    // Powell's update: tracks the multipliers and decays after an elastic phase.
    const double lambda_max = step.lambda.size() ? step.lambda.maxCoeff() : 0.0;
    nu_merit = std::max({1.5 * lambda_max, 0.5 * (nu_merit + 1.5 * lambda_max), opt.merit_floor});
    const double merit0 = f + nu_merit * l1(g);
    const double slope = grad.dot(step.d) + nu_merit * (l1(g + jac * step.d) - l1(g));
    double f_trial = 0.0;
    Eigen::VectorXd g_trial(m), z_trial;
    auto try_point = [&](const Eigen::VectorXd& z, double alpha) {
      z_trial = project(z, lo, hi);
      problem.evaluate(z_trial, f_trial, g_trial);
      ++res.evaluations;
      const double merit = f_trial + nu_merit * l1(g_trial);
      return std::isfinite(merit) && merit <= merit0 + 1e-4 * alpha * std::min(slope, 0.0);
    };
    double alpha = 1.0;
    bool accepted = try_point(res.z + step.d, 1.0);
    if (!accepted && l1(g_trial) > l1(g)) {
      const Eigen::VectorXd g_soc = g_trial - jac * step.d;
      const detail::Step soc = detail::solve_subproblem(B, grad, jac, g_soc, dlo, dhi, nu);
      res.qp_iterations += soc.iterations;
      if (soc.ok) accepted = try_point(res.z + soc.d, 1.0);
    }
    while (!accepted && alpha > 1e-10) {
      alpha *= 0.5;
      accepted = try_point(res.z + alpha * step.d, alpha);
    }
    if (opt.trace) std::fprintf(stderr, " alpha %.3g\n", accepted ? alpha : 0.0);
    if (!accepted) {
      problem.evaluate(res.z, f, g);  // restore the problem's cached point
      ++res.evaluations;
      if (++line_search_failures > 2) break;
      B = b0.asDiagonal();
      continue;
    }
    line_search_failures = 0;

    const double merit_new = f_trial + nu_merit * l1(g_trial);
    stalled = (merit0 - merit_new) <= 1e-12 * std::max(1.0, std::abs(merit0)) ? stalled + 1 : 0;

    const Eigen::VectorXd s = z_trial - res.z;
    const Eigen::VectorXd grad_new = problem.gradient(1.0, Eigen::VectorXd::Zero(m));
    Eigen::MatrixXd jac_new(m, n);
    problem.jacobian(jac_new);
    if (opt.hessian == HessianMode::Bfgs) {
      detail::damped_bfgs(B, s, grad_new + jac_new.transpose() * step.lambda - grad_lagrangian);
    }

    res.z = z_trial;
    res.multipliers = step.lambda;
    f = f_trial;
    g = g_trial;
    grad = grad_new;
    jac = std::move(jac_new);
    viol = max_violation(g);
    if (stalled > opt.max_stalled) break;
  }
  const bool stuck_infeasible = viol > opt.feasibility_tol && nu >= opt.penalty_max;
  return finish(stuck_infeasible ? Status::Infeasible : Status::IterationLimit);
}

}  // namespace seitphr::nlp

#endif  // SEITPHR_NLP_HPP
