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
#include <gtest/gtest.h>

#include <random>

#include "seitphr/ocp.hpp"
#include "support.hpp"

namespace seitphr {
namespace {

OcpSpec short_spec(OcpKind kind, std::size_t weeks, double e0 = 1e-4) {
  OcpSpec s;
  s.kind = kind;
  s.p = default_parameters();
  s.x0 = initial_state(s.p, e0, e0);
  s.tf = 7.0 * static_cast<double>(weeks);
  if (kind == OcpKind::AgeDependentDistancing) s.beta_min = 0.2 * s.p.beta0;
  return s;
}

Eigen::VectorXd random_point(const Transcription& tr, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Eigen::VectorXd z(tr.n_variables());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double lo = tr.lower()[i];
    const double hi = std::isfinite(tr.upper()[i]) ? tr.upper()[i] : lo + 0.5;
    z[i] = lo + u(rng) * (hi - lo);
  }
  return z;
}

constexpr OcpKind kKinds[] = {OcpKind::TestingOnly, OcpKind::HomogeneousDistancing, OcpKind::AgeDependentDistancing};

TEST(Ocp, DecisionCounts) {
  EXPECT_EQ(Transcription(short_spec(OcpKind::TestingOnly, 104)).n_variables(), 312u);
  EXPECT_EQ(Transcription(short_spec(OcpKind::HomogeneousDistancing, 104)).n_variables(), 416u);
  EXPECT_EQ(Transcription(short_spec(OcpKind::AgeDependentDistancing, 104)).n_variables(), 936u);
  OcpSpec asym = short_spec(OcpKind::AgeDependentDistancing, 104);
  asym.symmetric_beta = false;
  EXPECT_EQ(Transcription(asym).n_variables(), 104u * 12u);
  const Transcription t2(short_spec(OcpKind::HomogeneousDistancing, 4));
  EXPECT_EQ(t2.n_samples(), 28u);
  // ICU at 28 samples, tests at 29 samples and 3 interior boundaries.
  EXPECT_EQ(t2.n_constraints(), 28u + 29u + 3u);
  EXPECT_EQ(Transcription(short_spec(OcpKind::TestingOnly, 4)).n_constraints(), 28u);
}

TEST(Ocp, ObjectiveReferenceValues) {
  const auto p = default_parameters();
  ControlInput half = lifted_control(p);
  half.beta = 0.5 * p.beta0;
  EXPECT_NEAR(objective_j2(PiecewisePolicy::constant(half, 104), p, 0.0), 182.0, 1e-9);
  const auto lifted = PiecewisePolicy::constant(lifted_control(p), 104);
  EXPECT_EQ(objective_j2(lifted, p, 1e-5), 0.0);
  EXPECT_EQ(objective_j3(lifted, p, 1e-5), 0.0);

  // J3 of a uniform scaling equals (1 - s)^2 sum N_i N_j beta0_ij^2 per day.
  double weighted = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) weighted += p.N[i] * p.N[j] * p.beta0(i, j) * p.beta0(i, j);
  }
  EXPECT_NEAR(objective_j3(PiecewisePolicy::constant(half, 2), p, 0.0), 14.0 * 0.25 * weighted, 1e-14);
  ControlInput tested = lifted_control(p);
  tested.theta << 0.1, 0.2, 0.3;
  EXPECT_NEAR(objective_j2(PiecewisePolicy::constant(tested, 2), p, 1e-5), 14.0 * 1e-5 * 0.6, 1e-15);
}

TEST(Ocp, TestingObjectiveMatchesDailySum) {
  const auto p = default_parameters();
  ControlInput u = lifted_control(p);
  u.theta << 0.2, 0.1, 0.05;
  const Trajectory traj = simulate(initial_state(p, 1e-4, 1e-4), PiecewisePolicy::constant(u, 4), p, 28.0, 1.0,
                                   {.compute_ngm = false});
  double expected = 0.0;
  for (std::size_t n = 0; n < traj.size(); ++n) {
    const StateVector& x = traj.states[n];
    double tests = 0.0;
    for (std::size_t g = 0; g < 3; ++g) {
      const auto a = x.group(g);
      const auto gi = static_cast<Eigen::Index>(g);
      tests += u.theta[gi] * (a.s + a.e + a.i_s + a.i_m + a.i_a + a.r_u) + p.eta_s * a.i_s + p.eta_m * a.i_m;
    }
    expected += (n == 0 || n + 1 == traj.size() ? 0.5 : 1.0) * tests * p.n_pop;
  }
  EXPECT_NEAR(objective_j1(traj), expected, 1e-9 * expected);
}

TEST(Ocp, EncodeDecodeRoundTrip) {
  std::mt19937_64 rng(3);
  for (OcpKind kind : kKinds) {
    const Transcription tr(short_spec(kind, 3));
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd z = random_point(tr, rng);
      EXPECT_LT((tr.encode(tr.decode(z)) - z).lpNorm<Eigen::Infinity>(), 1e-14) << to_string(kind);
    }
  }
}

TEST(Ocp, DecodedPoliciesRespectTheModelBounds) {
  std::mt19937_64 rng(5);
  const OcpSpec spec = short_spec(OcpKind::AgeDependentDistancing, 3);
  const Transcription tr(spec);
  const PiecewisePolicy policy = tr.decode(random_point(tr, rng));
  EXPECT_NO_THROW(policy.validate(spec.p));
  for (const auto& u : policy.controls) {
    EXPECT_TRUE(u.beta.isApprox(u.beta.transpose(), 0.0));
    EXPECT_TRUE((u.beta.array() >= spec.beta_min.array() - 1e-15).all());
    EXPECT_TRUE((u.beta.array() <= spec.p.beta0.array() + 1e-15).all());
  }
}

TEST(Ocp, TranscriptionMatchesSimulation) {
  std::mt19937_64 rng(9);
  for (OcpKind kind : kKinds) {
    const OcpSpec spec = short_spec(kind, 3);
    Transcription tr(spec);
    const Eigen::VectorXd z = random_point(tr, rng);
    double f = 0.0;
    Eigen::VectorXd g;
    tr.evaluate(z, f, g);
    const PiecewisePolicy policy = tr.decode(z);
    const Trajectory traj = simulate(spec.x0, policy, spec.p, spec.horizon_days(), 1.0, {.compute_ngm = false});
    const double j = evaluate_objective(spec, policy, traj);
    EXPECT_NEAR(f * tr.objective_scale(), j, 1e-12 * std::max(1.0, std::abs(j))) << to_string(kind);
    const double h_cap = spec.p.h_icu_max * (1.0 - spec.cap_backoff);
    for (std::size_t c = 1; c <= tr.n_samples(); ++c) {
      EXPECT_NEAR(g[static_cast<Eigen::Index>(c - 1)], traj.icu_abs[c] / h_cap - 1.0, 1e-12);
    }
  }
}

// Adjoint gradients and forward-sensitivity Jacobians against finite differences.
TEST(Ocp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (OcpKind kind : kKinds) {
    Transcription tr(short_spec(kind, 3, 3e-3));
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd z = random_point(tr, rng);
      Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tr.n_constraints()));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = u(rng);
      double f = 0.0;
      Eigen::VectorXd g;
      tr.evaluate(z, f, g);
      const Eigen::VectorXd exact = tr.gradient(1.0, w);
      const Eigen::VectorXd fd = finite_difference_gradient(tr, z, 1.0, w, 1e-7);
      EXPECT_LT((exact - fd).lpNorm<Eigen::Infinity>(), 1e-4 * std::max(1.0, fd.lpNorm<Eigen::Infinity>()))
          << to_string(kind) << " trial " << trial;
    }
  }
}

TEST(Ocp, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(23);
  for (OcpKind kind : kKinds) {
    Transcription tr(short_spec(kind, 2, 3e-3));
    const Eigen::VectorXd z = random_point(tr, rng);
    double f = 0.0;
    Eigen::VectorXd g0, g;
    tr.evaluate(z, f, g0);
    Eigen::MatrixXd jac(tr.n_constraints(), tr.n_variables());
    tr.jacobian(jac);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Eigen::VectorXd zp = z, zm = z;
      const double h = 1e-6;
      zp[i] += h;
      zm[i] -= h;
      Eigen::VectorXd gp, gm;
      tr.evaluate(zp, f, gp);
      tr.evaluate(zm, f, gm);
      const Eigen::VectorXd col = (gp - gm) / (2.0 * h);
      EXPECT_LT((jac.col(i) - col).lpNorm<Eigen::Infinity>(), 1e-6 * std::max(1.0, col.lpNorm<Eigen::Infinity>()))
          << to_string(kind) << " column " << i;
    }
  }
}

TEST(Ocp, DeriveBetaMin) {
  const auto p = default_parameters();
  const Eigen::MatrixXd lo = derive_beta_min({0.9, 0.31, 0.5}, p);
  EXPECT_TRUE(lo.isApprox(0.31 * p.beta0, 1e-15));
  EXPECT_THROW((void)derive_beta_min({}, p), ValidationError);
  EXPECT_THROW((void)derive_beta_min({1.2}, p), ValidationError);
}

TEST(Ocp, UnlimitedIcuLeavesContactsAlone) {
  OcpSpec spec = short_spec(OcpKind::HomogeneousDistancing, 8);
  spec.p.h_icu_max = std::numeric_limits<double>::infinity();
  OcpSolveOptions options;
  options.compute_ngm = false;
  options.verify = false;
  const OcpSolution sol = solve_ocp(spec, default_initial_guess(spec), options);
  EXPECT_EQ(sol.status, OcpStatus::Converged);
  for (double d : distancing_series(sol.policy, spec.p)) EXPECT_NEAR(d, 1.0, 1e-6);
  EXPECT_NEAR(distancing_cost(sol.policy, spec.p, spec.kind), 0.0, 1e-9);
}

TEST(Ocp, ShortHomogeneousSolveIsFeasibleAndStationary) {
  OcpSpec spec = short_spec(OcpKind::HomogeneousDistancing, 6, 5e-3);
  spec.p.h_icu_max = 2000.0;
  const OcpSolution sol = solve_ocp(spec, default_initial_guess(spec));
  EXPECT_EQ(sol.status, OcpStatus::Converged);
  EXPECT_TRUE(sol.feasible(1e-6));
  EXPECT_LE(sol.diagnostics.verification_violation, 1e-4);
  EXPECT_LT(sol.diagnostics.stationarity, 1e-6);
  // Binding caps force distancing, so the cost is positive.
  EXPECT_GT(sol.objective, 0.0);
  const auto series = distancing_series(sol.policy, spec.p);
  EXPECT_LT(*std::min_element(series.begin(), series.end()), 1.0);
}

TEST(Ocp, ValidationErrors) {
  OcpSpec spec = short_spec(OcpKind::HomogeneousDistancing, 2);
  spec.tf = 10.0;
  EXPECT_THROW(Transcription{spec}, ValidationError);
  spec = short_spec(OcpKind::HomogeneousDistancing, 2);
  spec.cap_backoff = 1.0;
  EXPECT_THROW(Transcription{spec}, ValidationError);
  spec = short_spec(OcpKind::AgeDependentDistancing, 2);
  spec.beta_min = 2.0 * spec.p.beta0;
  EXPECT_THROW(Transcription{spec}, ValidationError);
  spec.beta_min = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(Transcription{spec}, StructuralError);
  EXPECT_THROW((void)parse_ocp_kind("bogus"), ConfigError);
  EXPECT_EQ(parse_ocp_kind("2"), OcpKind::HomogeneousDistancing);
}

}  // namespace
}  // namespace seitphr
