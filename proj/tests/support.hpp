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
#ifndef SEITPHR_TESTS_SUPPORT_HPP
#define SEITPHR_TESTS_SUPPORT_HPP

#include <Eigen/Eigenvalues>
#include <random>

#include "seitphr/seitphr.hpp"

namespace seitphr::testing {

/// Random point of the simplex with the group mass of group g equal to N_g.
inline StateVector random_state(const ModelParameters& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StateVector x(p.n_groups);
  for (std::size_t g = 0; g < p.n_groups; ++g) {
    double w[kCompartments];
    double total = 0.0;
    for (double& v : w) total += (v = u(rng));
    for (std::size_t c = 0; c < kCompartments; ++c) x(g, Compartment{c}) = p.N[static_cast<Eigen::Index>(g)] * w[c] / total;
  }
  return x;
}

inline ControlInput random_control(const ModelParameters& p, std::mt19937_64& rng, double theta_max = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ControlInput c = lifted_control(p);
  for (Eigen::Index i = 0; i < c.beta.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.beta.cols(); ++j) c.beta(i, j) = u(rng) * p.beta0(i, j);
    c.theta[i] = u(rng) * theta_max;
  }
  return c;
}

inline PiecewisePolicy random_policy(const ModelParameters& p, std::mt19937_64& rng, std::size_t weeks) {
  PiecewisePolicy policy;
  for (std::size_t k = 0; k < weeks; ++k) policy.controls.push_back(random_control(p, rng, 0.05));
  return policy;
}

// Dense F V^{-1} over (E, I^S, I^M, I^A, T^S, T^O) per group and its spectral radius.
inline double dense_ngm_radius(const StateVector& x, const ControlInput& u, const ModelParameters& p) {
  const int ng = static_cast<int>(p.n_groups), m = 6 * ng;
  enum { E, IS, IM, IA, TS, TO };
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m, m), V = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < ng; ++i) {
    const double s = x(static_cast<std::size_t>(i), Compartment::S);
    for (int j = 0; j < ng; ++j) {
      for (int c : {IS, IM, IA, TS, TO}) F(6 * i + E, 6 * j + c) = u.beta(i, j) * s;
    }
    const int o = 6 * i;
    const double th = u.theta[i];
    V(o + E, o + E) = p.gamma;
    V(o + IS, o + E) = -p.gamma * p.pi_s[i];
    V(o + IM, o + E) = -p.gamma * p.pi_m[i];
    V(o + IA, o + E) = -p.gamma * p.pi_a[i];
    V(o + IS, o + IS) = p.eta_s + th;
    V(o + IM, o + IM) = p.eta_m + th;
    V(o + IA, o + IA) = p.eta_a + th;
    V(o + TS, o + IS) = -th;
    V(o + TS, o + TS) = p.tau_s;
    V(o + TO, o + IM) = -th;
    V(o + TO, o + IA) = -th;
    V(o + TO, o + TO) = p.tau_o;
  }
  const Eigen::MatrixXd K = F * V.inverse();
  return Eigen::EigenSolver<Eigen::MatrixXd>(K).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace seitphr::testing

#endif  // SEITPHR_TESTS_SUPPORT_HPP
