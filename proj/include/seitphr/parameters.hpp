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
#ifndef SEITPHR_PARAMETERS_HPP
#define SEITPHR_PARAMETERS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "seitphr/errors.hpp"
#include "seitphr/model.hpp"

namespace seitphr {

/// Mean daily physical contacts c_ij of a member of group i with group j.
struct ContactMatrix {
  Eigen::MatrixXd c;
};

struct CalibrationSpec {
  double r0 = 2.5;
  double eta_inv = 6.0;  ///< mean infectious period in days
};

struct Calibration {
  double alpha = 0.0;
  Eigen::MatrixXd beta0;
};

/**
 * Scales a contact matrix into transmission rates beta0 = alpha * c so that
 * sum_ij N_i N_j beta0_ij * eta_inv equals the target R0.
 */
inline Calibration calibrate_transmission(const ContactMatrix& contacts, const Eigen::VectorXd& N,
                                          const CalibrationSpec& spec) {
  const auto& c = contacts.c;
  if (c.rows() != c.cols() || c.rows() != N.size()) throw StructuralError("calibrate_transmission: size mismatch");
  if ((c.array() < 0.0).any()) throw ValidationError("calibrate_transmission: negative contact entries");
  if (std::abs(N.sum() - 1.0) > 1e-9) throw ValidationError("calibrate_transmission: N must sum to 1");
  if (!(spec.eta_inv > 0.0) || spec.r0 < 0.0) throw ValidationError("calibrate_transmission: invalid calibration spec");
  const double weighted = N.dot(c * N);
  if (!(weighted > 0.0)) throw CalibrationError("calibrate_transmission: contact matrix carries no contacts");
  const double alpha = spec.r0 / (spec.eta_inv * weighted);
  return {alpha, alpha * c};
}

/**
 * Rate of an exponential stay whose mean is median/ln 2 minus offset days.
 * Exp(z) has median ln 2 / z, so the median converts to the mean median / ln 2.
 */
inline double median_to_mean_rate(double median_days, double offset_days) {
  const double mean = median_days / std::numbers::ln2 - offset_days;
  if (!(mean > 0.0)) throw DomainError("median_to_mean_rate: nonpositive mean stay");
  return 1.0 / mean;
}

/// German three-group parameter set (ages <15, 15-60, >60).
inline ModelParameters default_parameters() {
  ModelParameters p;
  p.n_groups = 3;
  p.N = Eigen::Vector3d(0.14, 0.58, 0.28);
  p.beta0.resize(3, 3);
  p.beta0 << 0.46, 0.48, 0.12,  //
      0.48, 0.63, 0.29,         //
      0.12, 0.29, 0.18;
  p.gamma = 0.19;
  // Columns of the published severity table; group 1 sums to 1.0001 as printed.
  const Eigen::Matrix3d pi_table = (Eigen::Matrix3d() << 0.0053, 0.0031, 0.0302,  //
                                    0.1211, 0.2201, 0.2512,                         //
                                    0.8737, 0.7768, 0.7186)
                                       .finished();
  p.pi_s.resize(3);
  p.pi_m.resize(3);
  p.pi_a.resize(3);
  for (int g = 0; g < 3; ++g) {
    const double total = pi_table.col(g).sum();
    p.pi_s[g] = pi_table(0, g) / total;
    p.pi_m[g] = pi_table(1, g) / total;
    p.pi_a[g] = pi_table(2, g) / total;
  }
  p.eta_s = 0.25;
  p.eta_m = 0.25;
  p.eta_a = 0.17;
  p.tau_s = 0.5 + p.eta_s;
  p.tau_o = p.eta_m + p.eta_a + 0.5;
  p.rho = median_to_mean_rate(9.0, 2.0);
  p.sigma = 1.0 / 10.5;
  p.n_pop = 83.1e6;
  p.h_icu_max = 10000.0;
  p.t_max = 1200000.0 / 7.0;
  return p;
}

/**
 * Collapses a parameter set into a single homogeneous group: N = 1,
 * beta = sum_ij N_i N_j beta0_ij and the group-share weighted severity split.
 */
inline ModelParameters aggregate_to_one_group(const ModelParameters& p) {
  ModelParameters q = p;
  q.n_groups = 1;
  q.N = Eigen::VectorXd::Ones(1);
  q.beta0 = Eigen::MatrixXd::Constant(1, 1, mean_contact_rate(p.beta0, p.N));
  q.pi_s = Eigen::VectorXd::Constant(1, p.N.dot(p.pi_s));
  q.pi_m = Eigen::VectorXd::Constant(1, p.N.dot(p.pi_m));
  q.pi_a = Eigen::VectorXd::Constant(1, p.N.dot(p.pi_a));
  return q;
}

/**
 * Initial state with e0_total latent and i0_total infectious agents spread
 * over the age groups by N_i; the infectious mass of group i is split over
 * (I^S, I^M, I^A) in proportion to (pi^S_i, pi^M_i, pi^A_i).
 */
inline StateVector initial_state(const ModelParameters& p, double e0_total, double i0_total) {
  p.validate();
  if (e0_total < 0.0 || i0_total < 0.0 || !(e0_total + i0_total < p.n_pop)) {
    throw ValidationError("initial_state: need 0 <= e0 + i0 < n_pop");
  }
  StateVector x(p.n_groups);
  const double e_share = e0_total / p.n_pop;
  const double i_share = i0_total / p.n_pop;
  for (std::size_t g = 0; g < p.n_groups; ++g) {
    const auto gi = static_cast<Eigen::Index>(g);
    AgeGroupState a;
    a.e = p.N[gi] * e_share;
    const double infectious = p.N[gi] * i_share;
    a.i_s = infectious * p.pi_s[gi];
    a.i_m = infectious * p.pi_m[gi];
    a.i_a = infectious * p.pi_a[gi];
    a.s = p.N[gi] - a.e - a.i_s - a.i_m - a.i_a;
    x.set_group(g, a);
  }
  return x;
}

/// Default outbreak seed: 1672 latent and 524 infectious agents.
inline constexpr double kDefaultLatent = 1672.0;
inline constexpr double kDefaultInfectious = 524.0;

inline StateVector default_initial_state(const ModelParameters& p) {
  return initial_state(p, kDefaultLatent, kDefaultInfectious);
}

}  // namespace seitphr

#endif  // SEITPHR_PARAMETERS_HPP
