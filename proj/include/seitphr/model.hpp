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
#ifndef SEITPHR_MODEL_HPP
#define SEITPHR_MODEL_HPP

/**
 * @file
 * @brief State, control and parameter types of the age-structured SEITPHR model
 * together with its vector field.
 *
 * Every compartment holds a share of the total population, so a state of
 * n_g age groups lives on the simplex of dimension 11 n_g. The force of
 * infection on group i is
 * \f[ \lambda_i = \sum_j \beta_{ij} (I^S_j + I^M_j + I^A_j + T^S_j + T^O_j), \f]
 * tested-but-not-yet-detected agents still transmit.
 */

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seitphr/errors.hpp"

namespace seitphr {

/// Tolerances shared by every validity check in the library.
namespace tolerance {
inline constexpr double simplex = 1e-9;
inline constexpr double nonnegativity = 1e-12;
}  // namespace tolerance

enum class Compartment : std::size_t { S, E, IS, IM, IA, TS, TO, P, HICU, RU, RK };

inline constexpr std::size_t kCompartments = 11;

inline constexpr std::array<std::string_view, kCompartments> kCompartmentNames = {
    "S", "E", "IS", "IM", "IA", "TS", "TO", "P", "HICU", "RU", "RK"};

constexpr std::size_t index(Compartment c) { return static_cast<std::size_t>(c); }

inline std::string_view name(Compartment c) { return kCompartmentNames[index(c)]; }

/// Population shares of the eleven compartments of one age group.
struct AgeGroupState {
  double s = 0.0;
  double e = 0.0;
  double i_s = 0.0;
  double i_m = 0.0;
  double i_a = 0.0;
  double t_s = 0.0;
  double t_o = 0.0;
  double p_pre = 0.0;
  double h_icu = 0.0;
  double r_u = 0.0;
  double r_k = 0.0;

  double& operator[](Compartment c) { return *member(*this, c); }
  double operator[](Compartment c) const { return *member(const_cast<AgeGroupState&>(*this), c); }

  double total() const { return s + e + i_s + i_m + i_a + t_s + t_o + p_pre + h_icu + r_u + r_k; }

  /// S + E + I^S + I^M + I^A + R^U: everyone eligible for random testing.
  double untested() const { return s + e + i_s + i_m + i_a + r_u; }

  bool operator==(const AgeGroupState&) const = default;

 private:
  static double* member(AgeGroupState& a, Compartment c) {
    switch (c) {
      case Compartment::S: return &a.s;
      case Compartment::E: return &a.e;
      case Compartment::IS: return &a.i_s;
      case Compartment::IM: return &a.i_m;
      case Compartment::IA: return &a.i_a;
      case Compartment::TS: return &a.t_s;
      case Compartment::TO: return &a.t_o;
      case Compartment::P: return &a.p_pre;
      case Compartment::HICU: return &a.h_icu;
      case Compartment::RU: return &a.r_u;
      case Compartment::RK: return &a.r_k;
    }
    throw StructuralError("unknown compartment");
  }
};

/// Stacked state (x_1, ..., x_{n_g}); entry (g, c) sits at 11 g + c.
class StateVector {
 public:
  StateVector() = default;

  explicit StateVector(std::size_t n_groups) : values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_groups * kCompartments))) {}

  explicit StateVector(Eigen::VectorXd values) : values_(std::move(values)) {
    if (values_.size() == 0 || values_.size() % static_cast<Eigen::Index>(kCompartments) != 0) {
      throw StructuralError("state length must be a positive multiple of 11, got " + std::to_string(values_.size()));
    }
  }

  static StateVector from_groups(const std::vector<AgeGroupState>& groups) {
    StateVector x(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) x.set_group(g, groups[g]);
    return x;
  }

  std::size_t n_groups() const { return static_cast<std::size_t>(values_.size()) / kCompartments; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  double operator()(std::size_t group, Compartment c) const { return values_[offset(group, c)]; }
  double& operator()(std::size_t group, Compartment c) { return values_[offset(group, c)]; }

  AgeGroupState group(std::size_t g) const {
    AgeGroupState a;
    for (std::size_t c = 0; c < kCompartments; ++c) a[Compartment{c}] = values_[offset(g, Compartment{c})];
    return a;
  }

  void set_group(std::size_t g, const AgeGroupState& a) {
    for (std::size_t c = 0; c < kCompartments; ++c) values_[offset(g, Compartment{c})] = a[Compartment{c}];
  }

  double sum() const { return values_.sum(); }

  /// Sum of a compartment over all age groups.
  double total(Compartment c) const {
    double acc = 0.0;
    for (std::size_t g = 0; g < n_groups(); ++g) acc += (*this)(g, c);
    return acc;
  }

  const Eigen::VectorXd& values() const { return values_; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }

  bool operator==(const StateVector& other) const { return values_ == other.values_; }

 private:
  static Eigen::Index offset(std::size_t group, Compartment c) {
    return static_cast<Eigen::Index>(group * kCompartments + index(c));
  }

  Eigen::VectorXd values_;
};

/// One interval's control u = (beta, theta); beta is indexed (infectee, infector).
struct ControlInput {
  Eigen::MatrixXd beta;
  Eigen::VectorXd theta;

  std::size_t n_groups() const { return static_cast<std::size_t>(theta.size()); }
};

struct ModelParameters {
  std::size_t n_groups = 0;
  Eigen::VectorXd N;
  Eigen::MatrixXd beta0;
  double gamma = 0.0;
  Eigen::VectorXd pi_s;
  Eigen::VectorXd pi_m;
  Eigen::VectorXd pi_a;
  double eta_s = 0.0;
  double eta_m = 0.0;
  double eta_a = 0.0;
  double tau_s = 0.0;
  double tau_o = 0.0;
  double rho = 0.0;
  double sigma = 0.0;
  double n_pop = 0.0;
  double h_icu_max = 0.0;
  double t_max = 0.0;

  /// Throws StructuralError on size mismatches and ValidationError otherwise.
  void validate() const {
    const auto n = static_cast<Eigen::Index>(n_groups);
    if (n_groups == 0) throw StructuralError("parameters: n_groups must be positive");
    if (N.size() != n || pi_s.size() != n || pi_m.size() != n || pi_a.size() != n || beta0.rows() != n ||
        beta0.cols() != n) {
      throw StructuralError("parameters: vector/matrix sizes do not match n_groups = " + std::to_string(n_groups));
    }
    if (std::abs(N.sum() - 1.0) > 1e-9) throw ValidationError("parameters: group shares N must sum to 1");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (N[i] < 0.0 || pi_s[i] < 0.0 || pi_m[i] < 0.0 || pi_a[i] < 0.0) {
        throw ValidationError("parameters: negative share or probability in group " + std::to_string(i + 1));
      }
      if (std::abs(pi_s[i] + pi_m[i] + pi_a[i] - 1.0) > 1e-9) {
        throw ValidationError("parameters: severity probabilities of group " + std::to_string(i + 1) +
                              " do not sum to 1");
      }
    }
    if ((beta0.array() < 0.0).any()) throw ValidationError("parameters: beta0 has negative entries");
    for (double r : {gamma, eta_s, eta_m, eta_a, tau_s, tau_o, rho, sigma, n_pop, h_icu_max, t_max}) {
      if (!(r >= 0.0)) throw ValidationError("parameters: rates and capacities must be nonnegative");
    }
    if (!(n_pop > 0.0)) throw ValidationError("parameters: n_pop must be positive");
  }
};

enum class ViolationKind { Negative, AboveOne, Simplex };

struct Violation {
  ViolationKind kind;
  std::size_t group = 0;            ///< unused for Simplex
  Compartment compartment{};        ///< unused for Simplex
  double magnitude = 0.0;
};

struct StateReport {
  std::vector<Violation> violations;

  bool clean() const { return violations.empty(); }

  std::string describe() const {
    std::ostringstream os;
    for (const auto& v : violations) {
      switch (v.kind) {
        case ViolationKind::Negative:
          os << "negative " << name(v.compartment) << " in group " << v.group + 1 << " by " << v.magnitude << "; ";
          break;
        case ViolationKind::AboveOne:
          os << name(v.compartment) << " above one in group " << v.group + 1 << " by " << v.magnitude << "; ";
          break;
        case ViolationKind::Simplex:
          os << "shares sum off by " << v.magnitude << "; ";
          break;
      }
    }
    return os.str();
  }
};

struct StateTolerances {
  double nonnegativity = tolerance::nonnegativity;
  double simplex = tolerance::simplex;
};

/// Lists every invariant violation of x; a state in Omega yields an empty report.
inline StateReport validate_state(const StateVector& x, StateTolerances tol = {}) {
  StateReport report;
  for (std::size_t g = 0; g < x.n_groups(); ++g) {
    for (std::size_t c = 0; c < kCompartments; ++c) {
      const double v = x(g, Compartment{c});
      if (v < -tol.nonnegativity) report.violations.push_back({ViolationKind::Negative, g, Compartment{c}, -v});
      if (v > 1.0 + tol.nonnegativity) {
        report.violations.push_back({ViolationKind::AboveOne, g, Compartment{c}, v - 1.0});
      }
    }
  }
  const double off = std::abs(x.sum() - 1.0);
  if (off > tol.simplex) report.violations.push_back({ViolationKind::Simplex, 0, Compartment::S, off});
  return report;
}

namespace detail {

inline void check_dimensions(std::size_t state_groups, const ControlInput& u, const ModelParameters& p) {
  const auto n = static_cast<Eigen::Index>(p.n_groups);
  if (state_groups != p.n_groups || u.theta.size() != n || u.beta.rows() != n || u.beta.cols() != n) {
    throw StructuralError("dimension mismatch between state (" + std::to_string(state_groups) + " groups), control (" +
                          std::to_string(u.theta.size()) + ") and parameters (" + std::to_string(p.n_groups) + ")");
  }
}

inline void check_control(const ControlInput& u, const ModelParameters& p, double slack = 1e-12) {
  for (Eigen::Index i = 0; i < u.theta.size(); ++i) {
    if (!(u.theta[i] >= 0.0)) throw ValidationError("control: negative testing rate in group " + std::to_string(i + 1));
    for (Eigen::Index j = 0; j < u.beta.cols(); ++j) {
      const double b = u.beta(i, j);
      if (!(b >= -slack) || b > p.beta0(i, j) * (1.0 + slack) + slack) {
        throw ValidationError("control: beta(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                              ") outside [0, beta0]");
      }
    }
  }
}

/// dx = f(x, u, p) on raw storage; no validation.
inline void rhs(const double* x, const ControlInput& u, const ModelParameters& p, double* dx) {
  const std::size_t ng = p.n_groups;
  constexpr std::size_t S = 0, E = 1, IS = 2, IM = 3, IA = 4, TS = 5, TO = 6, P = 7, H = 8, RU = 9, RK = 10;
  for (std::size_t i = 0; i < ng; ++i) {
    const double* xi = x + i * kCompartments;
    double force = 0.0;
    for (std::size_t j = 0; j < ng; ++j) {
      const double* xj = x + j * kCompartments;
      force += u.beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
               (xj[IS] + xj[IM] + xj[IA] + xj[TS] + xj[TO]);
    }
    const double infections = xi[S] * force;
    const double theta = u.theta[static_cast<Eigen::Index>(i)];
    const double onset = p.gamma * xi[E];
    const auto ii = static_cast<Eigen::Index>(i);
    double* d = dx + i * kCompartments;
    d[S] = -infections;
    d[E] = infections - onset;
    d[IS] = p.pi_s[ii] * onset - (p.eta_s + theta) * xi[IS];
    d[IM] = p.pi_m[ii] * onset - (p.eta_m + theta) * xi[IM];
    d[IA] = p.pi_a[ii] * onset - (p.eta_a + theta) * xi[IA];
    d[TS] = theta * xi[IS] - p.tau_s * xi[TS];
    d[TO] = theta * (xi[IM] + xi[IA]) - p.tau_o * xi[TO];
    d[P] = p.eta_s * xi[IS] + p.tau_s * xi[TS] - p.rho * xi[P];
    d[H] = p.rho * xi[P] - p.sigma * xi[H];
    d[RU] = p.eta_a * xi[IA];
    d[RK] = p.eta_m * xi[IM] + p.tau_o * xi[TO] + p.sigma * xi[H];
  }
}

/**
 * Transposed Jacobian products of the vector field at (x, u):
 * adj_x += (df/dx)^T w, adj_beta += (df/dbeta)^T w, adj_theta += (df/dtheta)^T w.
 * adj_beta is n_g x n_g, adj_theta has n_g entries; either may be null.
 */
inline void rhs_vjp(const double* x, const ControlInput& u, const ModelParameters& p, const double* w, double* adj_x,
                    double* adj_beta, double* adj_theta) {
  const std::size_t ng = p.n_groups;
  constexpr std::size_t S = 0, E = 1, IS = 2, IM = 3, IA = 4, TS = 5, TO = 6, P = 7, H = 8, RU = 9, RK = 10;
  for (std::size_t i = 0; i < ng; ++i) {
    const double* xi = x + i * kCompartments;
    const double* wi = w + i * kCompartments;
    double* ai = adj_x + i * kCompartments;
    const auto ii = static_cast<Eigen::Index>(i);
    const double w_inf = wi[E] - wi[S];
    double force = 0.0;
    for (std::size_t j = 0; j < ng; ++j) {
      const double* xj = x + j * kCompartments;
      const double infectious = xj[IS] + xj[IM] + xj[IA] + xj[TS] + xj[TO];
      const double b = u.beta(ii, static_cast<Eigen::Index>(j));
      force += b * infectious;
      const double to_j = w_inf * b * xi[S];
      double* aj = adj_x + j * kCompartments;
      aj[IS] += to_j;
      aj[IM] += to_j;
      aj[IA] += to_j;
      aj[TS] += to_j;
      aj[TO] += to_j;
      if (adj_beta != nullptr) adj_beta[i * ng + j] += w_inf * xi[S] * infectious;
    }
    const double theta = u.theta[ii];
    ai[S] += w_inf * force;
    ai[E] += p.gamma * (p.pi_s[ii] * wi[IS] + p.pi_m[ii] * wi[IM] + p.pi_a[ii] * wi[IA] - wi[E]);
    ai[IS] += -(p.eta_s + theta) * wi[IS] + theta * wi[TS] + p.eta_s * wi[P];
    ai[IM] += -(p.eta_m + theta) * wi[IM] + theta * wi[TO] + p.eta_m * wi[RK];
    ai[IA] += -(p.eta_a + theta) * wi[IA] + theta * wi[TO] + p.eta_a * wi[RU];
    ai[TS] += p.tau_s * (wi[P] - wi[TS]);
    ai[TO] += p.tau_o * (wi[RK] - wi[TO]);
    ai[P] += p.rho * (wi[H] - wi[P]);
    ai[H] += p.sigma * (wi[RK] - wi[H]);
    if (adj_theta != nullptr) {
      adj_theta[i] += xi[IS] * (wi[TS] - wi[IS]) + (xi[IM] + xi[IA]) * wi[TO] - xi[IM] * wi[IM] - xi[IA] * wi[IA];
    }
  }
}

inline double aggregate_icu(const double* x, const ModelParameters& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.n_groups; ++i) acc += x[i * kCompartments + index(Compartment::HICU)];
  return p.n_pop * acc;
}

inline double total_tests(const double* x, const Eigen::VectorXd& theta, const ModelParameters& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.n_groups; ++i) {
    const double* xi = x + i * kCompartments;
    const double untested = xi[0] + xi[1] + xi[2] + xi[3] + xi[4] + xi[9];
    acc += theta[static_cast<Eigen::Index>(i)] * untested + p.eta_s * xi[2] + p.eta_m * xi[3];
  }
  return p.n_pop * acc;
}

inline void require_in_simplex(const StateVector& x) {
  const auto report = validate_state(x);
  if (!report.clean()) throw ValidationError("state outside the simplex: " + report.describe());
}

}  // namespace detail

/// dx/dt of the SEITPHR system; validates dimensions, x in Omega and the control box.
inline Eigen::VectorXd rhs(const StateVector& x, const ControlInput& u, const ModelParameters& p) {
  detail::check_dimensions(x.n_groups(), u, p);
  detail::require_in_simplex(x);
  detail::check_control(u, p);
  Eigen::VectorXd dx(static_cast<Eigen::Index>(x.size()));
  detail::rhs(x.data(), u, p, dx.data());
  return dx;
}

/// Daily tests T^tot in absolute numbers: random tests plus symptomatic visits.
inline double total_tests(const StateVector& x, const Eigen::VectorXd& theta, const ModelParameters& p) {
  if (static_cast<std::size_t>(theta.size()) != p.n_groups || x.n_groups() != p.n_groups) {
    throw StructuralError("total_tests: dimension mismatch");
  }
  if ((theta.array() < 0.0).any()) throw ValidationError("total_tests: negative testing rate");
  detail::require_in_simplex(x);
  return detail::total_tests(x.data(), theta, p);
}

/// Absolute ICU occupancy n_pop * sum_i H_i.
inline double aggregate_icu(const StateVector& x, const ModelParameters& p) {
  if (x.n_groups() != p.n_groups) throw StructuralError("aggregate_icu: dimension mismatch");
  detail::require_in_simplex(x);
  return detail::aggregate_icu(x.data(), p);
}

/// Contact-weighted mean transmission rate sum_ij N_i N_j beta_ij.
inline double mean_contact_rate(const Eigen::MatrixXd& beta, const Eigen::VectorXd& N) { return N.dot(beta * N); }

/// Control with beta = beta0 and no testing.
inline ControlInput lifted_control(const ModelParameters& p) {
  return ControlInput{p.beta0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.n_groups))};
}

}  // namespace seitphr

#endif  // SEITPHR_MODEL_HPP
