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
#ifndef SEITPHR_QP_HPP
#define SEITPHR_QP_HPP

/**
 * @file
 * @brief Dense strictly convex quadratic programs by the dual active-set
 * method of Goldfarb and Idnani.
 *
 *   min 1/2 x^T G x + a^T x   s.t.   C x >= b,   lo <= x <= hi
 *
 * G must be symmetric positive definite. Bounds are kept apart from the
 * general rows so their normals never have to be stored.
 */

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace seitphr::qp {

enum class Status { Optimal, Infeasible, IterationLimit, NotConvex };

struct Result {
  Status status = Status::Optimal;
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  ///< general rows, >= 0
  Eigen::VectorXd bound_multipliers;  ///< signed: > 0 on a lower bound, < 0 on an upper bound
  double objective = 0.0;
  int iterations = 0;
};

namespace detail {

/// Active-set factorization J = L^{-T} Q and R, with the first `q` columns of J spanning the active normals.
class Factor {
 public:
  explicit Factor(const Eigen::MatrixXd& linv_t) : j_(linv_t), r_(Eigen::MatrixXd::Zero(linv_t.rows(), linv_t.rows())) {}

  Eigen::Index active() const { return q_; }
  const Eigen::MatrixXd& J() const { return j_; }

  /// r = R^{-1} d[0:q].
  Eigen::VectorXd dual_direction(const Eigen::VectorXd& d) const {
    if (q_ == 0) return {};
    return r_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
  }

  /// z = J[:, q:] d[q:].
  Eigen::VectorXd primal_direction(const Eigen::VectorXd& d) const {
    const Eigen::Index n = j_.rows();
    return j_.rightCols(n - q_) * d.tail(n - q_);
  }

  /// Appends a normal with d = J^T n; false if it is linearly dependent on the active ones.
  bool add(Eigen::VectorXd d) {
    const Eigen::Index n = j_.rows();
    for (Eigen::Index k = n - 1; k > q_; --k) {
      double c = d[k - 1], s = d[k];
      const double h = std::hypot(c, s);
      if (h == 0.0) continue;
      d[k] = 0.0;
      c /= h;
      s /= h;
      if (c < 0.0) {
        c = -c;
        s = -s;
        d[k - 1] = -h;
      } else {
        d[k - 1] = h;
      }
      const double nu = s / (1.0 + c);
      for (Eigen::Index row = 0; row < n; ++row) {
        const double a = j_(row, k - 1), b = j_(row, k);
        j_(row, k - 1) = a * c + b * s;
        j_(row, k) = nu * (a + j_(row, k - 1)) - b;
      }
    }
    r_.col(q_).head(q_ + 1) = d.head(q_ + 1);
    ++q_;
    const double pivot = std::abs(d[q_ - 1]);
    if (pivot <= std::numeric_limits<double>::epsilon() * r_norm_) return false;
    r_norm_ = std::max(r_norm_, pivot);
    return true;
  }

  /// Removes active column `at` and restores the triangular shape of R.
  void remove(Eigen::Index at) {
    const Eigen::Index n = j_.rows();
    for (Eigen::Index k = at; k < q_ - 1; ++k) r_.col(k) = r_.col(k + 1);
    r_.col(q_ - 1).setZero();
    --q_;
    for (Eigen::Index k = at; k < q_; ++k) {
      double c = r_(k, k), s = r_(k + 1, k);
      const double h = std::hypot(c, s);
      if (h == 0.0) continue;
      c /= h;
      s /= h;
      r_(k + 1, k) = 0.0;
      if (c < 0.0) {
        r_(k, k) = -h;
        c = -c;
        s = -s;
      } else {
        r_(k, k) = h;
      }
      const double nu = s / (1.0 + c);
      for (Eigen::Index col = k + 1; col < q_; ++col) {
        const double a = r_(k, col), b = r_(k + 1, col);
        r_(k, col) = a * c + b * s;
        r_(k + 1, col) = nu * (a + r_(k, col)) - b;
      }
      for (Eigen::Index row = 0; row < n; ++row) {
        const double a = j_(row, k), b = j_(row, k + 1);
        j_(row, k) = a * c + b * s;
        j_(row, k + 1) = nu * (j_(row, k) + a) - b;
      }
    }
  }

 private:
  Eigen::MatrixXd j_;
  Eigen::MatrixXd r_;
  Eigen::Index q_ = 0;
  double r_norm_ = 1.0;
};

}  // namespace detail

/**
 * Solves the QP. Constraint k < C.rows() is a general row; k = m + i is the
 * lower bound of x_i and k = m + n + i its upper bound. Infinite bounds are
 * ignored.
 */
inline Result solve(const Eigen::MatrixXd& G, const Eigen::VectorXd& a, const Eigen::MatrixXd& C, const Eigen::VectorXd& b,
                    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double feas_tol = 1e-10, int max_iter = -1) {
  const Eigen::Index n = G.rows();
  const Eigen::Index m = C.rows();
  Result res;
  res.multipliers = Eigen::VectorXd::Zero(m);
  res.bound_multipliers = Eigen::VectorXd::Zero(n);

  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    res.status = Status::NotConvex;
    return res;
  }
  // J0 = L^{-T}
  const Eigen::MatrixXd linv_t =
      llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  detail::Factor fac(linv_t);
  res.x = -llt.solve(a);
  if (max_iter < 0) max_iter = static_cast<int>(10 * (n + m) + 100);

  std::vector<Eigen::Index> active;  // constraint ids, in factor column order
  std::vector<double> u;             // their multipliers
  std::vector<char> is_active(static_cast<std::size_t>(m + 2 * n), 0);

  auto normal_dot_x = [&](Eigen::Index k, const Eigen::VectorXd& v) {
    if (k < m) return C.row(k).dot(v);
    if (k < m + n) return v[k - m];
    return -v[k - m - n];
  };
  auto rhs = [&](Eigen::Index k) {
    if (k < m) return b[k];
    if (k < m + n) return lo[k - m];
    return -hi[k - m - n];
  };
  auto d_of = [&](Eigen::Index k) -> Eigen::VectorXd {
    const Eigen::MatrixXd& J = fac.J();
    if (k < m) return J.transpose() * C.row(k).transpose();
    if (k < m + n) return J.row(k - m).transpose();
    return -J.row(k - m - n).transpose();
  };

  const double inf = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (;;) {
    // Most violated inactive constraint.
    Eigen::Index p = -1;
    double worst = -feas_tol;
    if (m > 0) {
      const Eigen::VectorXd s = C * res.x - b;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double scale = std::max(1.0, C.row(k).lpNorm<Eigen::Infinity>());
        if (!is_active[static_cast<std::size_t>(k)] && s[k] < worst * scale) {
          worst = s[k] / scale;
          p = k;
        }
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isfinite(lo[i]) && !is_active[static_cast<std::size_t>(m + i)] && res.x[i] - lo[i] < worst) {
        worst = res.x[i] - lo[i];
        p = m + i;
      }
      if (std::isfinite(hi[i]) && !is_active[static_cast<std::size_t>(m + n + i)] && hi[i] - res.x[i] < worst) {
        worst = hi[i] - res.x[i];
        p = m + n + i;
      }
    }
    if (p < 0) break;

    double u_p = 0.0;
    for (;;) {
      if (++iter > max_iter) {
        res.status = Status::IterationLimit;
        res.iterations = iter;
        return res;
      }
      const Eigen::VectorXd d = d_of(p);
      const Eigen::VectorXd z = fac.primal_direction(d);
      const Eigen::VectorXd r = fac.dual_direction(d);
      const double slack = normal_dot_x(p, res.x) - rhs(p);

      // Partial (dual) step length, blocked by an active multiplier reaching zero.
      double t1 = inf;
      Eigen::Index drop = -1;
      for (Eigen::Index k = 0; k < r.size(); ++k) {
        if (r[k] > 0.0 && u[static_cast<std::size_t>(k)] / r[k] < t1) {
          t1 = u[static_cast<std::size_t>(k)] / r[k];
          drop = k;
        }
      }
      const double zn = normal_dot_x(p, z);
      const double t2 = (z.lpNorm<Eigen::Infinity>() > 1e-14 && zn > 0.0) ? -slack / zn : inf;
      const double t = std::min(t1, t2);
      if (t == inf) {
        res.status = Status::Infeasible;
        res.iterations = iter;
        return res;
      }
      for (Eigen::Index k = 0; k < r.size(); ++k) u[static_cast<std::size_t>(k)] -= t * r[k];
      u_p += t;
      if (t2 < inf) res.x += t * z;

      if (t == t2) {
        if (!fac.add(d)) {
          // Dependent normal: the multiplier step was exact, so the constraint is implied.
          res.status = Status::Infeasible;
          res.iterations = iter;
          return res;
        }
        active.push_back(p);
        u.push_back(u_p);
        is_active[static_cast<std::size_t>(p)] = 1;
        break;
      }
      is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = 0;
      active.erase(active.begin() + drop);
      u.erase(u.begin() + drop);
      fac.remove(drop);
    }
  }

  res.iterations = iter;
  res.objective = 0.5 * res.x.dot(G * res.x) + a.dot(res.x);
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Eigen::Index id = active[k];
    if (id < m) {
      res.multipliers[id] = u[k];
    } else if (id < m + n) {
      res.bound_multipliers[id - m] = u[k];
    } else {
      res.bound_multipliers[id - m - n] = -u[k];
    }
  }
  return res;
}

}  // namespace seitphr::qp

#endif  // SEITPHR_QP_HPP
