#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "csmo/kernel.hpp"
#include "csmo/problem.hpp"

namespace csmo {

struct ReferenceSolution {
  std::vector<double> alpha;
  double objective = 0.0;
  std::uint64_t iterations = 0;
  bool converged = false;
  double residual = 0.0;  // norm of the projected-gradient step
};

namespace refqp_detail {

// Dense Q straight from kernel evaluations, without the column engine.
inline Eigen::MatrixXd dense_q(const Problem& p) {
  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd Q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const auto si = p.source[static_cast<std::size_t>(i)];
      const auto sj = p.source[static_cast<std::size_t>(j)];
      const double k = p.kernel.is_precomputed() ? p.kernel.gram()(si, sj)
                                                 : eval_kernel(p.kernel, p.patterns[si], p.patterns[sj]);
      Q(i, j) = Q(j, i) = p.y[static_cast<std::size_t>(i)] * p.y[static_cast<std::size_t>(j)] * k;
    }
  }
  return Q;
}

// Euclidean projection onto {0 <= a <= C, y'a = 0}: a = clip(v - lambda y)
// with lambda found by bisection on the monotone constraint residual.
inline Eigen::VectorXd project(const Eigen::VectorXd& v, const Eigen::VectorXd& y, double C) {
  auto at = [&](double lambda) {
    return (v - lambda * y).cwiseMax(0.0).cwiseMin(C).eval();
  };
  auto residual = [&](double lambda) { return y.dot(at(lambda)); };
  double lo = -1.0, hi = 1.0;
  while (residual(lo) < 0.0) lo *= 2.0;
  while (residual(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double r = residual(mid);
    if (r == 0.0) return at(mid);
    (r > 0.0 ? lo : hi) = mid;
  }
  const double rl = residual(lo), rh = residual(hi);
  return std::abs(rl) <= std::abs(rh) ? at(lo) : at(hi);
}

inline double objective(const Eigen::MatrixXd& Q, const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
  return 0.5 * a.dot(Q * a) - s.dot(a);
}

// Solves the equality-constrained QP on the free variables with the bounded
// ones fixed. Returns false when the result leaves the box.
inline bool polish(const Eigen::MatrixXd& Q, const Eigen::VectorXd& s, const Eigen::VectorXd& y, double C,
                   Eigen::VectorXd& a) {
  const auto n = a.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a[i] > 0.0 && a[i] < C) free.push_back(i);
  }
  if (free.empty()) return false;
  const auto m = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + 1, m + 1);
  Eigen::VectorXd rhs(m + 1);
  Eigen::VectorXd fixed = a;
  for (auto i : free) fixed[i] = 0.0;
  const Eigen::VectorXd q_fixed = Q * fixed;
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) K(r, c) = Q(free[r], free[c]);
    K(r, m) = K(m, r) = y[free[r]];
    rhs[r] = s[free[r]] - q_fixed[free[r]];
  }
  rhs[m] = -y.dot(fixed);
  const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
  Eigen::VectorXd candidate = fixed;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (!(sol[r] > 0.0 && sol[r] < C)) return false;
    candidate[free[r]] = sol[r];
  }
  if (std::abs(y.dot(candidate)) > 1e-10 * (1.0 + C)) return false;
  if (objective(Q, s, candidate) > objective(Q, s, a) + 1e-14 * (1.0 + std::abs(objective(Q, s, a)))) return false;
  a = candidate;
  return true;
}

}  // namespace refqp_detail

// Accelerated projected gradient (with adaptive restart) on the dual QP,
// stopping once the projected-gradient step norm drops below `tol`, followed
// by an exact solve on the detected free set.
inline ReferenceSolution solve_reference(const Problem& p, double tol = 1e-10,
                                         std::uint64_t max_iterations = 2'000'000) {
  if (p.size() > 200) throw std::invalid_argument("solve_reference: N must be <= 200");
  const auto n = static_cast<Eigen::Index>(p.size());
  ReferenceSolution out;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  const Eigen::MatrixXd Q = refqp_detail::dense_q(p);
  const Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(p.s.data(), n);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(p.y.data(), n);
  const double C = p.C;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q, Eigen::EigenvaluesOnly);
  const double lipschitz = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / lipschitz;

  auto residual_of = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd g = Q * a - s;
    return (a - refqp_detail::project(a - step * g, y, C)).norm() * lipschitz;
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x_prev = x;
  Eigen::VectorXd z = x;
  double t = 1.0;
  double res = residual_of(x);
  std::uint64_t it = 0;
  for (; it < max_iterations && res >= tol; ++it) {
    const Eigen::VectorXd g = Q * z - s;
    x_prev = x;
    x = refqp_detail::project(z - step * g, y, C);
    res = (z - x).norm() * lipschitz;
    if (res < tol) res = residual_of(x);
    // Restart momentum when it points uphill.
    if ((z - x).dot(x - x_prev) > 0.0) {
      t = 1.0;
      z = x;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = x + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;
  }
  refqp_detail::polish(Q, s, y, C, x);
  out.iterations = it;
  out.residual = residual_of(x);
  out.converged = out.residual < tol;
  out.alpha.assign(x.data(), x.data() + n);
  out.objective = refqp_detail::objective(Q, s, x);
  return out;
}

}  // namespace csmo
