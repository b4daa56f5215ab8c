#pragma once

// Test-only helpers: seeded problem generators and brute-force oracles that do
// not go through the solver or the column engine.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "csmo/dataset.hpp"
#include "csmo/kernel.hpp"
#include "csmo/problem.hpp"

namespace csmo::testing {

// N = 2, K = I, y = (+1, -1), s = (1, 1).
inline Problem toy_t2(double C = 10.0) {
  return make_problem(KernelSpec::precomputed({1.0, 0.0, 0.0, 1.0}, 2), {1.0, -1.0}, {1.0, 1.0}, C);
}

inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, int dim, bool regression) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.3);
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<SparseEntry> e;
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      x[static_cast<std::size_t>(k)] = u(rng);
      e.push_back({k + 1, x[static_cast<std::size_t>(k)]});
    }
    const double score = std::sin(2.0 * x[0]) + (dim > 1 ? x[1] * x[1] - 0.3 : 0.0) + noise(rng);
    ds.push_back({regression ? score : (score >= 0.0 ? 1.0 : -1.0), SparseVector::from_unchecked(std::move(e))});
  }
  // Both classes present.
  if (!regression && n >= 2) {
    ds.rows[0].label = 1.0;
    ds.rows[1].label = -1.0;
  }
  return ds;
}

struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> a;
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

// Q from direct kernel evaluation (no norm trick, no column engine).
inline DenseMatrix brute_q(const Problem& p) {
  DenseMatrix Q{p.size(), std::vector<double>(p.size() * p.size())};
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double k = p.kernel.is_precomputed() ? p.kernel.gram()(p.source[i], p.source[j])
                                                 : eval_kernel(p.kernel, p.pattern(i), p.pattern(j));
      Q.a[i * p.size() + j] = p.y[i] * p.y[j] * k;
    }
  }
  return Q;
}

inline std::vector<double> mat_vec(const DenseMatrix& Q, const std::vector<double>& v) {
  std::vector<double> out(Q.n, 0.0);
  for (std::size_t i = 0; i < Q.n; ++i) {
    for (std::size_t j = 0; j < Q.n; ++j) out[i] += Q(i, j) * v[j];
  }
  return out;
}

inline double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dotv(a, a)); }

inline double brute_objective(const DenseMatrix& Q, const Problem& p, const std::vector<double>& alpha) {
  return 0.5 * dotv(alpha, mat_vec(Q, alpha)) - dotv(p.s, alpha);
}

inline std::vector<double> brute_gradient(const DenseMatrix& Q, const Problem& p, const std::vector<double>& alpha) {
  auto g = mat_vec(Q, alpha);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= p.s[i];
  return g;
}

// First-order maximal violation max_{I_U} y g - min_{I_L} y g, or -inf when a
// set is empty.
inline double brute_violation(const Problem& p, const std::vector<double>& alpha, const std::vector<double>& g) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double yg = p.y[i] * g[i];
    const bool in_low = p.y[i] > 0 ? alpha[i] < p.C : alpha[i] > 0;
    const bool in_up = p.y[i] > 0 ? alpha[i] > 0 : alpha[i] < p.C;
    if (in_low) lo = std::min(lo, yg);
    if (in_up) hi = std::max(hi, yg);
  }
  if (lo == INFINITY || hi == -INFINITY) return -INFINITY;
  return hi - lo;
}

struct RandomProblemSpec {
  std::size_t n = 20;
  int dim = 2;
  double gamma = 0.5;
  double C = 1.0;
  bool regression = false;
  double eps = 0.1;
};

inline Problem random_problem(std::uint64_t seed, const RandomProblemSpec& spec) {
  std::mt19937_64 rng(seed);
  const Dataset ds = random_dataset(rng, spec.n, spec.dim, spec.regression);
  const auto kernel = KernelSpec::rbf(spec.gamma);
  return spec.regression ? to_regression_problem(ds, spec.C, spec.eps, kernel)
                         : to_classification_problem(ds, spec.C, kernel);
}

}  // namespace csmo::testing
