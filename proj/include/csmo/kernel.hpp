#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "csmo/dataset.hpp"
#include "csmo/problem.hpp"

namespace csmo {

// K(a, b) for pattern-based kernels. Precomputed kernels are index-based and
// go through KernelEngine instead.
inline double eval_kernel(const KernelSpec& spec, const SparseVector& a, const SparseVector& b) {
  if (spec.is_rbf()) return std::exp(-spec.gamma() * squared_distance(a, b));
  if (spec.is_linear()) return dot(a, b);
  throw std::invalid_argument("eval_kernel: precomputed kernels are evaluated by index");
}

struct QColumn {
  std::size_t index = 0;
  std::vector<double> values;
};

// Produces dense Q columns for one problem. Kernel values are evaluated once
// per distinct source pattern, then expanded to every triplet sharing it.
class KernelEngine {
 public:
  explicit KernelEngine(const Problem& problem) : p_(problem) {
    if (p_.kernel.is_rbf()) {
      norms_.resize(p_.patterns.size());
      for (std::size_t r = 0; r < p_.patterns.size(); ++r) norms_[r] = dot(p_.patterns[r], p_.patterns[r]);
    }
    if (p_.kernel.is_precomputed() && p_.kernel.gram().n < p_.patterns.size()) {
      throw std::invalid_argument("precomputed kernel smaller than the pattern set");
    }
  }

  const Problem& problem() const noexcept { return p_; }
  std::size_t size() const noexcept { return p_.size(); }

  // Kernel value between source rows.
  double kernel(std::size_t ra, std::size_t rb) const {
    const auto& spec = p_.kernel;
    if (spec.is_rbf()) {
      double d2 = norms_[ra] + norms_[rb] - 2.0 * dot(p_.patterns[ra], p_.patterns[rb]);
      return std::exp(-spec.gamma() * (d2 > 0.0 ? d2 : 0.0));
    }
    if (spec.is_linear()) return dot(p_.patterns[ra], p_.patterns[rb]);
    return spec.gram()(ra, rb);
  }

  // Q_ij = y_i y_j K(X_i, X_j)
  double q(std::size_t i, std::size_t j) const { return p_.y[i] * p_.y[j] * kernel(p_.source[i], p_.source[j]); }

  QColumn column(std::size_t j) const {
    if (j >= size()) throw std::out_of_range("q_column: index " + std::to_string(j) + " out of range");
    const std::size_t rows = p_.patterns.size();
    const std::size_t rj = p_.source[j];
    scratch_.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) scratch_[r] = kernel(r, rj);
    kernel_evaluations_ += rows;
    QColumn col{j, std::vector<double>(size())};
    const double yj = p_.y[j];
    for (std::size_t i = 0; i < size(); ++i) col.values[i] = p_.y[i] * yj * scratch_[p_.source[i]];
    return col;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(size());
    for (std::size_t i = 0; i < size(); ++i) d[i] = kernel(p_.source[i], p_.source[i]);
    return d;
  }

  std::uint64_t kernel_evaluations() const noexcept { return kernel_evaluations_; }

 private:
  const Problem& p_;
  std::vector<double> norms_;
  mutable std::vector<double> scratch_;
  mutable std::uint64_t kernel_evaluations_ = 0;
};

inline QColumn q_column(const Problem& p, std::size_t j) { return KernelEngine(p).column(j); }

}  // namespace csmo
