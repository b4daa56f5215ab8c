#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "csmo/dataset.hpp"

namespace csmo {

struct RbfKernel {
  double gamma;
};

struct LinearKernel {};

// Gram matrix over the source rows, row-major.
struct PrecomputedKernel {
  std::shared_ptr<const std::vector<double>> matrix;
  std::size_t n = 0;

  double operator()(std::size_t i, std::size_t j) const { return (*matrix)[i * n + j]; }
};

class KernelSpec {
 public:
  using Variant = std::variant<RbfKernel, LinearKernel, PrecomputedKernel>;

  static KernelSpec rbf(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("rbf gamma must be positive");
    return KernelSpec(RbfKernel{gamma});
  }

  static KernelSpec linear() { return KernelSpec(LinearKernel{}); }

  static KernelSpec precomputed(std::vector<double> matrix, std::size_t n) {
    if (matrix.size() != n * n) throw std::invalid_argument("precomputed kernel must be n x n");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (std::abs(matrix[i * n + j] - matrix[j * n + i]) > 1e-12) {
          throw std::invalid_argument("precomputed kernel is not symmetric");
        }
      }
    }
    return KernelSpec(PrecomputedKernel{std::make_shared<const std::vector<double>>(std::move(matrix)), n});
  }

  const Variant& variant() const noexcept { return v_; }
  bool is_rbf() const noexcept { return std::holds_alternative<RbfKernel>(v_); }
  bool is_linear() const noexcept { return std::holds_alternative<LinearKernel>(v_); }
  bool is_precomputed() const noexcept { return std::holds_alternative<PrecomputedKernel>(v_); }
  double gamma() const { return std::get<RbfKernel>(v_).gamma; }
  const PrecomputedKernel& gram() const { return std::get<PrecomputedKernel>(v_); }

  std::string name() const {
    if (is_rbf()) return "rbf";
    if (is_linear()) return "linear";
    return "precomputed";
  }

 private:
  explicit KernelSpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

enum class TaskKind { classification, regression };

// Dual QP instance: min 1/2 a'Qa - s'a  s.t. 0 <= a <= C, y'a = 0,
// with Q_ij = y_i y_j K(X_i, X_j).
//
// Triplet i uses pattern `source[i]`; regression doubles the sample so
// triplets i and original_n + i share a pattern.
struct Problem {
  std::vector<SparseVector> patterns;  // distinct source patterns
  std::vector<std::size_t> source;     // triplet -> pattern row
  std::vector<double> y;               // +1 / -1
  std::vector<double> s;
  double C = 1.0;
  KernelSpec kernel = KernelSpec::linear();
  TaskKind task = TaskKind::classification;
  std::size_t original_n = 0;

  std::size_t size() const noexcept { return y.size(); }
  const SparseVector& pattern(std::size_t i) const { return patterns[source[i]]; }
};

class InvalidLabelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void check_problem_args(const Dataset& ds, double C, const KernelSpec& kernel) {
  if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
  if (kernel.is_precomputed() && kernel.gram().n != ds.size()) {
    throw std::invalid_argument("precomputed kernel size does not match the dataset");
  }
}

inline std::vector<SparseVector> collect_patterns(const Dataset& ds) {
  std::vector<SparseVector> out;
  out.reserve(ds.size());
  for (const auto& row : ds.rows) out.push_back(row.features);
  return out;
}

}  // namespace detail

// Builds a problem directly from triplets; patterns default to empty vectors
// (enough for precomputed kernels).
inline Problem make_problem(const KernelSpec& kernel, std::vector<double> y, std::vector<double> s, double C,
                            std::vector<SparseVector> patterns = {}) {
  if (y.size() != s.size()) throw std::invalid_argument("y and s differ in length");
  if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
  for (double v : y) {
    if (v != 1.0 && v != -1.0) throw InvalidLabelError("y must be -1 or +1");
  }
  Problem p;
  p.patterns = patterns.empty() ? std::vector<SparseVector>(y.size()) : std::move(patterns);
  if (p.patterns.size() != y.size()) throw std::invalid_argument("pattern count differs from triplet count");
  p.source.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) p.source[i] = i;
  p.y = std::move(y);
  p.s = std::move(s);
  p.C = C;
  p.kernel = kernel;
  p.original_n = p.y.size();
  return p;
}

inline Problem to_classification_problem(const Dataset& ds, double C, const KernelSpec& kernel) {
  detail::check_problem_args(ds, C, kernel);
  Problem p;
  p.patterns = detail::collect_patterns(ds);
  p.C = C;
  p.kernel = kernel;
  p.task = TaskKind::classification;
  p.original_n = ds.size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double label = ds.rows[i].label;
    if (label != 1.0 && label != -1.0) {
      throw InvalidLabelError("label " + std::to_string(label) + " on row " + std::to_string(i + 1) +
                              " is not -1 or +1");
    }
    p.source.push_back(i);
    p.y.push_back(label);
    p.s.push_back(1.0);
  }
  return p;
}

// y_i = +1, s_i = t_i - eps for the first half; y = -1, s = -t_i - eps for the
// mirrored second half.
inline Problem to_regression_problem(const Dataset& ds, double C, double eps, const KernelSpec& kernel) {
  detail::check_problem_args(ds, C, kernel);
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be nonnegative");
  const std::size_t n = ds.size();
  Problem p;
  p.patterns = detail::collect_patterns(ds);
  p.C = C;
  p.kernel = kernel;
  p.task = TaskKind::regression;
  p.original_n = n;
  p.source.resize(2 * n);
  p.y.resize(2 * n);
  p.s.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = ds.rows[i].label;
    p.source[i] = i;
    p.y[i] = 1.0;
    p.s[i] = t - eps;
    p.source[n + i] = i;
    p.y[n + i] = -1.0;
    p.s[n + i] = -t - eps;
  }
  return p;
}

}  // namespace csmo
