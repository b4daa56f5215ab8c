#pragma once

#include <cstddef>
#include <limits>
#include <span>

#include "csmo/problem.hpp"

namespace csmo {

struct BiasEstimate {
  double value = 0.0;
  bool degenerate = false;  // no free multiplier and an empty eligible set
};

// At the optimum b = -y_q g_q on every free multiplier; averaged over those.
// Without free multipliers, the midpoint of the eligible-set extremes.
inline BiasEstimate compute_bias(const Problem& p, std::span<const double> alpha, std::span<const double> grad) {
  const double C = p.C;
  const double margin = 1e-8 * C;
  double sum = 0.0;
  std::size_t n_free = 0;
  double min_low = std::numeric_limits<double>::infinity();
  double max_up = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double yg = p.y[i] * grad[i];
    if (alpha[i] > margin && alpha[i] < C - margin) {
      sum -= yg;
      ++n_free;
    }
    const bool low = p.y[i] > 0 ? alpha[i] < C : alpha[i] > 0;
    const bool up = p.y[i] > 0 ? alpha[i] > 0 : alpha[i] < C;
    if (low && yg < min_low) min_low = yg;
    if (up && yg > max_up) max_up = yg;
  }
  if (n_free > 0) return {sum / static_cast<double>(n_free), false};
  if (min_low == std::numeric_limits<double>::infinity() || max_up == -std::numeric_limits<double>::infinity()) {
    return {0.0, true};
  }
  return {-(min_low + max_up) / 2.0, false};
}

}  // namespace csmo
