#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "csmo/bias.hpp"
#include "csmo/cache.hpp"
#include "csmo/kernel.hpp"
#include "csmo/problem.hpp"

namespace csmo {

enum class Algorithm { smo, csmo };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::smo ? "smo" : "csmo"; }

inline Algorithm parse_algorithm(std::string_view name) {
  if (name == "smo") return Algorithm::smo;
  if (name == "csmo") return Algorithm::csmo;
  throw std::invalid_argument("unknown solver '" + std::string(name) + "'");
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::smo;
  double eps_kkt = 1e-3;
  double tau = 1e-12;  // curvature floor for d'Qd and delta
  std::uint64_t max_iterations = 100'000'000;
  std::size_t cache_bytes = 100u << 20;
  // Maintained gradient is rebuilt from scratch every `refresh_period`
  // iterations; 0 means 10 * N.
  std::uint64_t refresh_period = 0;
  bool record_trace = false;

  void validate() const {
    if (!(eps_kkt > 0.0)) throw std::invalid_argument("eps_kkt must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  }
};

struct InstrumentationCounters {
  std::uint64_t iterations = 0;
  std::uint64_t clipped_iterations = 0;
  std::uint64_t resets = 0;
  std::uint64_t products = 0;  // modeled floating-point products per the iteration cost model
  std::uint64_t kernel_columns_computed = 0;
  std::uint64_t gradient_refreshes = 0;
  double wall_seconds = 0.0;
};

struct SolverState {
  std::vector<double> alpha;
  std::vector<double> grad;  // Q alpha - s
  std::vector<double> p;     // conjugate direction of the previous step
  std::vector<double> q;     // Q p
  double delta = 1.0;        // p'Qp, 1 after a reset
  std::vector<std::size_t> p_support;
  InstrumentationCounters counters;
};

struct WorkingSet {
  std::size_t L = 0;
  std::size_t U = 0;
  double delta_kkt = 0.0;  // first-order maximal violation before the step
};

struct StepOutcome {
  std::size_t L = 0;
  std::size_t U = 0;
  double rho = 0.0;
  bool clipped = false;
  double gain = 0.0;       // decrease of the dual objective
  double delta_kkt = 0.0;
  double gamma = 0.0;      // conjugate coefficient (0 for SMO steps)
  double curvature = 0.0;  // d'Qd (SMO) or delta_k (CSMO), after flooring
  std::size_t n_p = 0;
  std::size_t n_q = 0;
  std::uint64_t products = 0;
};

struct TraceEntry {
  std::size_t L = 0;
  std::size_t U = 0;
  double rho = 0.0;
  double delta_kkt = 0.0;
  double objective = 0.0;  // after the step
  bool clipped = false;
  double gamma = 0.0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct Solution {
  std::vector<double> alpha;
  std::vector<double> grad;
  double objective = 0.0;
  double b = 0.0;
  bool converged = false;
  InstrumentationCounters counters;
  CacheStats cache;
  std::vector<TraceEntry> trace;
};

struct EligibleSets {
  std::vector<std::size_t> low;  // I_L
  std::vector<std::size_t> up;   // I_U
};

inline bool in_low_set(double alpha, double y, double C) noexcept { return y > 0 ? alpha < C : alpha > 0; }
inline bool in_up_set(double alpha, double y, double C) noexcept { return y > 0 ? alpha > 0 : alpha < C; }

inline EligibleSets eligible_sets(std::span<const double> alpha, const Problem& p) {
  EligibleSets sets;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (in_low_set(alpha[i], p.y[i], p.C)) sets.low.push_back(i);
    if (in_up_set(alpha[i], p.y[i], p.C)) sets.up.push_back(i);
  }
  return sets;
}

// Theta(alpha) = 1/2 a'Qa - s'a, evaluated as 1/2 (a'g - s'a) using g = Qa - s.
inline double dual_objective(std::span<const double> alpha, std::span<const double> grad, std::span<const double> s) {
  double ag = 0.0, sa = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    ag += alpha[i] * grad[i];
    sa += s[i] * alpha[i];
  }
  return 0.5 * (ag - sa);
}

// Second-order SMO and conjugate SMO over one problem. Owns its kernel cache.
class Solver {
 public:
  Solver(const Problem& problem, SolverConfig config)
      : p_(problem), cfg_(config), engine_(problem), cache_(engine_, config.cache_bytes), diag_(engine_.diagonal()) {
    cfg_.validate();
    const std::size_t n = p_.size();
    state_.alpha.assign(n, 0.0);
    state_.grad.resize(n);
    for (std::size_t i = 0; i < n; ++i) state_.grad[i] = -p_.s[i];
    state_.p.assign(n, 0.0);
    state_.q.assign(n, 0.0);
    in_support_.assign(n, false);
    refresh_period_ = cfg_.refresh_period ? cfg_.refresh_period : 10 * static_cast<std::uint64_t>(n);
  }

  Solver(const Solver&) = delete;
  Solver& operator=(const Solver&) = delete;

  const Problem& problem() const noexcept { return p_; }
  const SolverConfig& config() const noexcept { return cfg_; }
  const SolverState& state() const noexcept { return state_; }
  const KernelCache& cache() const noexcept { return cache_; }
  const KernelEngine& engine() const noexcept { return engine_; }

  // L minimizes y_l g_l over I_L; U maximizes the second-order gain over the
  // strict violators in I_U. Empty when the first-order violation is below
  // eps_kkt or an eligible set is empty.
  std::optional<WorkingSet> select_working_set() {
    const std::size_t n = p_.size();
    const double C = p_.C;
    const auto& alpha = state_.alpha;
    const auto& g = state_.grad;

    std::size_t L = n;
    double min_low = std::numeric_limits<double>::infinity();
    double max_up = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double yg = p_.y[i] * g[i];
      if (in_low_set(alpha[i], p_.y[i], C) && yg < min_low) {
        min_low = yg;
        L = i;
      }
      if (in_up_set(alpha[i], p_.y[i], C) && yg > max_up) max_up = yg;
    }
    if (L == n || max_up == -std::numeric_limits<double>::infinity()) return std::nullopt;
    const double violation = max_up - min_low;
    if (violation < cfg_.eps_kkt) return std::nullopt;

    col_L_ = cache_.get(L);
    const auto& QL = col_L_->values;
    const double yL = p_.y[L];
    std::size_t U = n;
    double best = -1.0;
    for (std::size_t u = 0; u < n; ++u) {
      if (!in_up_set(alpha[u], p_.y[u], C)) continue;
      const double diff = p_.y[u] * g[u] - min_low;
      if (!(diff > 0.0)) continue;
      double curvature = diag_[L] + diag_[u] - 2.0 * yL * p_.y[u] * QL[u];
      if (curvature < cfg_.tau) curvature = cfg_.tau;
      const double score = diff * diff / curvature;
      if (score > best) {
        best = score;
        U = u;
      }
    }
    return WorkingSet{L, U, violation};
  }

  StepOutcome smo_step(const WorkingSet& ws) {
    const std::size_t n = p_.size();
    const std::size_t L = ws.L, U = ws.U;
    const double C = p_.C;
    const double yL = p_.y[L], yU = p_.y[U];
    const auto& QL = column_L(L);
    const auto col_U = cache_.get(U);
    const auto& QU = col_U->values;
    auto& alpha = state_.alpha;
    auto& g = state_.grad;

    double curvature = diag_[L] + diag_[U] - 2.0 * yL * yU * QL[U];
    if (curvature < cfg_.tau) curvature = cfg_.tau;
    const double violation = yU * g[U] - yL * g[L];
    const double rho_free = violation / curvature;
    const double bound_L = yL > 0 ? C - alpha[L] : alpha[L];
    const double bound_U = yU > 0 ? alpha[U] : C - alpha[U];
    double rho = std::max(rho_free, 0.0);
    bool clipped = false;
    if (bound_L < rho || bound_U < rho) {
      rho = std::min(bound_L, bound_U);
      clipped = true;
    }

    alpha[L] += yL * rho;
    alpha[U] -= yU * rho;
    if (clipped && rho == bound_L) alpha[L] = yL > 0 ? C : 0.0;
    if (clipped && rho == bound_U) alpha[U] = yU > 0 ? 0.0 : C;
    for (std::size_t i = 0; i < n; ++i) g[i] += rho * (yL * QL[i] - yU * QU[i]);

    StepOutcome out;
    out.L = L;
    out.U = U;
    out.rho = rho;
    out.clipped = clipped;
    out.gain = rho * violation - 0.5 * rho * rho * curvature;
    out.delta_kkt = ws.delta_kkt;
    out.curvature = curvature;
    out.n_p = 2;
    out.products = 3 * static_cast<std::uint64_t>(n);
    finish_step(out);
    return out;
  }

  StepOutcome csmo_step(const WorkingSet& ws) {
    const std::size_t n = p_.size();
    const std::size_t L = ws.L, U = ws.U;
    const double C = p_.C;
    const double yL = p_.y[L], yU = p_.y[U];
    const auto& QL = column_L(L);
    const auto col_U = cache_.get(U);
    const auto& QU = col_U->values;
    auto& alpha = state_.alpha;
    auto& g = state_.grad;
    auto& pv = state_.p;
    auto& qv = state_.q;

    // p^k = d + gamma p^{k-1}, q^k = Q p^k, delta_k = p^k' Q p^k
    const double gamma = (yU * qv[U] - yL * qv[L]) / state_.delta;
    for (auto i : state_.p_support) pv[i] *= gamma;
    add_to_support(L);
    add_to_support(U);
    pv[L] += yL;
    pv[U] -= yU;
    std::size_t n_q = 0;
    for (std::size_t i = 0; i < n; ++i) {
      qv[i] = yL * QL[i] - yU * QU[i] + gamma * qv[i];
      n_q += qv[i] != 0.0;
    }
    double curvature = yL * qv[L] - yU * qv[U];
    if (curvature < cfg_.tau) curvature = cfg_.tau;

    const double violation = yU * g[U] - yL * g[L];
    double rho = std::max(violation / curvature, 0.0);

    // Largest step keeping 0 <= alpha + rho p <= C.
    double rho_max = std::numeric_limits<double>::infinity();
    std::size_t n_p = 0;
    for (auto i : state_.p_support) {
      const double pi = pv[i];
      if (pi == 0.0) continue;
      ++n_p;
      const double limit = pi > 0 ? (C - alpha[i]) / pi : -alpha[i] / pi;
      rho_max = std::min(rho_max, limit);
    }
    bool clipped = false;
    if (rho_max < rho) {
      rho = std::max(rho_max, 0.0);
      clipped = true;
    }

    for (auto i : state_.p_support) {
      const double pi = pv[i];
      if (pi == 0.0) continue;
      double a = alpha[i] + rho * pi;
      if (clipped) {
        const double limit = pi > 0 ? (C - alpha[i]) / pi : -alpha[i] / pi;
        if (limit <= rho) a = pi > 0 ? C : 0.0;
      }
      alpha[i] = std::clamp(a, 0.0, C);
    }
    for (std::size_t i = 0; i < n; ++i) g[i] += rho * qv[i];

    StepOutcome out;
    out.L = L;
    out.U = U;
    out.rho = rho;
    out.clipped = clipped;
    out.gain = rho * violation - 0.5 * rho * rho * curvature;
    out.delta_kkt = ws.delta_kkt;
    out.gamma = gamma;
    out.curvature = curvature;
    out.n_p = n_p;
    out.n_q = n_q;
    out.products = 3 * static_cast<std::uint64_t>(n) + n_q + 3 * static_cast<std::uint64_t>(n_p);

    if (clipped) {
      reset_direction();
      ++state_.counters.resets;
    } else {
      state_.delta = curvature;
    }
    finish_step(out);
    return out;
  }

  StepOutcome step(const WorkingSet& ws) { return cfg_.algorithm == Algorithm::smo ? smo_step(ws) : csmo_step(ws); }

  // Rebuilds g = Q alpha - s, and q = Q p with delta = p'q, from kernel columns.
  void refresh() {
    const std::size_t n = p_.size();
    auto& g = state_.grad;
    for (std::size_t i = 0; i < n; ++i) g[i] = -p_.s[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double a = state_.alpha[j];
      if (a == 0.0) continue;
      const auto col = cache_.get(j);
      for (std::size_t i = 0; i < n; ++i) g[i] += a * col->values[i];
    }
    if (!state_.p_support.empty()) {
      auto& qv = state_.q;
      std::fill(qv.begin(), qv.end(), 0.0);
      for (auto j : state_.p_support) {
        const double pj = state_.p[j];
        if (pj == 0.0) continue;
        const auto col = cache_.get(j);
        for (std::size_t i = 0; i < n; ++i) qv[i] += pj * col->values[i];
      }
      double delta = 0.0;
      for (auto j : state_.p_support) delta += state_.p[j] * qv[j];
      state_.delta = std::max(delta, cfg_.tau);
    }
    ++state_.counters.gradient_refreshes;
  }

  double objective() const { return dual_objective(state_.alpha, state_.grad, p_.s); }

  Solution run() {
    const auto start = std::chrono::steady_clock::now();
    Solution sol;
    auto& counters = state_.counters;
    for (;;) {
      const auto ws = select_working_set();
      if (!ws) {
        sol.converged = true;
        break;
      }
      if (counters.iterations >= cfg_.max_iterations) break;
      const auto out = step(*ws);
      if (cfg_.record_trace) {
        sol.trace.push_back({out.L, out.U, out.rho, out.delta_kkt, objective(), out.clipped, out.gamma});
      }
      if (counters.iterations % refresh_period_ == 0) refresh();
    }
    col_L_.reset();
    counters.kernel_columns_computed = cache_.stats().columns_computed;
    counters.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    sol.alpha = state_.alpha;
    sol.grad = state_.grad;
    sol.objective = objective();
    sol.b = compute_bias(p_, sol.alpha, sol.grad).value;
    sol.counters = counters;
    sol.cache = cache_.stats();
    return sol;
  }

 private:
  const std::vector<double>& column_L(std::size_t L) {
    if (!col_L_ || col_L_->index != L) col_L_ = cache_.get(L);
    return col_L_->values;
  }

  void add_to_support(std::size_t i) {
    if (!in_support_[i]) {
      in_support_[i] = true;
      state_.p_support.push_back(i);
    }
  }

  void reset_direction() {
    for (auto i : state_.p_support) {
      state_.p[i] = 0.0;
      in_support_[i] = false;
    }
    state_.p_support.clear();
    std::fill(state_.q.begin(), state_.q.end(), 0.0);
    state_.delta = 1.0;
  }

  void finish_step(const StepOutcome& out) {
    auto& c = state_.counters;
    ++c.iterations;
    c.clipped_iterations += out.clipped;
    c.products += out.products;
    c.kernel_columns_computed = cache_.stats().columns_computed;
  }

  const Problem& p_;
  SolverConfig cfg_;
  KernelEngine engine_;
  KernelCache cache_;
  std::vector<double> diag_;
  SolverState state_;
  std::vector<bool> in_support_;
  std::uint64_t refresh_period_ = 1;
  KernelCache::ColumnPtr col_L_;
};

inline Solution solve(const Problem& problem, const SolverConfig& config) { return Solver(problem, config).run(); }

}  // namespace csmo
