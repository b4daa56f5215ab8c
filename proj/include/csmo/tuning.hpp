#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "csmo/dataset.hpp"
#include "csmo/model.hpp"
#include "csmo/problem.hpp"
#include "csmo/solver.hpp"

namespace csmo {

struct HyperParams {
  double C = 1.0;
  double gamma = 1.0;
  std::optional<double> eps;  // regression only
};

struct Grid {
  std::vector<double> C_values;
  std::vector<double> gamma_values;
  std::vector<double> eps_values;  // empty for classification

  std::size_t size() const noexcept {
    return C_values.size() * gamma_values.size() * std::max<std::size_t>(eps_values.size(), 1);
  }

  // Points in C-major, then gamma, then eps order.
  std::vector<HyperParams> points() const {
    std::vector<HyperParams> out;
    out.reserve(size());
    for (double c : C_values) {
      for (double g : gamma_values) {
        if (eps_values.empty()) {
          out.push_back({c, g, std::nullopt});
        } else {
          for (double e : eps_values) out.push_back({c, g, e});
        }
      }
    }
    return out;
  }
};

inline std::vector<double> pow2_range(int first, int last, int step) {
  std::vector<double> out;
  for (int e = first; e <= last; e += step) out.push_back(std::ldexp(1.0, e));
  return out;
}

inline Grid default_grid(TaskKind task) {
  if (task == TaskKind::classification) return {pow2_range(-5, 15, 2), pow2_range(-15, 3, 2), {}};
  return {pow2_range(-1, 11, 2), pow2_range(-11, 3, 2), pow2_range(-8, -1, 1)};
}

// Relative time difference in percent: 100 (t_smo - t_csmo) / t_smo.
inline double rtd(double time_smo, double time_csmo) {
  if (!(time_smo > 0.0)) throw std::invalid_argument("rtd: SMO time must be positive");
  return 100.0 * (time_smo - time_csmo) / time_smo;
}

// Shuffles 0..n-1 with a seeded generator and deals positions round-robin,
// so fold sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (k > n) throw std::invalid_argument("kfold_split: more folds than samples");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

// Wall time of a run: minimum over `repeats` of the mean of `runs` runs.
struct TimingProtocol {
  int repeats = 3;
  int runs = 3;
};

inline Problem make_task_problem(const Dataset& ds, TaskKind task, const HyperParams& h) {
  const auto kernel = KernelSpec::rbf(h.gamma);
  if (task == TaskKind::classification) return to_classification_problem(ds, h.C, kernel);
  return to_regression_problem(ds, h.C, h.eps.value_or(0.1), kernel);
}

struct TrainResult {
  Model model;
  Solution solution;
  double seconds = 0.0;
};

inline TrainResult train_timed(const Problem& problem, const SolverConfig& cfg, const TimingProtocol& timing) {
  TrainResult out;
  double best = std::numeric_limits<double>::infinity();
  const int repeats = std::max(timing.repeats, 1);
  const int runs = std::max(timing.runs, 1);
  for (int r = 0; r < repeats; ++r) {
    double total = 0.0;
    for (int k = 0; k < runs; ++k) {
      const auto start = std::chrono::steady_clock::now();
      auto sol = solve(problem, cfg);
      total += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (r == 0 && k == 0) out.solution = std::move(sol);
    }
    best = std::min(best, total / runs);
  }
  out.seconds = best;
  out.model = extract_model(problem, out.solution);
  return out;
}

struct FoldRecord {
  std::size_t fold = 0;
  double metric = 0.0;  // accuracy % or MSE on the held-out fold
  double seconds = 0.0;
  std::uint64_t iterations = 0;
  std::uint64_t clipped = 0;
  std::uint64_t resets = 0;
  std::uint64_t columns_computed = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  bool converged = true;
  double squared_error_sum = 0.0;
  std::size_t correct = 0;
  std::size_t tested = 0;
};

struct CvResult {
  double metric = 0.0;  // pooled over all held-out samples
  std::vector<FoldRecord> folds;

  std::uint64_t total_iterations() const {
    std::uint64_t t = 0;
    for (const auto& f : folds) t += f.iterations;
    return t;
  }
  double total_seconds() const {
    double t = 0.0;
    for (const auto& f : folds) t += f.seconds;
    return t;
  }
};

inline FoldRecord run_fold(const Dataset& ds, TaskKind task, const HyperParams& h, const SolverConfig& cfg,
                           const std::vector<std::vector<std::size_t>>& folds, std::size_t f,
                           const TimingProtocol& timing) {
  std::vector<std::size_t> train_idx;
  for (std::size_t g = 0; g < folds.size(); ++g) {
    if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  const Dataset train = ds.subset(train_idx);
  const Problem problem = make_task_problem(train, task, h);
  const auto result = train_timed(problem, cfg, timing);
  const auto& c = result.solution.counters;

  FoldRecord rec;
  rec.fold = f;
  rec.seconds = result.seconds;
  rec.iterations = c.iterations;
  rec.clipped = c.clipped_iterations;
  rec.resets = c.resets;
  rec.columns_computed = result.solution.cache.columns_computed;
  rec.cache_hits = result.solution.cache.hits;
  rec.cache_misses = result.solution.cache.misses;
  rec.converged = result.solution.converged;
  for (auto i : folds[f]) {
    const auto& row = ds.rows[i];
    const double value = predict(result.model, row.features);
    if (task == TaskKind::classification) {
      rec.correct += sign_label(value) == row.label;
    } else {
      rec.squared_error_sum += (value - row.label) * (value - row.label);
    }
    ++rec.tested;
  }
  rec.metric = task == TaskKind::classification ? 100.0 * static_cast<double>(rec.correct) / rec.tested
                                                : rec.squared_error_sum / rec.tested;
  return rec;
}

inline double pooled_metric(TaskKind task, const std::vector<FoldRecord>& folds) {
  std::size_t tested = 0, correct = 0;
  double sse = 0.0;
  for (const auto& f : folds) {
    tested += f.tested;
    correct += f.correct;
    sse += f.squared_error_sum;
  }
  if (tested == 0) return 0.0;
  return task == TaskKind::classification ? 100.0 * static_cast<double>(correct) / tested : sse / tested;
}

struct CvOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 1;
  TimingProtocol timing{1, 1};
};

// Classification metric: accuracy in percent; regression: mean squared error.
inline CvResult cross_validate(const Dataset& ds, TaskKind task, const HyperParams& h, const SolverConfig& cfg,
                               const CvOptions& opts = {}) {
  const auto folds = kfold_split(ds.size(), opts.folds, opts.seed);
  CvResult out;
  for (std::size_t f = 0; f < folds.size(); ++f) out.folds.push_back(run_fold(ds, task, h, cfg, folds, f, opts.timing));
  out.metric = pooled_metric(task, out.folds);
  return out;
}

struct GridRecord {
  HyperParams params;
  Algorithm algorithm = Algorithm::smo;
  FoldRecord fold;
};

struct PointSummary {
  HyperParams params;
  double metric_smo = 0.0;
  double metric_csmo = 0.0;
  double seconds_smo = 0.0;
  double seconds_csmo = 0.0;
  std::uint64_t iterations_smo = 0;
  std::uint64_t iterations_csmo = 0;
  double rtd = 0.0;
};

struct GridReport {
  TaskKind task = TaskKind::classification;
  std::size_t folds = 0;
  std::vector<GridRecord> records;
  std::vector<PointSummary> points;
  std::size_t best_smo = 0;  // index into points
  std::size_t best_csmo = 0;
};

struct GridOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 1;
  TimingProtocol timing{3, 3};
  unsigned threads = 0;  // 0: hardware concurrency
};

// Runs `count` independent tasks on a bounded worker pool.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

inline bool better_metric(TaskKind task, double a, double b) { return task == TaskKind::classification ? a > b : a < b; }

// Both solvers on every (point, fold), each task with a private cache.
inline GridReport grid_search(const Dataset& ds, TaskKind task, const Grid& grid, const SolverConfig& base,
                              const GridOptions& opts = {}) {
  if (grid.C_values.empty() || grid.gamma_values.empty()) throw std::invalid_argument("grid_search: empty grid");
  if ((task == TaskKind::regression) == grid.eps_values.empty()) {
    throw std::invalid_argument("grid_search: eps values are required for regression only");
  }
  const auto points = grid.points();
  const auto folds = kfold_split(ds.size(), opts.folds, opts.seed);
  const std::size_t k = folds.size();
  const Algorithm algorithms[] = {Algorithm::smo, Algorithm::csmo};

  GridReport report;
  report.task = task;
  report.folds = k;
  report.records.resize(points.size() * 2 * k);
  parallel_for(report.records.size(), opts.threads, [&](std::size_t t) {
    const std::size_t point = t / (2 * k);
    const Algorithm algo = algorithms[(t / k) % 2];
    const std::size_t f = t % k;
    SolverConfig cfg = base;
    cfg.algorithm = algo;
    report.records[t] = {points[point], algo, run_fold(ds, task, points[point], cfg, folds, f, opts.timing)};
  });

  for (std::size_t i = 0; i < points.size(); ++i) {
    PointSummary s;
    s.params = points[i];
    std::vector<FoldRecord> smo(k), csmo(k);
    for (std::size_t f = 0; f < k; ++f) {
      smo[f] = report.records[i * 2 * k + f].fold;
      csmo[f] = report.records[i * 2 * k + k + f].fold;
      s.seconds_smo += smo[f].seconds;
      s.seconds_csmo += csmo[f].seconds;
      s.iterations_smo += smo[f].iterations;
      s.iterations_csmo += csmo[f].iterations;
    }
    s.metric_smo = pooled_metric(task, smo);
    s.metric_csmo = pooled_metric(task, csmo);
    s.rtd = s.seconds_smo > 0.0 ? rtd(s.seconds_smo, s.seconds_csmo) : 0.0;
    report.points.push_back(s);
    if (i > 0) {
      if (better_metric(task, s.metric_smo, report.points[report.best_smo].metric_smo)) report.best_smo = i;
      if (better_metric(task, s.metric_csmo, report.points[report.best_csmo].metric_csmo)) report.best_csmo = i;
    }
  }
  return report;
}

inline constexpr const char* grid_csv_header =
    "C_log2,gamma_log2,eps_log2,algorithm,fold,metric,seconds,iterations,clipped,resets,columns_computed,"
    "cache_hits,cache_misses";

namespace detail {

inline std::string csv_number(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

}  // namespace detail

inline void write_grid_csv(std::ostream& out, const GridReport& report) {
  out << grid_csv_header << '\n';
  for (const auto& r : report.records) {
    const auto& f = r.fold;
    out << detail::csv_number(std::log2(r.params.C)) << ',' << detail::csv_number(std::log2(r.params.gamma)) << ','
        << (r.params.eps ? detail::csv_number(std::log2(*r.params.eps)) : std::string()) << ','
        << to_string(r.algorithm) << ',' << f.fold << ',' << detail::csv_number(f.metric) << ','
        << detail::csv_number(f.seconds) << ',' << f.iterations << ',' << f.clipped << ',' << f.resets << ','
        << f.columns_computed << ',' << f.cache_hits << ',' << f.cache_misses << '\n';
  }
}

inline nlohmann::json params_json(const HyperParams& h) {
  nlohmann::json j{{"C_log2", std::log2(h.C)}, {"gamma_log2", std::log2(h.gamma)}};
  j["eps_log2"] = h.eps ? nlohmann::json(std::log2(*h.eps)) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json grid_summary_json(const GridReport& report) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : report.points) {
    auto j = params_json(p.params);
    j["metric_smo"] = p.metric_smo;
    j["metric_csmo"] = p.metric_csmo;
    j["seconds_smo"] = p.seconds_smo;
    j["seconds_csmo"] = p.seconds_csmo;
    j["iterations_smo"] = p.iterations_smo;
    j["iterations_csmo"] = p.iterations_csmo;
    j["rtd"] = p.rtd;
    points.push_back(std::move(j));
  }
  nlohmann::json out;
  out["task"] = report.task == TaskKind::classification ? "classification" : "regression";
  out["metric"] = report.task == TaskKind::classification ? "accuracy_percent" : "mse";
  out["folds"] = report.folds;
  out["points"] = std::move(points);
  if (!report.points.empty()) {
    const auto& bs = report.points[report.best_smo];
    const auto& bc = report.points[report.best_csmo];
    out["best"]["smo"] = params_json(bs.params);
    out["best"]["smo"]["metric"] = bs.metric_smo;
    out["best"]["csmo"] = params_json(bc.params);
    out["best"]["csmo"]["metric"] = bc.metric_csmo;
    double t_smo = 0.0, t_csmo = 0.0;
    for (const auto& p : report.points) {
      t_smo += p.seconds_smo;
      t_csmo += p.seconds_csmo;
    }
    out["total_seconds_smo"] = t_smo;
    out["total_seconds_csmo"] = t_csmo;
    out["rtd"] = t_smo > 0.0 ? rtd(t_smo, t_csmo) : 0.0;
  }
  return out;
}

struct SweepRecord {
  double cache_mb = 0.0;
  Algorithm algorithm = Algorithm::smo;
  double seconds = 0.0;
  std::uint64_t iterations = 0;
  std::uint64_t columns_computed = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t evictions = 0;
};

// Trains both solvers on the whole dataset once per cache budget.
inline std::vector<SweepRecord> cache_sweep(const Dataset& ds, TaskKind task, const HyperParams& h,
                                            const std::vector<double>& budgets_mb, const SolverConfig& base,
                                            const TimingProtocol& timing = {}) {
  const Problem problem = make_task_problem(ds, task, h);
  std::vector<SweepRecord> out;
  for (double mb : budgets_mb) {
    for (auto algo : {Algorithm::smo, Algorithm::csmo}) {
      SolverConfig cfg = base;
      cfg.algorithm = algo;
      cfg.cache_bytes = megabytes_to_bytes(mb);
      const auto result = train_timed(problem, cfg, timing);
      const auto& sol = result.solution;
      out.push_back({mb, algo, result.seconds, sol.counters.iterations, sol.cache.columns_computed, sol.cache.hits,
                     sol.cache.misses, sol.cache.evictions});
    }
  }
  return out;
}

inline constexpr const char* sweep_csv_header =
    "cache_mb,algorithm,seconds,iterations,columns_computed,cache_hits,cache_misses,evictions";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
  out << sweep_csv_header << '\n';
  for (const auto& r : records) {
    out << detail::csv_number(r.cache_mb) << ',' << to_string(r.algorithm) << ',' << detail::csv_number(r.seconds)
        << ',' << r.iterations << ',' << r.columns_computed << ',' << r.cache_hits << ',' << r.cache_misses << ','
        << r.evictions << '\n';
  }
}

}  // namespace csmo
