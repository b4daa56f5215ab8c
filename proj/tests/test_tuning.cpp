#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "csmo/tuning.hpp"
#include "support/fixtures.hpp"

using namespace csmo;

namespace {

Dataset separable(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const double label = i % 2 ? 1.0 : -1.0;
    ds.push_back({label, SparseVector({{1, label * (0.4 + 0.6 * std::abs(u(rng)))}, {2, u(rng)}})});
  }
  return ds;
}

}  // namespace

TEST(KFold, EvenSplit) {
  const auto folds = kfold_split(10, 5, 1);
  ASSERT_EQ(folds.size(), 5u);
  for (const auto& f : folds) EXPECT_EQ(f.size(), 2u);
}

TEST(KFold, RemainderSizes) {
  const auto folds = kfold_split(11, 5, 1);
  std::multiset<std::size_t> sizes;
  for (const auto& f : folds) sizes.insert(f.size());
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{2, 2, 2, 2, 3}));
}

TEST(KFold, DeterministicAndSeedSensitive) {
  EXPECT_EQ(kfold_split(50, 5, 7), kfold_split(50, 5, 7));
  EXPECT_NE(kfold_split(50, 5, 7), kfold_split(50, 5, 8));
}

TEST(KFold, Errors) {
  EXPECT_THROW(kfold_split(10, 1, 0), std::invalid_argument);
  EXPECT_THROW(kfold_split(3, 5, 0), std::invalid_argument);
}

TEST(KFold, PartitionProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng() % 9;
    const std::size_t n = k + rng() % 200;
    const auto folds = kfold_split(n, k, rng());
    ASSERT_EQ(folds.size(), k);
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      for (auto i : f) ++seen[i];
    }
    EXPECT_LE(hi - lo, 1u);
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

TEST(Rtd, Examples) {
  EXPECT_EQ(rtd(100, 75), 25.0);
  EXPECT_EQ(rtd(3.5, 3.5), 0.0);
  EXPECT_NEAR(rtd(13.124, 8.729), 33.488, 5e-4);
  EXPECT_THROW(rtd(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(rtd(-1.0, 1.0), std::invalid_argument);
}

TEST(Rtd, MatchesDefinition) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    EXPECT_EQ(rtd(a, b), 100.0 * (a - b) / a);
    EXPECT_EQ(rtd(a, b) > 0, a > b);
  }
}

TEST(DefaultGrid, Sizes) {
  const auto c = default_grid(TaskKind::classification);
  EXPECT_EQ(c.C_values.size(), 11u);
  EXPECT_EQ(c.gamma_values.size(), 10u);
  EXPECT_TRUE(c.eps_values.empty());
  EXPECT_EQ(c.size(), 110u);
  EXPECT_EQ(c.C_values.front(), std::ldexp(1.0, -5));
  EXPECT_EQ(c.C_values.back(), std::ldexp(1.0, 15));
  EXPECT_EQ(c.gamma_values.front(), std::ldexp(1.0, -15));
  EXPECT_EQ(c.gamma_values.back(), std::ldexp(1.0, 3));

  const auto r = default_grid(TaskKind::regression);
  EXPECT_EQ(r.C_values.size(), 7u);
  EXPECT_EQ(r.gamma_values.size(), 8u);
  EXPECT_EQ(r.eps_values.size(), 8u);
  EXPECT_EQ(r.size(), 448u);
  EXPECT_EQ(r.points().size(), 448u);
  EXPECT_EQ(r.size() * 5, 2240u);
  EXPECT_EQ(r.C_values.front(), 0.5);
  EXPECT_EQ(r.C_values.back(), 2048.0);
  EXPECT_EQ(r.eps_values.front(), std::ldexp(1.0, -8));
  EXPECT_EQ(r.eps_values.back(), 0.5);
}

TEST(CrossValidate, SeparableIsPerfect) {
  const auto ds = separable(60, 2);
  for (auto algo : {Algorithm::smo, Algorithm::csmo}) {
    SolverConfig cfg;
    cfg.algorithm = algo;
    const auto cv = cross_validate(ds, TaskKind::classification, {10.0, 1.0, std::nullopt}, cfg);
    EXPECT_EQ(cv.metric, 100.0);
    EXPECT_EQ(cv.folds.size(), 5u);
    for (const auto& f : cv.folds) EXPECT_TRUE(f.converged);
  }
}

TEST(CrossValidate, ConstantTargetRegression) {
  // With eps wider than the target range, alpha = 0 is optimal and the
  // predictor is the constant b, which lies within eps of every target.
  Dataset ds;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 30; ++i) ds.push_back({3.0, SparseVector({{1, u(rng)}})});
  SolverConfig cfg;
  const auto cv = cross_validate(ds, TaskKind::regression, {1.0, 1.0, 0.5}, cfg);
  for (const auto& f : cv.folds) EXPECT_EQ(f.iterations, 0u);
  EXPECT_LE(cv.metric, 0.25);
}

TEST(GridSearch, OnePointGivesTwoKRecords) {
  const auto ds = separable(40, 5);
  Grid grid{{1.0}, {0.5}, {}};
  GridOptions opts;
  opts.timing = {1, 1};
  opts.threads = 2;
  const auto report = grid_search(ds, TaskKind::classification, grid, {}, opts);
  ASSERT_EQ(report.records.size(), 10u);
  for (std::size_t f = 0; f < 5; ++f) {
    EXPECT_EQ(report.records[f].algorithm, Algorithm::smo);
    EXPECT_EQ(report.records[5 + f].algorithm, Algorithm::csmo);
    EXPECT_EQ(report.records[f].fold.fold, f);
  }
  EXPECT_EQ(report.points.size(), 1u);
}

TEST(GridSearch, MetricParityAndSameBest) {
  std::mt19937_64 rng(12);
  const auto ds = csmo::testing::random_dataset(rng, 60, 2, false);
  Grid grid{pow2_range(-1, 5, 2), pow2_range(-3, 1, 2), {}};
  GridOptions opts;
  opts.timing = {1, 1};
  SolverConfig cfg;
  cfg.eps_kkt = 1e-6;
  const auto report = grid_search(ds, TaskKind::classification, grid, cfg, opts);
  for (const auto& p : report.points) EXPECT_LE(std::abs(p.metric_smo - p.metric_csmo), 1e-6);
  EXPECT_EQ(report.best_smo, report.best_csmo);
}

TEST(GridSearch, RegressionParity) {
  std::mt19937_64 rng(13);
  const auto ds = csmo::testing::random_dataset(rng, 40, 2, true);
  Grid grid{{1.0, 8.0}, {0.5}, {0.05, 0.2}};
  GridOptions opts;
  opts.timing = {1, 1};
  SolverConfig cfg;
  cfg.eps_kkt = 1e-7;
  const auto report = grid_search(ds, TaskKind::regression, grid, cfg, opts);
  EXPECT_EQ(report.records.size(), 4u * 2 * 5);
  for (const auto& p : report.points) EXPECT_LE(std::abs(p.metric_smo - p.metric_csmo), 1e-6);
}

TEST(GridSearch, RejectsInconsistentGrid) {
  const auto ds = separable(20, 1);
  EXPECT_THROW(grid_search(ds, TaskKind::classification, Grid{{1.0}, {1.0}, {0.1}}, {}), std::invalid_argument);
  EXPECT_THROW(grid_search(ds, TaskKind::regression, Grid{{1.0}, {1.0}, {}}, {}), std::invalid_argument);
  EXPECT_THROW(grid_search(ds, TaskKind::classification, Grid{{}, {1.0}, {}}, {}), std::invalid_argument);
}

TEST(GridReportFormat, CsvSchema) {
  const auto ds = separable(20, 3);
  GridOptions opts;
  opts.timing = {1, 1};
  const auto report = grid_search(ds, TaskKind::classification, Grid{{2.0}, {0.25}, {}}, {}, opts);
  std::ostringstream out;
  write_grid_csv(out, report);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "C_log2,gamma_log2,eps_log2,algorithm,fold,metric,seconds,iterations,clipped,resets,columns_computed,"
            "cache_hits,cache_misses");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 12);
    EXPECT_EQ(line.rfind("1,-2,,", 0), 0u) << line;
  }
  EXPECT_EQ(rows, 10u);
  const auto summary = grid_summary_json(report);
  EXPECT_EQ(summary["points"].size(), 1u);
  EXPECT_EQ(summary["best"]["smo"]["C_log2"], 1.0);
  EXPECT_TRUE(summary["best"]["csmo"]["eps_log2"].is_null());
}

TEST(CacheSweep, ColumnsMonotoneInBudget) {
  std::mt19937_64 rng(6);
  const auto ds = csmo::testing::random_dataset(rng, 300, 2, false);
  // Budgets of 0, 16 and 128 columns and effectively unlimited.
  const double col_mb = 300.0 * sizeof(double) / (1024.0 * 1024.0);
  const auto sweep = cache_sweep(ds, TaskKind::classification, {10.0, 1.0, std::nullopt},
                                 {0.0, 16 * col_mb, 128 * col_mb, 64.0}, {}, {1, 1});
  ASSERT_EQ(sweep.size(), 8u);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t i = a + 2; i < sweep.size(); i += 2) {
      EXPECT_EQ(sweep[i].iterations, sweep[a].iterations);
      EXPECT_LE(sweep[i].columns_computed, sweep[i - 2].columns_computed);
    }
  }
  std::ostringstream out;
  write_sweep_csv(out, sweep);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "cache_mb,algorithm,seconds,iterations,columns_computed,cache_hits,cache_misses,evictions");
}

TEST(ParallelFor, RunsEveryTaskAndPropagatesErrors) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
