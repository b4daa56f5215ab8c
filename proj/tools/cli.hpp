#pragma once

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csmo/csmo.hpp"

namespace csmo::cli {

struct CliConfig {
  std::string task = "svc";
  std::string solver = "csmo";
  double C = 1.0;
  std::optional<double> gamma;  // 1/d when unset
  double eps = 0.1;
  double eps_kkt = 1e-3;
  double cache_mb = 100.0;
  std::uint64_t seed = 1;
  std::size_t folds = 5;
  unsigned threads = 0;
  bool scale = false;
  bool remap = false;
  int repeats = 3;
  int runs = 3;
  std::uint64_t max_iter = 100'000'000;
  std::vector<double> cache_sizes{1, 8, 64};
  std::string c_range, g_range, p_range;  // "first:last:step" in log2 units
  std::string data, model, output, summary;
};

class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline TaskKind task_of(const CliConfig& c) {
  return c.task == "svr" || c.task == "eps_svr" ? TaskKind::regression : TaskKind::classification;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open data file '" + path + "'");
  try {
    return parse_libsvm(in);
  } catch (const ParseError& e) {
    throw RuntimeFailure(path + ": " + e.what());
  }
}

// Applies the dataset-level options shared by training commands.
inline Dataset prepare(const CliConfig& c, bool allow_scale = true) {
  Dataset ds = read_dataset(c.data);
  if (ds.size() == 0) throw RuntimeFailure("data file '" + c.data + "' has no rows");
  if (c.remap) ds = remap_binary_labels(ds);
  if (allow_scale && c.scale) ds = apply_scaling(ds, fit_scaling(ds));
  return ds;
}

inline double gamma_for(const CliConfig& c, const Dataset& ds) {
  if (c.gamma) return *c.gamma;
  return ds.dimension > 0 ? 1.0 / ds.dimension : 1.0;
}

inline SolverConfig solver_config(const CliConfig& c) {
  SolverConfig cfg;
  cfg.algorithm = parse_algorithm(c.solver);
  cfg.eps_kkt = c.eps_kkt;
  cfg.cache_bytes = megabytes_to_bytes(c.cache_mb);
  cfg.max_iterations = c.max_iter;
  return cfg;
}

inline Problem build_problem(const CliConfig& c, const Dataset& ds) {
  const auto kernel = KernelSpec::rbf(gamma_for(c, ds));
  return task_of(c) == TaskKind::classification ? to_classification_problem(ds, c.C, kernel)
                                                : to_regression_problem(ds, c.C, c.eps, kernel);
}

inline std::string num(double v) {
  std::string s;
  detail::append_double(s, v);
  return s;
}

inline std::vector<double> parse_range(const std::string& spec, const std::string& flag) {
  int v[3] = {0, 0, 0};
  std::size_t part = 0, start = 0;
  for (std::size_t i = 0; i <= spec.size(); ++i) {
    if (i == spec.size() || spec[i] == ':') {
      if (part >= 3 || !detail::parse_int(std::string_view(spec).substr(start, i - start), v[part])) {
        throw CLI::ValidationError(flag, "expected first:last:step, got '" + spec + "'");
      }
      ++part;
      start = i + 1;
    }
  }
  if (part != 3 || v[2] <= 0 || v[1] < v[0]) throw CLI::ValidationError(flag, "expected first:last:step, got '" + spec + "'");
  return pow2_range(v[0], v[1], v[2]);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write '" + path + "'");
  return out;
}

inline int cmd_train(const CliConfig& c, std::ostream& out) {
  const Dataset ds = prepare(c, false);
  const Problem p = build_problem(c, ds);
  const auto cfg = solver_config(c);
  const auto start = std::chrono::steady_clock::now();
  const Solution sol = solve(p, cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const Model m = extract_model(p, sol);
  auto file = open_output(c.model);
  save_model(file, m);
  if (!file) throw RuntimeFailure("failed writing '" + c.model + "'");
  out << "solver=" << c.solver << " iterations=" << sol.counters.iterations << " objective=" << num(sol.objective)
      << " sv=" << m.sv_count() << " b=" << num(sol.b) << " seconds=" << std::fixed << std::setprecision(3)
      << seconds << std::defaultfloat << " converged=" << (sol.converged ? "yes" : "no") << '\n';
  return 0;
}

inline int cmd_predict(const CliConfig& c, std::ostream& out) {
  std::ifstream in(c.model);
  if (!in) throw RuntimeFailure("cannot open model file '" + c.model + "'");
  Model m;
  try {
    m = load_model(in);
  } catch (const ModelLoadError& e) {
    throw RuntimeFailure(c.model + ": " + e.what());
  }
  const Dataset ds = read_dataset(c.data);
  auto file = open_output(c.output);
  std::size_t correct = 0;
  double sse = 0.0;
  std::string line;
  for (const auto& row : ds.rows) {
    const double f = predict(m, row.features);
    line.clear();
    if (m.task == TaskKind::classification) {
      const double label = sign_label(f);
      correct += label == row.label;
      line += label > 0 ? "1 " : "-1 ";
    } else {
      sse += (f - row.label) * (f - row.label);
    }
    line += num(f);
    file << line << '\n';
  }
  const auto n = static_cast<double>(ds.size());
  if (m.task == TaskKind::classification) {
    out << "accuracy=" << (ds.size() ? 100.0 * correct / n : 0.0) << "% (" << correct << "/" << ds.size() << ")\n";
  } else {
    out << "mse=" << (ds.size() ? sse / n : 0.0) << '\n';
  }
  return 0;
}

inline int cmd_cv(const CliConfig& c, std::ostream& out) {
  const Dataset ds = prepare(c);
  const HyperParams h{c.C, gamma_for(c, ds), task_of(c) == TaskKind::regression ? std::optional(c.eps) : std::nullopt};
  CvOptions opts;
  opts.folds = c.folds;
  opts.seed = c.seed;
  const auto cv = cross_validate(ds, task_of(c), h, solver_config(c), opts);
  for (const auto& f : cv.folds) {
    out << "fold " << f.fold << ": metric=" << f.metric << " iterations=" << f.iterations
        << " seconds=" << f.seconds << (f.converged ? "" : " (not converged)") << '\n';
  }
  out << (task_of(c) == TaskKind::classification ? "accuracy=" : "mse=") << cv.metric
      << " iterations=" << cv.total_iterations() << " seconds=" << cv.total_seconds() << '\n';
  return 0;
}

inline int cmd_grid(const CliConfig& c, std::ostream& out) {
  const Dataset ds = prepare(c);
  const TaskKind task = task_of(c);
  Grid grid = default_grid(task);
  if (!c.c_range.empty()) grid.C_values = parse_range(c.c_range, "--c-range");
  if (!c.g_range.empty()) grid.gamma_values = parse_range(c.g_range, "--g-range");
  if (!c.p_range.empty()) {
    if (task != TaskKind::regression) throw CLI::ValidationError("--p-range", "only valid with --task svr");
    grid.eps_values = parse_range(c.p_range, "--p-range");
  }
  GridOptions opts;
  opts.folds = c.folds;
  opts.seed = c.seed;
  opts.timing = {c.repeats, c.runs};
  opts.threads = c.threads;
  const auto report = grid_search(ds, task, grid, solver_config(c), opts);
  auto csv = open_output(c.output);
  write_grid_csv(csv, report);
  const std::string summary_path = c.summary.empty() ? c.output + ".json" : c.summary;
  auto json = open_output(summary_path);
  json << grid_summary_json(report).dump(2) << '\n';
  const auto& bs = report.points[report.best_smo];
  const auto& bc = report.points[report.best_csmo];
  out << "points=" << report.points.size() << " records=" << report.records.size() << '\n';
  out << "best smo: C=" << num(bs.params.C) << " gamma=" << num(bs.params.gamma);
  if (bs.params.eps) out << " eps=" << num(*bs.params.eps);
  out << " metric=" << bs.metric_smo << '\n';
  out << "best csmo: C=" << num(bc.params.C) << " gamma=" << num(bc.params.gamma);
  if (bc.params.eps) out << " eps=" << num(*bc.params.eps);
  out << " metric=" << bc.metric_csmo << '\n';
  const auto summary = grid_summary_json(report);
  out << "rtd=" << summary["rtd"].get<double>() << "%\n";
  return 0;
}

inline int cmd_bench(const CliConfig& c, std::ostream& out) {
  const Dataset ds = prepare(c);
  const HyperParams h{c.C, gamma_for(c, ds), task_of(c) == TaskKind::regression ? std::optional(c.eps) : std::nullopt};
  const auto records = cache_sweep(ds, task_of(c), h, c.cache_sizes, solver_config(c), {c.repeats, c.runs});
  auto csv = open_output(c.output);
  write_sweep_csv(csv, records);
  for (std::size_t i = 0; i + 1 < records.size(); i += 2) {
    const auto& s = records[i];
    const auto& k = records[i + 1];
    out << "cache " << s.cache_mb << " MB: smo " << s.seconds << " s (" << s.iterations << " it), csmo "
        << k.seconds << " s (" << k.iterations << " it), rtd=" << (s.seconds > 0 ? rtd(s.seconds, k.seconds) : 0.0)
        << "%\n";
  }
  return 0;
}

inline int cmd_oracle(const CliConfig& c, std::ostream& out) {
  const Dataset ds = prepare(c);
  const Problem p = build_problem(c, ds);
  if (p.size() > 200) throw RuntimeFailure("oracle: problem has " + std::to_string(p.size()) + " variables (max 200)");
  const auto ref = solve_reference(p);
  out << "refqp objective=" << num(ref.objective) << " iterations=" << ref.iterations
      << " converged=" << (ref.converged ? "yes" : "no") << '\n';
  for (auto algo : {Algorithm::smo, Algorithm::csmo}) {
    auto cfg = solver_config(c);
    cfg.algorithm = algo;
    const auto sol = solve(p, cfg);
    out << to_string(algo) << " objective=" << num(sol.objective) << " iterations=" << sol.counters.iterations
        << " gap=" << num(sol.objective - ref.objective) << '\n';
  }
  return 0;
}

// Returns the process exit code: 0 success, 1 runtime error, 2 usage error.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CliConfig c;
  CLI::App app{"SVM training with second-order SMO and Conjugate SMO", "csmo"};
  app.require_subcommand(1);

  auto add_solver_flags = [&](CLI::App* s) {
    s->add_option("--task", c.task, "svc (C-SVC) or svr (epsilon-SVR)")
        ->check(CLI::IsMember({"svc", "svr", "c_svc", "eps_svr"}));
    s->add_option("--solver", c.solver, "smo or csmo")->check(CLI::IsMember({"smo", "csmo"}));
    s->add_option("-c", c.C, "box constraint C")->check(CLI::PositiveNumber);
    s->add_option("-g", c.gamma, "RBF gamma (default 1/d)")->check(CLI::PositiveNumber);
    s->add_option("-p", c.eps, "SVR epsilon")->check(CLI::PositiveNumber);
    s->add_option("-e", c.eps_kkt, "KKT stopping tolerance")->check(CLI::PositiveNumber);
    s->add_option("-m,--cache-mb", c.cache_mb, "kernel cache size in MB")->check(CLI::NonNegativeNumber);
    s->add_option("--max-iter", c.max_iter, "iteration cap")->check(CLI::PositiveNumber);
    s->add_flag("--remap-labels", c.remap, "map two label values onto -1/+1");
  };
  auto add_cv_flags = [&](CLI::App* s) {
    s->add_option("-v,--folds", c.folds, "number of folds")->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
    s->add_option("--seed", c.seed, "fold shuffling seed");
    s->add_flag("--scale", c.scale, "scale every feature to [-1, 1] before training");
  };
  auto add_timing_flags = [&](CLI::App* s) {
    s->add_option("--repeats", c.repeats, "timing repeats (minimum taken)")->check(CLI::PositiveNumber);
    s->add_option("--runs", c.runs, "runs per repeat (mean taken)")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "train a model");
  add_solver_flags(train);
  train->add_option("data", c.data, "training data (LIBSVM format)")->required();
  train->add_option("model", c.model, "output model file")->required();

  auto* pred = app.add_subcommand("predict", "predict with a saved model");
  pred->add_option("model", c.model, "model file")->required();
  pred->add_option("data", c.data, "test data (LIBSVM format)")->required();
  pred->add_option("output", c.output, "output file, one prediction per line")->required();

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
  add_solver_flags(cv);
  add_cv_flags(cv);
  cv->add_option("data", c.data, "data (LIBSVM format)")->required();

  auto* grid = app.add_subcommand("grid", "grid search with both solvers");
  add_solver_flags(grid);
  add_cv_flags(grid);
  add_timing_flags(grid);
  grid->add_option("--threads", c.threads, "worker threads (0: all cores)");
  grid->add_option("--c-range", c.c_range, "log2 C range first:last:step");
  grid->add_option("--g-range", c.g_range, "log2 gamma range first:last:step");
  grid->add_option("--p-range", c.p_range, "log2 epsilon range first:last:step (svr)");
  grid->add_option("--summary", c.summary, "JSON summary path (default <report>.json)");
  grid->add_option("data", c.data, "data (LIBSVM format)")->required();
  grid->add_option("report", c.output, "CSV report path")->required();

  auto* bench = app.add_subcommand("bench", "cache-size sweep on the full dataset");
  add_solver_flags(bench);
  add_timing_flags(bench);
  bench->add_flag("--scale", c.scale, "scale every feature to [-1, 1] before training");
  bench->add_option("--cache-sizes", c.cache_sizes, "cache budgets in MB")
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber);
  bench->add_option("data", c.data, "data (LIBSVM format)")->required();
  bench->add_option("report", c.output, "CSV report path")->required();

  auto* oracle = app.add_subcommand("oracle", "compare both solvers with the reference QP solver");
  add_solver_flags(oracle);
  oracle->add_flag("--scale", c.scale, "scale every feature to [-1, 1] before training");
  oracle->add_option("data", c.data, "data (LIBSVM format, at most 200 variables)")->required();
  oracle->group("");

  std::vector<const char*> argv{"csmo"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(c, out);
    if (pred->parsed()) return cmd_predict(c, out);
    if (cv->parsed()) return cmd_cv(c, out);
    if (grid->parsed()) return cmd_grid(c, out);
    if (bench->parsed()) return cmd_bench(c, out);
    if (oracle->parsed()) return cmd_oracle(c, out);
  } catch (const CLI::ValidationError& e) {
    err << e.what() << '\n';
    return 2;
  } catch (const InvalidLabelError& e) {
    err << "error: " << e.what() << " (try --remap-labels)\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace csmo::cli
