#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "csmo/bias.hpp"
#include "csmo/dataset.hpp"
#include "csmo/kernel.hpp"
#include "csmo/problem.hpp"
#include "csmo/solver.hpp"

namespace csmo {

// Dual expansion f(x) = sum_k coef_k K(sv_k, x) + b.
struct Model {
  KernelSpec kernel = KernelSpec::linear();
  TaskKind task = TaskKind::classification;
  std::vector<SparseVector> svs;
  std::vector<double> coef;
  std::vector<std::size_t> sv_rows;  // training rows of the SVs (used by precomputed kernels)
  double b = 0.0;

  std::size_t sv_count() const noexcept { return svs.size(); }
};

inline bool operator==(const Model& a, const Model& b) {
  if (a.kernel.name() != b.kernel.name()) return false;
  if (a.kernel.is_rbf() && a.kernel.gamma() != b.kernel.gamma()) return false;
  return a.task == b.task && a.svs == b.svs && a.coef == b.coef && a.b == b.b;
}

inline Model extract_model(const Problem& p, const Solution& sol) {
  Model m;
  m.kernel = p.kernel;
  m.task = p.task;
  m.b = sol.b;
  auto keep = [&](std::size_t row, double c) {
    m.svs.push_back(p.patterns[row]);
    m.coef.push_back(c);
    m.sv_rows.push_back(row);
  };
  if (p.task == TaskKind::classification) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (sol.alpha[i] > 0.0) keep(p.source[i], sol.alpha[i] * p.y[i]);
    }
  } else {
    const std::size_t n = p.original_n;
    for (std::size_t i = 0; i < n; ++i) {
      const double beta = sol.alpha[i] - sol.alpha[n + i];
      if (beta != 0.0) keep(p.source[i], beta);
    }
  }
  return m;
}

inline double predict(const Model& m, const SparseVector& x) {
  if (m.kernel.is_precomputed()) {
    throw std::invalid_argument("predict: precomputed-kernel models only predict training rows");
  }
  double f = m.b;
  for (std::size_t k = 0; k < m.svs.size(); ++k) f += m.coef[k] * eval_kernel(m.kernel, m.svs[k], x);
  return f;
}

// Decision value at training row `row` of a precomputed-kernel model.
inline double predict_training_row(const Model& m, std::size_t row) {
  if (!m.kernel.is_precomputed()) throw std::invalid_argument("predict_training_row: kernel is not precomputed");
  const auto& gram = m.kernel.gram();
  if (row >= gram.n) throw std::out_of_range("predict_training_row: row " + std::to_string(row) + " out of range");
  double f = m.b;
  for (std::size_t k = 0; k < m.svs.size(); ++k) f += m.coef[k] * gram(m.sv_rows[k], row);
  return f;
}

inline double sign_label(double f) noexcept { return f >= 0.0 ? 1.0 : -1.0; }

inline double predict_label(const Model& m, const SparseVector& x) {
  if (m.task != TaskKind::classification) throw std::logic_error("predict_label: model is a regression model");
  return sign_label(predict(m, x));
}

class ModelLoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view model_magic = "csmo-model";
inline constexpr int model_version = 1;

// Text format:
//   csmo-model 1
//   task classification|regression
//   kernel rbf|linear
//   gamma <g>            (rbf only)
//   b <bias>
//   sv_count <n>
//   SV
//   <coef> <idx>:<val> ...   (n lines)
inline void save_model(std::ostream& out, const Model& m) {
  if (m.kernel.is_precomputed()) throw std::invalid_argument("save_model: precomputed kernels cannot be saved");
  std::string text;
  auto number = [&](double v) { detail::append_double(text, v); };
  text += std::string(model_magic) + " " + std::to_string(model_version) + "\n";
  text += std::string("task ") + (m.task == TaskKind::classification ? "classification" : "regression") + "\n";
  text += "kernel " + m.kernel.name() + "\n";
  if (m.kernel.is_rbf()) {
    text += "gamma ";
    number(m.kernel.gamma());
    text += "\n";
  }
  text += "b ";
  number(m.b);
  text += "\nsv_count " + std::to_string(m.svs.size()) + "\nSV\n";
  for (std::size_t k = 0; k < m.svs.size(); ++k) {
    number(m.coef[k]);
    text += format_sparse(m.svs[k]);
    text += "\n";
  }
  out << text;
}

inline std::string save_model(const Model& m) {
  std::ostringstream out;
  save_model(out, m);
  return out.str();
}

inline Model load_model(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&](std::string_view section) {
    if (!std::getline(in, line)) throw ModelLoadError("model file truncated: missing section '" + std::string(section) + "'");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  auto field = [&](std::string_view key) {
    next(key);
    auto toks = detail::split_ws(line);
    if (toks.size() != 2 || toks[0] != key) {
      throw ModelLoadError("line " + std::to_string(line_no) + ": expected '" + std::string(key) + " <value>'");
    }
    return std::string(toks[1]);
  };
  auto number = [&](std::string_view key) {
    double v = 0.0;
    if (!detail::parse_double(field(key), v)) {
      throw ModelLoadError("line " + std::to_string(line_no) + ": bad number for '" + std::string(key) + "'");
    }
    return v;
  };

  const auto version = field(model_magic);
  if (version != std::to_string(model_version)) throw ModelLoadError("unsupported model version " + version);
  Model m;
  const auto task = field("task");
  if (task == "classification") {
    m.task = TaskKind::classification;
  } else if (task == "regression") {
    m.task = TaskKind::regression;
  } else {
    throw ModelLoadError("unknown task '" + task + "'");
  }
  const auto kernel = field("kernel");
  if (kernel == "rbf") {
    m.kernel = KernelSpec::rbf(number("gamma"));
  } else if (kernel == "linear") {
    m.kernel = KernelSpec::linear();
  } else {
    throw ModelLoadError("unknown kernel '" + kernel + "'");
  }
  m.b = number("b");
  const double count = number("sv_count");
  if (count < 0 || count != static_cast<double>(static_cast<std::size_t>(count))) {
    throw ModelLoadError("bad sv_count");
  }
  next("SV");
  if (line != "SV") throw ModelLoadError("line " + std::to_string(line_no) + ": expected 'SV'");
  const auto n = static_cast<std::size_t>(count);
  for (std::size_t k = 0; k < n; ++k) {
    next("SV");
    Row row;
    try {
      row = parse_libsvm_line(line, line_no);
    } catch (const std::exception& e) {
      throw ModelLoadError(std::string("bad support vector: ") + e.what());
    }
    m.coef.push_back(row.label);
    m.svs.push_back(std::move(row.features));
    m.sv_rows.push_back(k);
  }
  return m;
}

inline Model load_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_model(in);
}

}  // namespace csmo
