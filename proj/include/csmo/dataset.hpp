#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace csmo {

struct SparseEntry {
  int index;  // 1-based
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

// Canonical sparse pattern: strictly increasing indices >= 1, no stored zeros.
class SparseVector {
 public:
  SparseVector() = default;

  // Throws std::invalid_argument when the entries are not canonical.
  explicit SparseVector(std::vector<SparseEntry> entries) : entries_(std::move(entries)) {
    int last = 0;
    for (const auto& e : entries_) {
      if (e.index <= last) throw std::invalid_argument("SparseVector: indices must be >= 1 and strictly increasing");
      if (e.value == 0.0) throw std::invalid_argument("SparseVector: explicit zero stored");
      last = e.index;
    }
  }

  // Drops zeros; indices must still be increasing.
  static SparseVector from_unchecked(std::vector<SparseEntry> entries) {
    std::erase_if(entries, [](const SparseEntry& e) { return e.value == 0.0; });
    return SparseVector(std::move(entries));
  }

  const std::vector<SparseEntry>& entries() const noexcept { return entries_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  int max_index() const noexcept { return entries_.empty() ? 0 : entries_.back().index; }

  double at(int index) const noexcept {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const SparseEntry& e, int i) { return e.index < i; });
    return (it != entries_.end() && it->index == index) ? it->value : 0.0;
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::vector<SparseEntry> entries_;
};

inline double dot(const SparseVector& a, const SparseVector& b) noexcept {
  const auto& x = a.entries();
  const auto& z = b.entries();
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < z.size()) {
    if (x[i].index == z[j].index) {
      sum += x[i].value * z[j].value;
      ++i;
      ++j;
    } else if (x[i].index < z[j].index) {
      ++i;
    } else {
      ++j;
    }
  }
  return sum;
}

inline double squared_distance(const SparseVector& a, const SparseVector& b) noexcept {
  const auto& x = a.entries();
  const auto& z = b.entries();
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() || j < z.size()) {
    double diff;
    if (j == z.size() || (i < x.size() && x[i].index < z[j].index)) {
      diff = x[i++].value;
    } else if (i == x.size() || z[j].index < x[i].index) {
      diff = -z[j++].value;
    } else {
      diff = x[i++].value - z[j++].value;
    }
    sum += diff * diff;
  }
  return sum;
}

struct Row {
  double label;
  SparseVector features;

  friend bool operator==(const Row&, const Row&) = default;
};

struct Dataset {
  std::vector<Row> rows;
  int dimension = 0;  // max feature index seen

  std::size_t size() const noexcept { return rows.size(); }

  void push_back(Row row) {
    dimension = std::max(dimension, row.features.max_index());
    rows.push_back(std::move(row));
  }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.dimension = dimension;
    out.rows.reserve(indices.size());
    for (auto i : indices) out.rows.push_back(rows.at(i));
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline bool parse_int(std::string_view tok, int& out) {
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace detail

// Parses one `<label> <idx>:<val> ...` line; `line_no` is only used for errors.
inline Row parse_libsvm_line(std::string_view line, std::size_t line_no) {
  auto toks = detail::split_ws(line);
  Row row{};
  if (!detail::parse_double(toks.at(0), row.label)) {
    throw ParseError(line_no, "malformed label '" + std::string(toks[0]) + "'");
  }
  std::vector<SparseEntry> entries;
  entries.reserve(toks.size() - 1);
  int last = 0;
  for (std::size_t t = 1; t < toks.size(); ++t) {
    auto tok = toks[t];
    auto colon = tok.find(':');
    SparseEntry e{};
    if (colon == std::string_view::npos || !detail::parse_int(tok.substr(0, colon), e.index) ||
        !detail::parse_double(tok.substr(colon + 1), e.value)) {
      throw ParseError(line_no, "malformed token '" + std::string(tok) + "'");
    }
    if (e.index < 1) throw ParseError(line_no, "feature index " + std::to_string(e.index) + " < 1");
    if (e.index <= last) throw ParseError(line_no, "feature indices not ascending at " + std::to_string(e.index));
    last = e.index;
    if (e.value != 0.0) entries.push_back(e);
  }
  row.features = SparseVector(std::move(entries));
  return row;
}

inline Dataset parse_libsvm(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ds.push_back(parse_libsvm_line(line, line_no));
  }
  return ds;
}

inline Dataset parse_libsvm(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in);
}

inline std::string format_sparse(const SparseVector& v) {
  std::string out;
  for (const auto& e : v.entries()) {
    out.push_back(' ');
    out += std::to_string(e.index);
    out.push_back(':');
    detail::append_double(out, e.value);
  }
  return out;
}

inline void write_libsvm(std::ostream& out, const Dataset& ds) {
  std::string line;
  for (const auto& row : ds.rows) {
    line.clear();
    detail::append_double(line, row.label);
    line += format_sparse(row.features);
    line.push_back('\n');
    out << line;
  }
}

inline std::string write_libsvm(const Dataset& ds) {
  std::ostringstream out;
  write_libsvm(out, ds);
  return out.str();
}

// Per-feature [min, max] over the fitting set. Absent entries count as 0.
struct ScalingParams {
  std::map<int, std::pair<double, double>> ranges;
};

inline ScalingParams fit_scaling(const Dataset& ds) {
  ScalingParams params;
  std::map<int, std::size_t> seen;
  for (const auto& row : ds.rows) {
    for (const auto& e : row.features.entries()) {
      auto [it, inserted] = params.ranges.try_emplace(e.index, e.value, e.value);
      if (!inserted) {
        it->second.first = std::min(it->second.first, e.value);
        it->second.second = std::max(it->second.second, e.value);
      }
      ++seen[e.index];
    }
  }
  // Sparse rows carry implicit zeros.
  for (auto& [index, range] : params.ranges) {
    if (seen[index] < ds.size()) {
      range.first = std::min(range.first, 0.0);
      range.second = std::max(range.second, 0.0);
    }
  }
  return params;
}

// Maps each fitted feature affinely so that min -> -1 and max -> +1; constant
// features map to 0 and features not seen at fit time pass through unchanged.
inline SparseVector apply_scaling(const SparseVector& x, const ScalingParams& params) {
  std::vector<SparseEntry> out;
  out.reserve(x.nnz());
  auto emit = [&](int index, double value) {
    auto it = params.ranges.find(index);
    if (it == params.ranges.end()) {
      out.push_back({index, value});
      return;
    }
    auto [lo, hi] = it->second;
    double scaled = (hi > lo) ? -1.0 + 2.0 * (value - lo) / (hi - lo) : 0.0;
    out.push_back({index, scaled});
  };
  // Implicit zeros of fitted features may scale to nonzero values.
  auto e = x.entries().begin();
  auto r = params.ranges.begin();
  while (e != x.entries().end() || r != params.ranges.end()) {
    if (r == params.ranges.end() || (e != x.entries().end() && e->index < r->first)) {
      emit(e->index, e->value);
      ++e;
    } else if (e == x.entries().end() || r->first < e->index) {
      emit(r->first, 0.0);
      ++r;
    } else {
      emit(e->index, e->value);
      ++e;
      ++r;
    }
  }
  return SparseVector::from_unchecked(std::move(out));
}

inline Dataset apply_scaling(const Dataset& ds, const ScalingParams& params) {
  Dataset out;
  out.rows.reserve(ds.size());
  for (const auto& row : ds.rows) out.push_back({row.label, apply_scaling(row.features, params)});
  out.dimension = std::max(out.dimension, ds.dimension);
  return out;
}

// Maps a two-valued label set onto {-1, +1} (smaller value -> -1).
inline Dataset remap_binary_labels(const Dataset& ds) {
  std::vector<double> values;
  for (const auto& row : ds.rows) {
    if (std::find(values.begin(), values.end(), row.label) == values.end()) values.push_back(row.label);
  }
  if (values.size() > 2) throw std::invalid_argument("remap_binary_labels: more than two distinct labels");
  std::sort(values.begin(), values.end());
  Dataset out = ds;
  for (auto& row : out.rows) {
    row.label = (values.size() == 2 && row.label == values[0]) ? -1.0 : 1.0;
  }
  return out;
}

}  // namespace csmo
