#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "regvol/errors.hpp"

namespace regvol {

// round-trip safe decimal formatting (17 significant digits)
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

// Reads a delimiter-separated numeric file, one vector per row (n rows of d
// columns), and returns V as the d x n matrix of column vectors. Comma or
// whitespace delimiters; lines starting with '#' are ignored.
inline Eigen::MatrixXd ingest_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open input file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '#') continue;
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
        throw ParseError("row " + std::to_string(lineno) + ", column " + std::to_string(c + 1) +
                         ": cannot parse '" + f + "'");
      if (!std::isfinite(v))
        throw ParseError("row " + std::to_string(lineno) + ", column " + std::to_string(c + 1) +
                         ": non-finite value '" + f + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("row " + std::to_string(lineno) + ": expected " +
                       std::to_string(rows.front().size()) + " columns, found " +
                       std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DimensionMismatch("input file has no data rows");
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.front().size());
  if (d < 1) throw DimensionMismatch("input rows are empty");
  Eigen::MatrixXd V(d, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) V(j, i) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return V;
}

// Writes V (d x n) as n rows of d space-separated values in the canonical
// 17-digit format; ingest(emit(V)) reproduces V bit-exactly.
inline void emit_vectors(const std::string& path, const Eigen::MatrixXd& V) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  for (int i = 0; i < V.cols(); ++i) {
    for (int j = 0; j < V.rows(); ++j) {
      if (j) out << ' ';
      out << format_double(V(j, i));
    }
    out << '\n';
  }
}

// Ordered key-value report. Rendering is deterministic: insertion order,
// canonical double formatting.
class Report {
 public:
  void set(const std::string& key, const std::string& value) { items_.emplace_back(key, value); }
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, long long value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  void set(const std::string& key, const std::vector<int>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(values[i]);
    }
    set(key, s);
  }

  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

  std::string render() const {
    std::string out;
    for (const auto& [k, v] : items_) {
      out += k;
      out += " = ";
      out += v;
      out += '\n';
    }
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open report file: " + path);
    out << render();
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace regvol
