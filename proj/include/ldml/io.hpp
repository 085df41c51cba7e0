/*
 * Copyright 2026 The ldml Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// CSV ingestion and the model file format.
//
// A model file is line-oriented text. Scalars are "key value..." lines;
// matrices are "matrix name rows cols" followed by one line per row. Doubles
// are written with 17 significant digits so a load reproduces every bit.

#ifndef LDML_IO_HPP
#define LDML_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ldml/error.hpp"
#include "ldml/linalg.hpp"

namespace ldml {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_integer(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  // Accept integral floating literals such as "1.0".
  const auto d = parse_double(s);
  if (d && std::isfinite(*d) && *d == std::floor(*d) && std::abs(*d) < 9e15) return static_cast<long long>(*d);
  return std::nullopt;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Rows of a numeric CSV. Blank lines are ignored; `header` skips the first line.
inline Matrix read_numeric_csv(const std::string& path, bool header = false) {
  const std::string text = detail::read_file(path);
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = detail::parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(path + ": line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                        ": not a finite number: '" + std::string(fields[c]) + "'");
      }
      row.push_back(*v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                      " fields, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) out(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return out;
}

/// Integer labels, one per line (or the first field of each line).
inline std::vector<int> read_labels(const std::string& path, bool header = false) {
  const std::string text = detail::read_file(path);
  std::vector<int> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    if (detail::trim(line).empty()) continue;
    const auto v = detail::parse_integer(detail::split(line, ',').front());
    if (!v || *v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": label is not an integer");
    }
    out.push_back(static_cast<int>(*v));
  }
  if (out.empty()) throw DataError(path + ": no labels");
  return out;
}

/// Splits off the final column of `rows` as integer labels.
inline std::pair<Matrix, std::vector<int>> split_label_column(const Matrix& rows, const std::string& source) {
  if (rows.cols() < 2) throw DataError(source + ": need at least one feature column besides the label");
  std::vector<int> labels(static_cast<std::size_t>(rows.rows()));
  for (Index r = 0; r < rows.rows(); ++r) {
    const double v = rows(r, rows.cols() - 1);
    if (v != std::floor(v) || std::abs(v) > 2e9) {
      throw DataError(source + ": row " + std::to_string(r + 1) + ": label " + std::to_string(v) + " is not an integer");
    }
    labels[static_cast<std::size_t>(r)] = static_cast<int>(v);
  }
  return {rows.leftCols(rows.cols() - 1), std::move(labels)};
}

/// Reads and validates an n x n kernel matrix: square, symmetric within 1e-8
/// (relative to its largest entry) and PSD within the core tolerance.
inline SymMatrix read_kernel_csv(const std::string& path, bool header = false) {
  const Matrix k = read_numeric_csv(path, header);
  if (k.rows() != k.cols()) {
    throw DataError(path + ": kernel matrix must be square, got " + std::to_string(k.rows()) + "x" +
                    std::to_string(k.cols()));
  }
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  for (Index i = 0; i < k.rows(); ++i) {
    for (Index j = i + 1; j < k.cols(); ++j) {
      if (std::abs(k(i, j) - k(j, i)) > 1e-8 * scale) {
        throw DataError(path + ": kernel matrix is not symmetric at row " + std::to_string(i + 1) + ", column " +
                        std::to_string(j + 1));
      }
    }
  }
  SymMatrix out(k);
  const double lo = min_eigenvalue(out);
  if (lo < -psd_tolerance(out)) {
    throw DataError(path + ": kernel matrix is not positive semidefinite (min eigenvalue " + std::to_string(lo) + ")");
  }
  return out;
}

/// Index pairs, one "i,j" per line.
inline std::vector<std::pair<Index, Index>> read_pairs(const std::string& path) {
  const std::string text = detail::read_file(path);
  std::vector<std::pair<Index, Index>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    std::optional<long long> a, b;
    if (f.size() == 2) {
      a = detail::parse_integer(f[0]);
      b = detail::parse_integer(f[1]);
    }
    if (!a || !b || *a < 0 || *b < 0) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected two non-negative indices 'i,j'");
    }
    out.emplace_back(static_cast<Index>(*a), static_cast<Index>(*b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model documents.

/// printf("%.17g"): shortest fixed-width form that round-trips a double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Ordered key/value document with scalar, vector and matrix entries.
class ModelDocument {
 public:
  void set(const std::string& key, const std::string& value) { add(key, Entry{Entry::Kind::scalar, value, {}}); }
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set_int(const std::string& key, long long value) { set(key, std::to_string(value)); }

  void set_vector(const std::string& key, const std::vector<double>& v) {
    Matrix m(1, static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Index>(i)) = v[i];
    add(key, Entry{Entry::Kind::vector, {}, std::move(m)});
  }

  void set_matrix(const std::string& key, const Matrix& m) { add(key, Entry{Entry::Kind::matrix, {}, m}); }

  bool has(const std::string& key) const { return index_.count(key) != 0; }

  const std::string& scalar(const std::string& key) const { return entry(key, Entry::Kind::scalar).text; }

  double number(const std::string& key) const {
    const auto v = detail::parse_double(scalar(key));
    if (!v) throw DataError("model file: '" + key + "' is not a number");
    return *v;
  }

  long long integer(const std::string& key) const {
    const auto v = detail::parse_integer(scalar(key));
    if (!v) throw DataError("model file: '" + key + "' is not an integer");
    return *v;
  }

  std::vector<double> vector(const std::string& key) const {
    const Matrix& m = entry(key, Entry::Kind::vector).values;
    return std::vector<double>(m.data(), m.data() + m.size());
  }

  const Matrix& matrix(const std::string& key) const { return entry(key, Entry::Kind::matrix).values; }

  std::string serialize() const {
    std::string out = "ldml-model\n";
    for (const auto& [key, e] : entries_) {
      switch (e.kind) {
        case Entry::Kind::scalar:
          out += key + " " + e.text + "\n";
          break;
        case Entry::Kind::vector:
          out += "vector " + key + " " + std::to_string(e.values.cols()) + "\n";
          for (Index c = 0; c < e.values.cols(); ++c) out += (c ? " " : "") + format_double(e.values(0, c));
          out += "\n";
          break;
        case Entry::Kind::matrix:
          out += "matrix " + key + " " + std::to_string(e.values.rows()) + " " + std::to_string(e.values.cols()) + "\n";
          for (Index r = 0; r < e.values.rows(); ++r) {
            for (Index c = 0; c < e.values.cols(); ++c) out += (c ? " " : "") + format_double(e.values(r, c));
            out += "\n";
          }
          break;
      }
    }
    out += "end\n";
    return out;
  }

  static ModelDocument parse(const std::string& text, const std::string& source = "model file") {
    ModelDocument doc;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& why) {
      throw DataError(source + ": line " + std::to_string(line_no) + ": " + why);
    };
    auto next_line = [&]() -> std::string {
      if (!std::getline(in, line)) fail("unexpected end of file");
      ++line_no;
      return line;
    };
    if (next_line() != "ldml-model") fail("missing 'ldml-model' header");
    bool ended = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (line == "end") {
        ended = true;
        break;
      }
      std::istringstream fields(line);
      std::string key;
      fields >> key;
      if (key.empty()) fail("empty line");
      if (key == "vector" || key == "matrix") {
        std::string name;
        long long rows = 1, cols = 0;
        if (key == "vector") fields >> name >> cols;
        else fields >> name >> rows >> cols;
        if (!fields || name.empty() || rows < 0 || cols < 0) fail("bad " + key + " header");
        if (doc.has(name)) fail("duplicate key '" + name + "'");
        Matrix m(rows, cols);
        for (long long r = 0; r < rows; ++r) {
          const std::string row = next_line();
          const auto vals = detail::split(row, ' ');
          if (cols == 0 && vals.size() == 1 && vals[0].empty()) continue;
          if (static_cast<long long>(vals.size()) != cols) fail("expected " + std::to_string(cols) + " values");
          for (long long c = 0; c < cols; ++c) {
            const auto v = detail::parse_double(vals[static_cast<std::size_t>(c)]);
            if (!v) fail("bad number '" + std::string(vals[static_cast<std::size_t>(c)]) + "'");
            m(r, c) = *v;
          }
        }
        doc.add(name, Entry{key == "vector" ? Entry::Kind::vector : Entry::Kind::matrix, {}, std::move(m)});
      } else {
        if (doc.has(key)) fail("duplicate key '" + key + "'");
        std::string rest;
        std::getline(fields, rest);
        doc.add(key, Entry{Entry::Kind::scalar, std::string(detail::trim(rest)), {}});
      }
    }
    if (!ended) fail("missing 'end'");
    return doc;
  }

 private:
  struct Entry {
    enum class Kind { scalar, vector, matrix };
    Kind kind = Kind::scalar;
    std::string text;
    Matrix values;
  };

  void add(const std::string& key, Entry e) {
    if (index_.count(key)) throw InvalidArgument("model document: duplicate key '" + key + "'");
    index_[key] = entries_.size();
    entries_.emplace_back(key, std::move(e));
  }

  const Entry& entry(const std::string& key, Entry::Kind kind) const {
    const auto it = index_.find(key);
    if (it == index_.end()) throw DataError("model file: missing '" + key + "'");
    const Entry& e = entries_[it->second].second;
    if (e.kind != kind) throw DataError("model file: '" + key + "' has the wrong type");
    return e;
  }

  std::vector<std::pair<std::string, Entry>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace ldml

#endif  // LDML_IO_HPP
