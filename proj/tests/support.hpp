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

// Shared helpers for the test suites: seeded random instances and synthetic data.

#ifndef LDML_TESTS_SUPPORT_HPP
#define LDML_TESTS_SUPPORT_HPP

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ldml/linalg.hpp"
#include "ldml/oracle.hpp"

namespace ldml::testing {

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  return m;
}

/// G G^T + shift I with G Gaussian: well conditioned PD matrix.
inline SymMatrix random_pd(Index n, std::mt19937_64& rng, double shift = 0.5) {
  const Matrix g = gaussian_matrix(n, n, rng);
  return SymMatrix(g * g.transpose() / static_cast<double>(n) + shift * Matrix::Identity(n, n));
}

inline double relative_frobenius(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Isotropic Gaussian clusters in d dimensions; class c is centred at
/// separation * e_c. Returns points as columns.
inline Dataset blobs(int classes, int per_class, Index d, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix x(d, classes * per_class);
  std::vector<int> labels;
  for (int c = 0; c < classes; ++c) {
    for (int p = 0; p < per_class; ++p) {
      const Index col = c * per_class + p;
      for (Index i = 0; i < d; ++i) x(i, col) = n01(rng);
      x(c % d, col) += separation;
      labels.push_back(c);
    }
  }
  return Dataset{"blobs", DataMatrix(std::move(x)), std::nullopt, std::move(labels)};
}

/// Three classes separated along three informative axes, plus nuisance
/// dimensions with large variance that dominate the Euclidean distance.
inline Dataset anisotropic_blobs(Index d, int n, std::uint64_t seed) {
  constexpr int kClasses = 3;
  constexpr double kSeparation = 3.0;
  constexpr double kNuisanceScale = 4.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix x(d, n);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    const int c = p % kClasses;
    labels[static_cast<std::size_t>(p)] = c;
    for (Index i = 0; i < d; ++i) x(i, p) = (i < kClasses ? 1.0 : kNuisanceScale) * n01(rng);
    x(c, p) += kSeparation;
  }
  return Dataset{"anisotropic-blobs", DataMatrix(std::move(x)), std::nullopt, std::move(labels)};
}

/// A scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ldml-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    const std::string p = file(name);
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes points as CSV rows, optionally with the label as the last column.
inline std::string to_csv(const Matrix& x, const std::vector<int>* labels = nullptr) {
  std::string out;
  char buf[40];
  for (Index p = 0; p < x.cols(); ++p) {
    for (Index i = 0; i < x.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", x(i, p));
      if (i) out += ',';
      out += buf;
    }
    if (labels) out += "," + std::to_string((*labels)[static_cast<std::size_t>(p)]);
    out += '\n';
  }
  return out;
}

}  // namespace ldml::testing

#endif  // LDML_TESTS_SUPPORT_HPP
