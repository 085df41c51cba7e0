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

// Dense symmetric-matrix primitives shared by every solver: the SymMatrix and
// DataMatrix value types, kernel evaluation, matrix divergences and the
// eigenvalue-wise matrix functions built on a single symmetric eigensolver.

#ifndef LDML_LINALG_HPP
#define LDML_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ldml/error.hpp"

namespace ldml {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Square matrix whose storage is exactly symmetric.
///
/// Construction from an arbitrary square matrix keeps (A + A^T) / 2, so
/// entry (i, j) and entry (j, i) are bitwise equal. The only mutator is a
/// symmetric rank-one update.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw InvalidArgument("SymMatrix: expected a non-empty square matrix, got " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    m_ = (m + m.transpose()) * 0.5;
  }

  static SymMatrix identity(Index n) { return SymMatrix(Matrix::Identity(n, n)); }
  static SymMatrix zero(Index n) { return SymMatrix(Matrix::Zero(n, n)); }
  static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

  Index dim() const { return m_.rows(); }
  bool empty() const { return m_.size() == 0; }
  double operator()(Index i, Index j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }
  double trace() const { return m_.trace(); }

  /// this += beta * v * v^T. Entry (j, i) is copied from (i, j) so storage
  /// stays exactly symmetric.
  void rank_one_update(double beta, const Vector& v) {
    const Index n = m_.rows();
    for (Index j = 0; j < n; ++j) {
      const double bj = beta * v(j);
      for (Index i = 0; i <= j; ++i) m_(i, j) += bj * v(i);
      for (Index i = 0; i < j; ++i) m_(j, i) = m_(i, j);
    }
  }

  bool all_finite() const { return m_.allFinite(); }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_.cols() == b.m_.cols() && a.m_ == b.m_;
  }

 private:
  Matrix m_;
};

/// A d x n collection of feature vectors; column i is point i.
class DataMatrix {
 public:
  DataMatrix() = default;

  explicit DataMatrix(Matrix columns) : m_(std::move(columns)) {
    if (m_.cols() == 0 || m_.rows() == 0) throw InvalidArgument("DataMatrix: empty data");
  }

  /// Builds from an n x d matrix with one point per row.
  static DataMatrix from_rows(const Matrix& rows) { return DataMatrix(rows.transpose()); }

  Index dim() const { return m_.rows(); }
  Index size() const { return m_.cols(); }
  bool empty() const { return m_.size() == 0; }
  auto point(Index i) const { return m_.col(i); }
  const Matrix& matrix() const { return m_; }

  DataMatrix subset(std::span<const Index> idx) const {
    Matrix out(m_.rows(), static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Index>(c)) = m_.col(idx[c]);
    return DataMatrix(std::move(out));
  }

 private:
  Matrix m_;
};

template <typename A, typename B>
double squared_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  return (x - y).squaredNorm();
}

/// Input kernel function kappa_0.
struct KernelSpec {
  enum class Kind { linear, gaussian, precomputed };

  Kind kind = Kind::linear;
  double sigma = 1.0;  // gaussian bandwidth

  static KernelSpec linear() { return {}; }
  static KernelSpec gaussian(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw InvalidArgument("gaussian kernel requires sigma > 0");
    }
    return {Kind::gaussian, sigma};
  }
  static KernelSpec precomputed() { return {Kind::precomputed, 1.0}; }

  template <typename A, typename B>
  double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
    switch (kind) {
      case Kind::linear:
        return x.dot(y);
      case Kind::gaussian:
        return std::exp(-squared_distance(x, y) / (2.0 * sigma * sigma));
      case Kind::precomputed:
        break;
    }
    throw InvalidArgument("a precomputed kernel cannot be evaluated on feature vectors");
  }
};

// ---------------------------------------------------------------------------
// Spectral utilities.

struct Eigensystem {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns
};

inline Eigensystem eigensystem(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
  if (es.info() != Eigen::Success) throw NumericalFailure("symmetric eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

inline double min_eigenvalue(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("symmetric eigensolver did not converge");
  return es.eigenvalues()(0);
}

/// U f(Lambda) U^T for A = U Lambda U^T.
template <typename F>
SymMatrix spectral_function(const Eigensystem& es, F&& f) {
  Vector fv = es.values.unaryExpr(std::forward<F>(f));
  return SymMatrix(es.vectors * fv.asDiagonal() * es.vectors.transpose());
}

template <typename F>
SymMatrix spectral_function(const SymMatrix& a, F&& f) {
  return spectral_function(eigensystem(a), std::forward<F>(f));
}

/// Slack allowed below zero when a matrix is accepted as PSD.
inline double psd_tolerance(const SymMatrix& a) {
  return 1e-8 * std::max(1.0, a.trace() / static_cast<double>(a.dim()));
}

inline bool is_psd(const SymMatrix& a) { return min_eigenvalue(a) >= -psd_tolerance(a); }

namespace detail {

inline void require_same_dim(const SymMatrix& a, const SymMatrix& b, const char* who) {
  if (a.empty() || b.empty() || a.dim() != b.dim()) {
    throw InvalidArgument(std::string(who) + ": dimension mismatch (" + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()) + ")");
  }
}

inline double spectral_floor(const Vector& values) {
  const double scale = std::max(1e-300, values.cwiseAbs().maxCoeff());
  return static_cast<double>(values.size()) * std::numeric_limits<double>::epsilon() * scale;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix divergences.

/// tr(A B^-1) - log det(A B^-1) - dim. +infinity when A is not positive definite.
inline double logdet_divergence(const SymMatrix& a, const SymMatrix& b) {
  detail::require_same_dim(a, b, "logdet_divergence");
  Eigen::LLT<Matrix> llt(b.matrix());
  if (llt.info() != Eigen::Success || min_eigenvalue(b) <= 0.0) {
    throw InvalidArgument("logdet_divergence: second argument is not positive definite");
  }
  // Eigenvalues of L^-1 A L^-T are those of A B^-1.
  Matrix c = llt.matrixL().solve(a.matrix());
  c = llt.matrixL().solve(c.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(SymMatrix(c).matrix(), Eigen::EigenvaluesOnly);
  const Vector& mu = es.eigenvalues();
  if (mu(0) <= 0.0) return kInfinity;
  double total = 0.0;
  for (Index k = 0; k < mu.size(); ++k) {
    total += std::max(0.0, (mu(k) - 1.0) - std::log1p(mu(k) - 1.0));
  }
  return total;
}

/// tr(A log A - A log B - A + B), with 0 log 0 = 0.
inline double vn_divergence(const SymMatrix& a, const SymMatrix& b) {
  detail::require_same_dim(a, b, "vn_divergence");
  const Eigensystem eb = eigensystem(b);
  if (eb.values(0) <= 0.0) throw InvalidArgument("vn_divergence: second argument is not positive definite");
  const Eigensystem ea = eigensystem(a);
  if (ea.values(0) < -psd_tolerance(a)) throw InvalidArgument("vn_divergence: first argument is not PSD");

  const SymMatrix log_b = spectral_function(eb, [](double x) { return std::log(x); });
  double a_log_a = 0.0;
  double a_log_b = 0.0;
  for (Index k = 0; k < ea.values.size(); ++k) {
    const double ak = std::max(0.0, ea.values(k));
    if (ak == 0.0) continue;
    a_log_a += ak * std::log(ak);
    const auto u = ea.vectors.col(k);
    a_log_b += ak * u.dot(log_b.matrix() * u);
  }
  return std::max(0.0, a_log_a - a_log_b - a.trace() + b.trace());
}

/// (1/2) ||A - B||_F^2.
inline double frob_divergence(const SymMatrix& a, const SymMatrix& b) {
  detail::require_same_dim(a, b, "frob_divergence");
  return 0.5 * (a.matrix() - b.matrix()).squaredNorm();
}

// ---------------------------------------------------------------------------
// Kernels.

/// Gram matrix K0(i, j) = kappa(x_i, x_j).
inline SymMatrix gram(const DataMatrix& x, const KernelSpec& spec) {
  if (x.empty()) throw InvalidArgument("gram: empty data");
  if (spec.kind == KernelSpec::Kind::precomputed) {
    throw InvalidArgument("gram: a precomputed kernel has no feature vectors to evaluate");
  }
  if (spec.kind == KernelSpec::Kind::linear) {
    return SymMatrix(x.matrix().transpose() * x.matrix());
  }
  const Index n = x.size();
  Matrix k(n, n);
  for (Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) k(i, j) = k(j, i) = spec(x.point(i), x.point(j));
  }
  return SymMatrix(k);
}

/// Rectangular kernel block: result(a, b) = kappa(x_a, z_b).
inline Matrix cross_gram(const DataMatrix& x, const DataMatrix& z, const KernelSpec& spec) {
  if (x.dim() != z.dim()) throw InvalidArgument("cross_gram: feature dimension mismatch");
  if (spec.kind == KernelSpec::Kind::linear) return x.matrix().transpose() * z.matrix();
  Matrix k(x.size(), z.size());
  for (Index b = 0; b < z.size(); ++b)
    for (Index a = 0; a < x.size(); ++a) k(a, b) = spec(x.point(a), z.point(b));
  return k;
}

/// [kappa(z, x_1), ..., kappa(z, x_n)].
template <typename Z>
Vector kernel_vector(const DataMatrix& x, const Eigen::MatrixBase<Z>& z, const KernelSpec& spec) {
  if (z.size() != x.dim()) throw InvalidArgument("kernel_vector: feature dimension mismatch");
  if (spec.kind == KernelSpec::Kind::linear) return x.matrix().transpose() * z;
  Vector k(x.size());
  for (Index a = 0; a < x.size(); ++a) k(a) = spec(x.point(a), z);
  return k;
}

/// K(i,i) + K(j,j) - 2 K(i,j): squared distance between training points i and j.
inline double pair_distance_kernel(const SymMatrix& k, Index i, Index j) {
  if (i < 0 || j < 0 || i >= k.dim() || j >= k.dim()) {
    throw InvalidArgument("pair_distance_kernel: index out of range");
  }
  if (i == j) return 0.0;
  return k(i, i) + k(j, j) - 2.0 * k(i, j);
}

// ---------------------------------------------------------------------------
// Inverses.

/// (A + jitter * tr(A)/dim * I)^(-1/2), computed eigenvalue-wise.
inline SymMatrix inv_sqrt(const SymMatrix& a, double jitter = 0.0) {
  if (a.empty()) throw InvalidArgument("inv_sqrt: empty matrix");
  if (jitter < 0.0) throw InvalidArgument("inv_sqrt: negative jitter");
  Matrix shifted = a.matrix();
  shifted.diagonal().array() += jitter * a.trace() / static_cast<double>(a.dim());
  const Eigensystem es = eigensystem(SymMatrix(shifted));
  if (es.values(0) <= detail::spectral_floor(es.values)) {
    throw NumericalFailure("inv_sqrt: matrix is singular (min eigenvalue " +
                           std::to_string(es.values(0)) + ")");
  }
  return spectral_function(es, [](double x) { return 1.0 / std::sqrt(x); });
}

/// Default relative jitter for kernel-matrix inversions.
inline constexpr double kDefaultJitter = 1e-10;

/// Cholesky factorization of a PSD matrix that falls back to adding
/// kDefaultJitter * tr/n to the diagonal when the plain factorization fails.
class JitteredCholesky {
 public:
  explicit JitteredCholesky(const SymMatrix& a, double relative_jitter = kDefaultJitter) {
    if (a.empty()) throw InvalidArgument("JitteredCholesky: empty matrix");
    if (try_factor(a.matrix())) return;
    jitter_ = relative_jitter * std::max(a.trace() / static_cast<double>(a.dim()), 0.0);
    Matrix shifted = a.matrix();
    shifted.diagonal().array() += jitter_;
    if (jitter_ <= 0.0 || !try_factor(shifted)) {
      throw NumericalFailure("matrix is singular even after adding jitter " + std::to_string(jitter_));
    }
  }

  /// Absolute amount added to the diagonal (0 when none was needed).
  double jitter_used() const { return jitter_; }

  template <typename Rhs>
  Matrix solve(const Eigen::MatrixBase<Rhs>& b) const {
    return llt_.solve(b);
  }

  Matrix inverse() const { return llt_.solve(Matrix::Identity(llt_.rows(), llt_.rows())); }

 private:
  bool try_factor(const Matrix& m) {
    llt_.compute(m);
    if (llt_.info() != Eigen::Success) return false;
    const Vector pivots = llt_.matrixLLT().diagonal().array().square();
    return pivots.minCoeff() > static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon() *
                                   pivots.maxCoeff();
  }

  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

// ---------------------------------------------------------------------------
// Statistics.

/// Linear-interpolation percentile, p in [0, 100].
inline double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile: empty list");
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidArgument("percentile: p must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace ldml

#endif  // LDML_LINALG_HPP
