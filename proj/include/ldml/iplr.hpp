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

// Identity-plus-low-rank learning. With W = I + U L U^T and U orthonormal
// (d x k), the learning problem reduces to a k x k one over F = I + L on the
// projected points X' = U^T X:
//
//   d_W(x_i, x_j) = d_I(x_i, x_j) - d_I(x'_i, x'_j) + d_F(x'_i, x'_j)
//   D_ld(W, I_d)  = D_ld(F, I_k)
//
// so each bound b becomes b - d_I(x_i, x_j) + d_I(x'_i, x'_j). In kernel mode
// U = X J (J^T K0 J)^{-1/2} is never formed; X' = (J^T K0 J)^{-1/2} J^T K0.

#ifndef LDML_IPLR_HPP
#define LDML_IPLR_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "ldml/constraints.hpp"
#include "ldml/error.hpp"
#include "ldml/kmeans.hpp"
#include "ldml/linalg.hpp"
#include "ldml/logdet_solver.hpp"
#include "ldml/out_of_sample.hpp"

namespace ldml {

enum class BasisMode { explicit_u, coefficient_j };

enum class FeatureBasisMethod { topk_svd, cluster_means, class_means };
enum class KernelBasisMethod { random_j, kernel_kmeans, subset };

struct Basis {
  BasisMode mode = BasisMode::explicit_u;
  Matrix u;  // d x k, orthonormal columns (explicit mode)
  Matrix j;  // n x k coefficients (kernel mode)
  Index k = 0;
  double jitter_used = 0.0;  // added to J^T K0 J before its inverse square root
  std::vector<std::string> warnings;
};

namespace detail {

/// Orthonormal basis for range(R): R (R^T R)^{-1/2}, dropping directions
/// whose Gram eigenvalue is negligible.
inline Matrix orthonormalize(const Matrix& r, std::vector<std::string>& warnings) {
  const Eigensystem es = eigensystem(SymMatrix(r.transpose() * r));
  const double top = std::max(es.values.maxCoeff(), 0.0);
  const double cut = 1e-10 * top;
  Index rank = 0;
  for (Index c = 0; c < es.values.size(); ++c)
    if (es.values(c) > cut) ++rank;
  if (rank == 0) throw InvalidArgument("basis: all candidate directions are zero");
  if (rank == r.cols()) {
    return r * spectral_function(es, [](double x) { return 1.0 / std::sqrt(x); }).matrix();
  }
  warnings.push_back("basis rank " + std::to_string(rank) + " is below the requested k=" + std::to_string(r.cols()) +
                     "; k reduced");
  const Matrix v = es.vectors.rightCols(rank);
  const Vector s = es.values.tail(rank).array().rsqrt();
  return r * v * s.asDiagonal();
}

inline KMeansConfig basis_kmeans_config(int k, std::uint64_t seed) {
  KMeansConfig cfg;
  cfg.k = k;
  cfg.max_iterations = 50;
  cfg.init = KMeansInit::farthest_point;
  cfg.seed = seed;
  return cfg;
}

}  // namespace detail

/// Explicit orthonormal basis U (d x k) from feature vectors.
/// `labels` is required for class_means and ignored otherwise.
inline Basis select_basis_feature(const DataMatrix& x, FeatureBasisMethod method, int k, std::uint64_t seed,
                                  std::span<const int> labels = {}) {
  if (k < 1) throw InvalidArgument("basis: k must be positive");
  if (k > std::min(x.size(), x.dim())) {
    throw InvalidArgument("basis: k=" + std::to_string(k) + " exceeds min(n, d)=" +
                          std::to_string(std::min(x.size(), x.dim())));
  }
  Basis basis;
  basis.mode = BasisMode::explicit_u;
  Matrix r;
  switch (method) {
    case FeatureBasisMethod::topk_svd: {
      Eigen::BDCSVD<Matrix> svd(x.matrix(), Eigen::ComputeThinU);
      r = svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal();
      break;
    }
    case FeatureBasisMethod::cluster_means: {
      const KMeansResult km = kmeans(x.matrix(), detail::basis_kmeans_config(k, seed));
      r = x.matrix() * km.coefficients;
      break;
    }
    case FeatureBasisMethod::class_means: {
      if (static_cast<Index>(labels.size()) != x.size()) {
        throw InvalidArgument("basis: class_means needs one label per point");
      }
      std::map<int, std::vector<Index>> classes;
      for (std::size_t p = 0; p < labels.size(); ++p) classes[labels[p]].push_back(static_cast<Index>(p));
      const int c = static_cast<int>(classes.size());
      if (c >= k) {
        Matrix means(x.dim(), c);
        int col = 0;
        for (const auto& [label, idx] : classes) {
          Vector mu = Vector::Zero(x.dim());
          for (Index p : idx) mu += x.point(p);
          means.col(col++) = mu / static_cast<double>(idx.size());
        }
        if (c == k) {
          r = means;
        } else {
          const KMeansResult km = kmeans(means, detail::basis_kmeans_config(k, seed));
          r = means * km.coefficients;
        }
      } else {
        // Split each class into k / c clusters; the first k mod c classes get one extra.
        r.resize(x.dim(), k);
        int col = 0;
        int cls = 0;
        for (const auto& [label, idx] : classes) {
          int parts = k / c + (cls < k % c ? 1 : 0);
          ++cls;
          if (parts > static_cast<int>(idx.size())) {
            basis.warnings.push_back("class " + std::to_string(label) + " has fewer points than requested clusters");
            parts = static_cast<int>(idx.size());
          }
          const DataMatrix sub = x.subset(idx);
          const KMeansResult km =
              kmeans(sub.matrix(), detail::basis_kmeans_config(parts, seed + static_cast<std::uint64_t>(cls)));
          const Matrix centers = sub.matrix() * km.coefficients;
          for (Index q = 0; q < centers.cols(); ++q) r.col(col++) = centers.col(q);
        }
        r.conservativeResize(Eigen::NoChange, col);
      }
      break;
    }
  }
  basis.u = detail::orthonormalize(r, basis.warnings);
  basis.k = basis.u.cols();
  return basis;
}

namespace detail {

/// (J^T K0 J)^{-1/2}; retries with the default jitter. Throws NumericalFailure.
inline SymMatrix coefficient_gram_inv_sqrt(const SymMatrix& k0, const Matrix& j, double& jitter_used) {
  const SymMatrix g(j.transpose() * k0.matrix() * j);
  try {
    jitter_used = 0.0;
    return inv_sqrt(g);
  } catch (const NumericalFailure&) {
    jitter_used = kDefaultJitter * g.trace() / static_cast<double>(g.dim());
    return inv_sqrt(g, kDefaultJitter);
  }
}

inline Matrix draw_coefficients(const SymMatrix& k0, KernelBasisMethod method, int k, std::mt19937_64& rng,
                                std::uint64_t seed) {
  const Index n = k0.dim();
  Matrix j = Matrix::Zero(n, k);
  switch (method) {
    case KernelBasisMethod::random_j: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index c = 0; c < k; ++c)
        for (Index r = 0; r < n; ++r) j(r, c) = normal(rng);
      break;
    }
    case KernelBasisMethod::subset: {
      std::vector<Index> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), Index{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      for (Index c = 0; c < k; ++c) j(idx[static_cast<std::size_t>(c)], c) = 1.0;
      break;
    }
    case KernelBasisMethod::kernel_kmeans: {
      j = kernel_kmeans(k0, basis_kmeans_config(k, seed)).coefficients;
      break;
    }
  }
  return j;
}

}  // namespace detail

/// Coefficient basis J (n x k) over the training points of K0.
inline Basis select_basis_kernel(const SymMatrix& k0, KernelBasisMethod method, int k, std::uint64_t seed) {
  if (k0.empty()) throw InvalidArgument("basis: empty kernel");
  if (k < 1 || k > k0.dim()) {
    throw InvalidArgument("basis: k=" + std::to_string(k) + " must lie in [1, n=" + std::to_string(k0.dim()) + "]");
  }
  Basis basis;
  basis.mode = BasisMode::coefficient_j;
  basis.k = k;
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 2; ++attempt) {
    basis.j = detail::draw_coefficients(k0, method, k, rng, seed + static_cast<std::uint64_t>(attempt));
    try {
      detail::coefficient_gram_inv_sqrt(k0, basis.j, basis.jitter_used);
      return basis;
    } catch (const NumericalFailure&) {
      if (attempt == 0) basis.warnings.push_back("J^T K0 J was singular; resampled the basis once");
    }
  }
  throw NumericalFailure("basis: J^T K0 J is singular even after resampling");
}

/// Reduced k x n problem.
struct ReducedProblem {
  DataMatrix xproj;                  // X'
  ConstraintSet constraints;         // surviving constraints with adjusted bounds
  std::vector<std::size_t> kept;     // index of each surviving constraint in the input set
  std::vector<std::string> warnings;
};

namespace detail {

inline ReducedProblem reduce_with(const Matrix& xproj, const ConstraintSet& cs,
                                  const std::function<double(Index, Index)>& full_distance) {
  ReducedProblem out{DataMatrix(xproj), {}, {}, {}};
  std::vector<Constraint> kept;
  std::vector<double> bounds;
  for (std::size_t c = 0; c < cs.size(); ++c) {
    const Constraint& con = cs[c];
    const double full = full_distance(con.i, con.j);
    const double reduced = (xproj.col(con.i) - xproj.col(con.j)).squaredNorm();
    const double b = cs.bound(c) - full + reduced;
    if (!(b > 0.0)) {
      out.warnings.push_back(std::string(to_string(con.kind)) + " constraint " + std::to_string(c) + " (" +
                             std::to_string(con.i) + ", " + std::to_string(con.j) +
                             ") has non-positive adjusted bound " + std::to_string(b) + "; skipped");
      continue;
    }
    kept.push_back(con);
    bounds.push_back(b);
    out.kept.push_back(c);
  }
  if (!kept.empty()) out.constraints = ConstraintSet(std::move(kept), cs.thresholds(), std::move(bounds));
  return out;
}

}  // namespace detail

/// Explicit mode: X' = U^T X.
inline ReducedProblem reduce_problem(const DataMatrix& x, const Basis& basis, const ConstraintSet& cs) {
  if (basis.mode != BasisMode::explicit_u) throw InvalidArgument("reduce_problem: expected an explicit basis");
  if (basis.u.rows() != x.dim()) throw InvalidArgument("reduce_problem: basis dimension does not match the data");
  cs.require_indices_below(x.size());
  const Matrix xproj = basis.u.transpose() * x.matrix();
  return detail::reduce_with(xproj, cs, [&](Index i, Index j) { return squared_distance(x.point(i), x.point(j)); });
}

/// Kernel mode: X' = (J^T K0 J)^{-1/2} J^T K0.
inline ReducedProblem reduce_problem(const SymMatrix& k0, const Basis& basis, const ConstraintSet& cs) {
  if (basis.mode != BasisMode::coefficient_j) throw InvalidArgument("reduce_problem: expected a coefficient basis");
  if (basis.j.rows() != k0.dim()) throw InvalidArgument("reduce_problem: basis size does not match K0");
  cs.require_indices_below(k0.dim());
  double jitter = 0.0;
  const SymMatrix s = detail::coefficient_gram_inv_sqrt(k0, basis.j, jitter);
  const Matrix xproj = s.matrix() * basis.j.transpose() * k0.matrix();
  return detail::reduce_with(xproj, cs, [&](Index i, Index j) { return pair_distance_kernel(k0, i, j); });
}

struct IPLRModel {
  Basis basis;
  SymMatrix f;             // k x k
  DataMatrix xproj;        // k x n
  std::optional<SymMatrix> k0;  // kernel mode only
  DualState dual;          // aligned with `kept`
  std::vector<std::size_t> kept;
  FitReport report;

  /// Learned squared distance between two feature vectors (explicit mode),
  /// computed as ||v||^2 - ||U^T v||^2 + (U^T v)^T F (U^T v) without forming W.
  template <typename A, typename B>
  double distance(const Eigen::MatrixBase<A>& z1, const Eigen::MatrixBase<B>& z2) const {
    if (basis.mode != BasisMode::explicit_u) throw InvalidArgument("IPLRModel::distance needs an explicit basis");
    if (z1.size() != basis.u.rows() || z2.size() != basis.u.rows()) {
      throw InvalidArgument("IPLRModel::distance: point dimension mismatch");
    }
    const Vector v = z1 - z2;
    const Vector p = basis.u.transpose() * v;
    return v.squaredNorm() - p.squaredNorm() + p.dot(f.matrix() * p);
  }
};

namespace detail {

inline IPLRModel fit_reduced(ReducedProblem reduced, Basis basis, std::optional<SymMatrix> k0,
                             const SolverConfig& cfg) {
  IPLRModel model{std::move(basis), SymMatrix::identity(reduced.xproj.dim()), reduced.xproj, std::move(k0), {}, {},
                  {}};
  model.report.warnings = model.basis.warnings;
  model.report.warnings.insert(model.report.warnings.end(), reduced.warnings.begin(), reduced.warnings.end());
  model.kept = reduced.kept;
  if (reduced.constraints.empty()) {
    model.report.converged = true;
    model.report.warnings.push_back("no constraint survived the reduction; F = I");
    return model;
  }
  LinearModel fit = fit_linear(reduced.xproj, reduced.constraints, cfg);
  model.f = std::move(fit.w);
  model.dual = std::move(fit.dual);
  model.report.converged = fit.report.converged;
  model.report.sweeps_used = fit.report.sweeps_used;
  model.report.skipped_projections = fit.report.skipped_projections;
  model.report.max_violation = fit.report.max_violation;
  model.report.warnings.insert(model.report.warnings.end(), fit.report.warnings.begin(), fit.report.warnings.end());
  return model;
}

}  // namespace detail

/// Solves the reduced problem on X' = U^T X.
inline IPLRModel fit_iplr(const DataMatrix& x, const Basis& basis, const ConstraintSet& cs, const SolverConfig& cfg) {
  return detail::fit_reduced(reduce_problem(x, basis, cs), basis, std::nullopt, cfg);
}

/// Solves the reduced problem on X' = (J^T K0 J)^{-1/2} J^T K0.
inline IPLRModel fit_iplr(const SymMatrix& k0, const Basis& basis, const ConstraintSet& cs, const SolverConfig& cfg) {
  return detail::fit_reduced(reduce_problem(k0, basis, cs), basis, k0, cfg);
}

/// W = I + U (F - I) U^T.
inline LinearModel reconstruct_linear(const IPLRModel& m) {
  if (m.basis.mode != BasisMode::explicit_u) throw InvalidArgument("reconstruct_linear: expected an explicit basis");
  const Index d = m.basis.u.rows();
  const Matrix core = m.f.matrix() - Matrix::Identity(m.f.dim(), m.f.dim());
  LinearModel out{SymMatrix(Matrix::Identity(d, d) + m.basis.u * core * m.basis.u.transpose()),
                  SymMatrix::identity(d), m.dual, m.report};
  return out;
}

/// Kernel-mode model with M = J' (F - I) J'^T, J' = J (J^T K0 J)^{-1/2}, held
/// in factored form.
inline LearnedKernelModel reconstruct_kernel(const IPLRModel& m, KernelSpec spec, std::optional<DataMatrix> train) {
  if (m.basis.mode != BasisMode::coefficient_j || !m.k0) {
    throw InvalidArgument("reconstruct_kernel: expected a coefficient basis");
  }
  double jitter = 0.0;
  const SymMatrix s = detail::coefficient_gram_inv_sqrt(*m.k0, m.basis.j, jitter);
  const Matrix jprime = m.basis.j * s.matrix();
  const SymMatrix core(m.f.matrix() - Matrix::Identity(m.f.dim(), m.f.dim()));
  return LearnedKernelModel::factored(spec, std::move(train), *m.k0, jprime, core, jitter);
}

}  // namespace ldml

#endif  // LDML_IPLR_HPP
