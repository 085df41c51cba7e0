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

// The learned kernel function kappa(z1, z2) = eta * kappa0(z1, z2) + k1^T M k2,
// with k_i = [kappa0(z_i, x_1), ..., kappa0(z_i, x_n)]. It evaluates learned
// inner products and distances on points that were not part of training.

#ifndef LDML_OUT_OF_SAMPLE_HPP
#define LDML_OUT_OF_SAMPLE_HPP

#include <optional>
#include <utility>

#include "ldml/error.hpp"
#include "ldml/linalg.hpp"
#include "ldml/logdet_solver.hpp"

namespace ldml {

struct ComputedM {
  SymMatrix m;
  double jitter_used = 0.0;
};

/// M = K0^-1 (K - eta K0) K0^-1, so that K = eta K0 + K0 M K0.
inline ComputedM compute_M(const SymMatrix& k0, const SymMatrix& k, double eta = 1.0) {
  if (k0.empty() || k0.dim() != k.dim()) throw InvalidArgument("compute_M: dimension mismatch");
  const JitteredCholesky chol(k0);
  const Matrix delta = k.matrix() - eta * k0.matrix();
  const Matrix left = chol.solve(delta);
  return {SymMatrix(chol.solve(left.transpose())), chol.jitter_used()};
}

/// Immutable learned kernel function over an input kernel.
///
/// M is held either densely (n x n) or in factored form B * C * B^T with B
/// n x k and C k x k, which is what the low-rank learner produces.
class LearnedKernelModel {
 public:
  /// Dense M. `train` may be empty for a precomputed input kernel.
  LearnedKernelModel(KernelSpec spec, std::optional<DataMatrix> train, SymMatrix k0, SymMatrix m,
                     double jitter_used = 0.0, double eta = 1.0)
      : spec_(spec), train_(std::move(train)), k0_(std::move(k0)), m_(std::move(m)), jitter_(jitter_used),
        eta_(eta) {
    check_shapes();
    if (m_.dim() != k0_.dim()) throw InvalidArgument("LearnedKernelModel: M and K0 dimensions differ");
  }

  /// Factored M = basis * core * basis^T.
  static LearnedKernelModel factored(KernelSpec spec, std::optional<DataMatrix> train, SymMatrix k0, Matrix basis,
                                     SymMatrix core, double jitter_used = 0.0) {
    if (basis.rows() != k0.dim() || basis.cols() != core.dim()) {
      throw InvalidArgument("LearnedKernelModel: factor shapes are inconsistent");
    }
    LearnedKernelModel out(spec, std::move(train), std::move(k0), std::move(basis), std::move(core), jitter_used);
    return out;
  }

  /// Builds the model from a finished kernel fit.
  static LearnedKernelModel from_fit(const KernelModel& fit, KernelSpec spec, std::optional<DataMatrix> train) {
    ComputedM cm = compute_M(fit.k0, fit.k);
    return LearnedKernelModel(spec, std::move(train), fit.k0, std::move(cm.m), cm.jitter_used);
  }

  const KernelSpec& kernel() const { return spec_; }
  const std::optional<DataMatrix>& training_points() const { return train_; }
  const SymMatrix& k0() const { return k0_; }
  Index size() const { return k0_.dim(); }
  double jitter_used() const { return jitter_; }
  double eta() const { return eta_; }
  bool is_factored() const { return factor_.has_value(); }
  const SymMatrix& dense_m() const {
    if (factor_) throw InvalidArgument("model holds M in factored form");
    return m_;
  }
  const Matrix& factor_basis() const { return factor_.value().first; }
  const SymMatrix& factor_core() const { return factor_.value().second; }

  /// k1^T M k2.
  double correction(const Vector& k1, const Vector& k2) const {
    if (k1.size() != size() || k2.size() != size()) throw InvalidArgument("kernel vector length mismatch");
    if (factor_) {
      const auto& [b, c] = *factor_;
      const Vector p1 = b.transpose() * k1;
      const Vector p2 = b.transpose() * k2;
      return p1.dot(c.matrix() * p2);
    }
    return k1.dot(m_.matrix() * k2);
  }

  /// Learned inner product given raw kernel values kappa0(z1, z2), k1, k2.
  double inner_product_from_kernel(double k12, const Vector& k1, const Vector& k2) const {
    return eta_ * k12 + correction(k1, k2);
  }

  /// Learned squared distance from kernel values; (k1 - k2)^T M (k1 - k2) is
  /// formed directly so the result is symmetric in its arguments.
  double distance_from_kernel(double k11, double k22, double k12, const Vector& k1, const Vector& k2) const {
    const Vector diff = k1 - k2;
    const double d = eta_ * (k11 + k22 - 2.0 * k12) + correction(diff, diff);
    return clamp_distance(d, std::max({1.0, std::abs(k11), std::abs(k22)}));
  }

  template <typename Z>
  Vector kernel_vector(const Eigen::MatrixBase<Z>& z) const {
    return ldml::kernel_vector(require_points(), z, spec_);
  }

  template <typename A, typename B>
  double inner_product(const Eigen::MatrixBase<A>& z1, const Eigen::MatrixBase<B>& z2) const {
    const DataMatrix& x = require_points();
    if (z1.size() != x.dim() || z2.size() != x.dim()) {
      throw InvalidArgument("query point dimension does not match the training points");
    }
    return inner_product_from_kernel(spec_(z1, z2), kernel_vector(z1), kernel_vector(z2));
  }

  template <typename A, typename B>
  double distance(const Eigen::MatrixBase<A>& z1, const Eigen::MatrixBase<B>& z2) const {
    const DataMatrix& x = require_points();
    if (z1.size() != x.dim() || z2.size() != x.dim()) {
      throw InvalidArgument("query point dimension does not match the training points");
    }
    return distance_from_kernel(spec_(z1, z1), spec_(z2, z2), spec_(z1, z2), kernel_vector(z1), kernel_vector(z2));
  }

  /// Learned inner product between training points a and b.
  double training_inner_product(Index a, Index b) const {
    check_index(a);
    check_index(b);
    return inner_product_from_kernel(k0_(a, b), k0_.matrix().col(a), k0_.matrix().col(b));
  }

  double training_distance(Index a, Index b) const {
    check_index(a);
    check_index(b);
    if (a == b) return 0.0;
    return distance_from_kernel(k0_(a, a), k0_(b, b), k0_(a, b), k0_.matrix().col(a), k0_.matrix().col(b));
  }

  /// Learned kernel matrix on the training points: eta K0 + K0 M K0.
  SymMatrix learned_training_kernel() const {
    if (factor_) {
      const Matrix p = k0_.matrix() * factor_->first;
      return SymMatrix(eta_ * k0_.matrix() + p * factor_->second.matrix() * p.transpose());
    }
    return SymMatrix(eta_ * k0_.matrix() + k0_.matrix() * m_.matrix() * k0_.matrix());
  }

  /// Learned Gram matrix over arbitrary points.
  SymMatrix learned_gram(const DataMatrix& z) const {
    const DataMatrix& x = require_points();
    const Matrix kz = cross_gram(x, z, spec_);  // n x m
    const Matrix base = cross_gram(z, z, spec_);
    Matrix corr;
    if (factor_) {
      const Matrix p = factor_->first.transpose() * kz;
      corr = p.transpose() * factor_->second.matrix() * p;
    } else {
      corr = kz.transpose() * m_.matrix() * kz;
    }
    return SymMatrix(eta_ * base + corr);
  }

  /// eta I + X M X^T; only meaningful for the linear input kernel.
  SymMatrix explicit_w() const {
    if (spec_.kind != KernelSpec::Kind::linear) throw InvalidArgument("explicit_w requires a linear input kernel");
    const Matrix& x = require_points().matrix();
    Matrix w = eta_ * Matrix::Identity(x.rows(), x.rows());
    if (factor_) {
      const Matrix p = x * factor_->first;
      w += p * factor_->second.matrix() * p.transpose();
    } else {
      w += x * m_.matrix() * x.transpose();
    }
    return SymMatrix(w);
  }

 private:
  LearnedKernelModel(KernelSpec spec, std::optional<DataMatrix> train, SymMatrix k0, Matrix basis, SymMatrix core,
                     double jitter_used)
      : spec_(spec), train_(std::move(train)), k0_(std::move(k0)),
        factor_(std::in_place, std::move(basis), std::move(core)), jitter_(jitter_used) {
    check_shapes();
  }

  void check_shapes() const {
    if (k0_.empty()) throw InvalidArgument("LearnedKernelModel: empty K0");
    if (train_ && train_->size() != k0_.dim()) {
      throw InvalidArgument("LearnedKernelModel: training points and K0 sizes differ");
    }
    if (spec_.kind == KernelSpec::Kind::precomputed && train_) {
      throw InvalidArgument("LearnedKernelModel: a precomputed kernel carries no training points");
    }
  }

  void check_index(Index a) const {
    if (a < 0 || a >= size()) throw InvalidArgument("training index out of range");
  }

  const DataMatrix& require_points() const {
    if (!train_) throw InvalidArgument("model has no training points (precomputed kernel); use kernel values");
    return *train_;
  }

  static double clamp_distance(double d, double scale) {
    if (d < 0.0 && d >= -1e-8 * scale) return 0.0;
    return d;
  }

  KernelSpec spec_;
  std::optional<DataMatrix> train_;
  SymMatrix k0_;
  SymMatrix m_;
  std::optional<std::pair<Matrix, SymMatrix>> factor_;
  double jitter_ = 0.0;
  double eta_ = 1.0;
};

}  // namespace ldml

#endif  // LDML_OUT_OF_SAMPLE_HPP
