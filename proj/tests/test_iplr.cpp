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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ldml/constraints.hpp"
#include "ldml/iplr.hpp"
#include "support.hpp"

namespace ldml {
namespace {

using testing::gaussian_matrix;
using testing::relative_frobenius;

Matrix orthonormal(Index d, Index k, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(d, k, rng));
  return qr.householderQ() * Matrix::Identity(d, k);
}

ConstraintSet labelled_constraints(const DataMatrix& x, int per_class, std::uint64_t seed) {
  std::vector<int> labels(static_cast<std::size_t>(x.size()));
  for (std::size_t p = 0; p < labels.size(); ++p) labels[p] = static_cast<int>(p % 2);
  std::vector<double> pool;
  for (Index i = 0; i < x.size(); ++i)
    for (Index j = i + 1; j < x.size(); ++j) pool.push_back((x.point(i) - x.point(j)).squaredNorm());
  return ConstraintSet(generate_from_labels(labels, per_class, seed).constraints, compute_thresholds(pool));
}

SolverConfig tight() {
  SolverConfig cfg;
  cfg.tol = 1e-11;
  cfg.max_sweeps = 50000;
  return cfg;
}

TEST(FeatureBasis, TopkOnIdentitySpansSpace) {
  const Basis b = select_basis_feature(DataMatrix(Matrix::Identity(3, 3)), FeatureBasisMethod::topk_svd, 3, 0);
  EXPECT_EQ(b.k, 3);
  EXPECT_LE((b.u.transpose() * b.u - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FeatureBasis, ClusterMeansFollowBlobDirections) {
  std::mt19937_64 rng(1);
  Matrix x = 0.3 * gaussian_matrix(5, 40, rng);
  for (Index p = 0; p < 40; ++p) x(p < 20 ? 0 : 1, p) += 10.0;
  const Basis b = select_basis_feature(DataMatrix(x), FeatureBasisMethod::cluster_means, 2, 3);
  ASSERT_EQ(b.k, 2);
  const double limit = std::cos(15.0 * std::numbers::pi / 180.0);
  for (Index c = 0; c < 2; ++c) {
    const Vector u = b.u.col(c);
    const double best = std::max(std::abs(u(0)), std::abs(u(1))) / u.norm();
    EXPECT_GE(best, limit);
  }
  EXPECT_LE((b.u.transpose() * b.u - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FeatureBasis, ClassMeansClusteredDownToK) {
  std::mt19937_64 rng(2);
  const Matrix x = gaussian_matrix(6, 40, rng);
  std::vector<int> labels(40);
  for (int p = 0; p < 40; ++p) labels[static_cast<std::size_t>(p)] = p % 4;
  const Basis b = select_basis_feature(DataMatrix(x), FeatureBasisMethod::class_means, 2, 0, labels);
  EXPECT_EQ(b.k, 2);
  EXPECT_LE((b.u.transpose() * b.u - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
  // Every basis direction lies in the span of the four class means.
  Matrix means = Matrix::Zero(6, 4);
  for (int p = 0; p < 40; ++p) means.col(p % 4) += x.col(p) / 10.0;
  Eigen::ColPivHouseholderQR<Matrix> qr(means);
  for (Index c = 0; c < 2; ++c) {
    const Vector coef = qr.solve(Vector(b.u.col(c)));
    EXPECT_LE((means * coef - b.u.col(c)).norm(), 1e-8);
  }
}

TEST(FeatureBasis, ClassMeansSplitClassesWhenKExceedsClasses) {
  std::mt19937_64 rng(3);
  const Matrix x = gaussian_matrix(8, 30, rng);
  std::vector<int> labels(30);
  for (int p = 0; p < 30; ++p) labels[static_cast<std::size_t>(p)] = p % 2;
  const Basis b = select_basis_feature(DataMatrix(x), FeatureBasisMethod::class_means, 5, 0, labels);
  EXPECT_EQ(b.k, 5);
}

TEST(FeatureBasis, RankDeficientCandidatesReduceK) {
  Matrix x = Matrix::Zero(4, 6);
  for (Index p = 0; p < 6; ++p) x(0, p) = static_cast<double>(p);
  const Basis b = select_basis_feature(DataMatrix(x), FeatureBasisMethod::topk_svd, 3, 0);
  EXPECT_EQ(b.k, 1);
  EXPECT_FALSE(b.warnings.empty());
}

TEST(FeatureBasis, RejectsBadK) {
  const DataMatrix x(Matrix::Identity(3, 3));
  EXPECT_THROW(select_basis_feature(x, FeatureBasisMethod::topk_svd, 0, 0), InvalidArgument);
  EXPECT_THROW(select_basis_feature(x, FeatureBasisMethod::topk_svd, 4, 0), InvalidArgument);
  EXPECT_THROW(select_basis_feature(x, FeatureBasisMethod::class_means, 2, 0), InvalidArgument);
}

TEST(KernelBasis, SubsetWithFullKIsPermutation) {
  std::mt19937_64 rng(4);
  const SymMatrix k0 = testing::random_pd(6, rng);
  const Basis b = select_basis_kernel(k0, KernelBasisMethod::subset, 6, 1);
  EXPECT_EQ(b.j.cwiseAbs().sum(), 6.0);
  EXPECT_EQ(b.j.transpose() * b.j, Matrix::Identity(6, 6));
  EXPECT_EQ(b.j * b.j.transpose(), Matrix::Identity(6, 6));
}

TEST(KernelBasis, RandomIsSeeded) {
  const SymMatrix k0 = SymMatrix::identity(5);
  const Basis a = select_basis_kernel(k0, KernelBasisMethod::random_j, 3, 7);
  const Basis b = select_basis_kernel(k0, KernelBasisMethod::random_j, 3, 7);
  const Basis c = select_basis_kernel(k0, KernelBasisMethod::random_j, 3, 8);
  EXPECT_EQ(a.j, b.j);
  EXPECT_NE(a.j, c.j);
}

TEST(KernelBasis, RandomCoefficientGramIsPD) {
  const Basis b = select_basis_kernel(SymMatrix::identity(4), KernelBasisMethod::random_j, 2, 0);
  const SymMatrix g(b.j.transpose() * b.j);
  EXPECT_GT(min_eigenvalue(g), 0.0);
  EXPECT_EQ(b.jitter_used, 0.0);
}

TEST(KernelBasis, KernelKmeansCoefficientsAreCentroids) {
  const Dataset data = testing::blobs(3, 10, 2, 6.0, 5);
  const SymMatrix k0 = gram(*data.x, KernelSpec::linear());
  const Basis b = select_basis_kernel(k0, KernelBasisMethod::kernel_kmeans, 3, 0);
  EXPECT_EQ(b.j.cols(), 3);
  for (Index c = 0; c < 3; ++c) EXPECT_NEAR(b.j.col(c).sum(), 1.0, 1e-12);
}

TEST(KernelBasis, SingularGramFails) {
  const SymMatrix zero = SymMatrix::zero(4);
  EXPECT_THROW(select_basis_kernel(zero, KernelBasisMethod::random_j, 2, 0), NumericalFailure);
}

TEST(Reduce, FullBasisKeepsThresholds) {
  std::mt19937_64 rng(5);
  const DataMatrix x(gaussian_matrix(4, 10, rng));
  const ConstraintSet cs = labelled_constraints(x, 5, 1);
  Basis b;
  b.u = Matrix::Identity(4, 4);
  b.k = 4;
  const ReducedProblem r = reduce_problem(x, b, cs);
  ASSERT_EQ(r.constraints.size(), cs.size());
  for (std::size_t c = 0; c < cs.size(); ++c) EXPECT_NEAR(r.constraints.bound(c), cs.bound(c), 1e-12);
}

TEST(Reduce, OrthogonalDirectionSubtractsDistance) {
  Matrix x(2, 3);
  x << 0.0, 1.0, 5.0,  //
      0.0, 0.0, 0.0;
  const ConstraintSet cs({{0, 1, ConstraintKind::similar}}, Thresholds{3.0, 10.0});
  Basis b;
  b.u = Vector::Unit(2, 1);
  b.k = 1;
  const ReducedProblem r = reduce_problem(DataMatrix(x), b, cs);
  ASSERT_EQ(r.constraints.size(), 1u);
  EXPECT_DOUBLE_EQ(r.constraints.bound(0), 3.0 - 1.0);
}

TEST(Reduce, UnreachableSimilarityIsSkipped) {
  Matrix x(2, 2);
  x << 0.0, 2.0,  //
      0.0, 0.0;
  const ConstraintSet cs({{0, 1, ConstraintKind::similar}}, Thresholds{1.0, 10.0});
  Basis b;
  b.u = Vector::Unit(2, 1);
  b.k = 1;
  const ReducedProblem r = reduce_problem(DataMatrix(x), b, cs);
  EXPECT_TRUE(r.constraints.empty());
  EXPECT_EQ(r.warnings.size(), 1u);
}

// d_W(x_i, x_j) = d_I(x_i, x_j) - d_I(x'_i, x'_j) + d_F(x'_i, x'_j) for
// W = I + U (F - I) U^T and x' = U^T x.
TEST(Identities, DistanceDecomposition) {
  std::mt19937_64 rng(6);
  const Index d = 6, k = 3;
  const Matrix x = gaussian_matrix(d, 8, rng);
  const Matrix u = orthonormal(d, k, rng);
  const Matrix xp = u.transpose() * x;
  for (int trial = 0; trial < 100; ++trial) {
    const SymMatrix f = testing::random_pd(k, rng, 0.05);
    const Matrix w = Matrix::Identity(d, d) + u * (f.matrix() - Matrix::Identity(k, k)) * u.transpose();
    const Index i = trial % 8, j = (trial * 3 + 1) % 8;
    const Vector v = x.col(i) - x.col(j);
    const Vector vp = xp.col(i) - xp.col(j);
    const double lhs = v.dot(w * v);
    const double rhs = v.squaredNorm() - vp.squaredNorm() + vp.dot(f.matrix() * vp);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

// D_ld(I + U L U^T, I_d) = D_ld(I + L, I_k).
TEST(Identities, ObjectiveReduction) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 3 + trial % 6;
    const Index k = 1 + trial % d;
    const Matrix u = orthonormal(d, k, rng);
    const SymMatrix f = testing::random_pd(k, rng, 0.05);  // I + L with L >= -I + eps I
    const Matrix l = f.matrix() - Matrix::Identity(k, k);
    const SymMatrix w(Matrix::Identity(d, d) + u * l * u.transpose());
    EXPECT_NEAR(logdet_divergence(w, SymMatrix::identity(d)), logdet_divergence(f, SymMatrix::identity(k)), 1e-9);
  }
}

TEST(FitIplr, FullBasisMatchesFitLinear) {
  std::mt19937_64 rng(8);
  const DataMatrix x(gaussian_matrix(4, 14, rng));
  const ConstraintSet cs = labelled_constraints(x, 6, 2);
  const Basis b = select_basis_feature(x, FeatureBasisMethod::topk_svd, 4, 0);
  const IPLRModel m = fit_iplr(x, b, cs, tight());
  const LinearModel direct = fit_linear(x, cs, tight());
  EXPECT_LE(relative_frobenius(reconstruct_linear(m).w.matrix(), direct.w.matrix()), 1e-4);
}

TEST(FitIplr, ObjectiveIdentityOnSolution) {
  std::mt19937_64 rng(9);
  const DataMatrix x(gaussian_matrix(6, 12, rng));
  const ConstraintSet cs = labelled_constraints(x, 6, 3);
  const Basis b = select_basis_feature(x, FeatureBasisMethod::topk_svd, 3, 0);
  const IPLRModel m = fit_iplr(x, b, cs, {});
  const LinearModel w = reconstruct_linear(m);
  EXPECT_NEAR(logdet_divergence(w.w, SymMatrix::identity(6)), logdet_divergence(m.f, SymMatrix::identity(3)), 1e-8);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j)
      EXPECT_NEAR(m.distance(x.point(i), x.point(j)), w.distance(x.point(i), x.point(j)), 1e-9);
}

TEST(FitIplr, NothingViolatedGivesIdentity) {
  const DataMatrix x(Matrix::Identity(3, 3));
  const ConstraintSet cs({{0, 1, ConstraintKind::similar}}, Thresholds{5.0, 5.0});
  Basis b;
  b.u = Matrix::Identity(3, 2);
  b.k = 2;
  const IPLRModel m = fit_iplr(x, b, cs, {});
  EXPECT_EQ(m.f, SymMatrix::identity(2));
}

TEST(Reconstruct, IdentityCore) {
  std::mt19937_64 rng(10);
  const SymMatrix k0 = testing::random_pd(5, rng);
  IPLRModel m;
  m.basis.mode = BasisMode::coefficient_j;
  m.basis.j = gaussian_matrix(5, 2, rng);
  m.basis.k = 2;
  m.f = SymMatrix::identity(2);
  m.k0 = k0;
  const LearnedKernelModel model = reconstruct_kernel(m, KernelSpec::precomputed(), std::nullopt);
  EXPECT_LE(relative_frobenius(model.learned_training_kernel().matrix(), k0.matrix()), 1e-14);

  IPLRModel lin;
  lin.basis.u = Matrix::Identity(4, 1);
  lin.basis.k = 1;
  lin.f = SymMatrix::identity(1);
  EXPECT_EQ(reconstruct_linear(lin).w, SymMatrix::identity(4));
  lin.f = SymMatrix(Matrix::Constant(1, 1, 2.0));
  Vector diag = Vector::Ones(4);
  diag(0) = 2.0;
  EXPECT_EQ(reconstruct_linear(lin).w, SymMatrix::diagonal(diag));
}

TEST(Reconstruct, FullSubsetBasisMatchesFitKernel) {
  std::mt19937_64 rng(11);
  const DataMatrix x(gaussian_matrix(3, 10, rng));
  const KernelSpec spec = KernelSpec::gaussian(1.5);
  const SymMatrix k0 = gram(x, spec);
  std::vector<double> pool;
  for (Index i = 0; i < 10; ++i)
    for (Index j = i + 1; j < 10; ++j) pool.push_back(pair_distance_kernel(k0, i, j));
  std::vector<int> labels(10);
  for (int p = 0; p < 10; ++p) labels[static_cast<std::size_t>(p)] = p % 2;
  const ConstraintSet cs(generate_from_labels(labels, 6, 4).constraints, compute_thresholds(pool));
  const Basis b = select_basis_kernel(k0, KernelBasisMethod::subset, 10, 0);
  const IPLRModel m = fit_iplr(k0, b, cs, tight());
  const LearnedKernelModel model = reconstruct_kernel(m, spec, x);
  const KernelModel direct = fit_kernel(k0, cs, tight());
  EXPECT_LE(relative_frobenius(model.learned_training_kernel().matrix(), direct.k.matrix()), 1e-4);
}

TEST(Reconstruct, LowRankModelStaysFactored) {
  std::mt19937_64 rng(12);
  const DataMatrix x(gaussian_matrix(3, 20, rng));
  const KernelSpec spec = KernelSpec::gaussian(1.0);
  const SymMatrix k0 = gram(x, spec);
  std::vector<double> pool;
  for (Index i = 0; i < 20; ++i)
    for (Index j = i + 1; j < 20; ++j) pool.push_back(pair_distance_kernel(k0, i, j));
  std::vector<int> labels(20);
  for (int p = 0; p < 20; ++p) labels[static_cast<std::size_t>(p)] = p % 2;
  const ConstraintSet cs(generate_from_labels(labels, 8, 5).constraints, compute_thresholds(pool));
  const Basis b = select_basis_kernel(k0, KernelBasisMethod::random_j, 4, 2);
  const IPLRModel m = fit_iplr(k0, b, cs, {});
  const LearnedKernelModel model = reconstruct_kernel(m, spec, x);
  EXPECT_TRUE(model.is_factored());
  EXPECT_EQ(model.factor_basis().rows(), 20);
  EXPECT_EQ(model.factor_basis().cols(), 4);
  EXPECT_EQ(model.factor_core().dim(), 4);
  // Training distances agree with the reduced problem's distances.
  const LearnedKernelModel dense(spec, x, k0,
                                 SymMatrix(model.factor_basis() * model.factor_core().matrix() *
                                           model.factor_basis().transpose()));
  for (Index i = 0; i < 20; i += 3)
    for (Index j = 0; j < 20; j += 5) EXPECT_NEAR(model.training_distance(i, j), dense.training_distance(i, j), 1e-10);
}

}  // namespace
}  // namespace ldml
