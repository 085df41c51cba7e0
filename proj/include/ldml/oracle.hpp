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

// Datasets addressed by index, distance oracles over them, and k-NN.

#ifndef LDML_ORACLE_HPP
#define LDML_ORACLE_HPP

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ldml/error.hpp"
#include "ldml/iplr.hpp"
#include "ldml/linalg.hpp"
#include "ldml/out_of_sample.hpp"

namespace ldml {

/// Labelled points given either as feature vectors or as a precomputed kernel.
struct Dataset {
  std::string name;
  std::optional<DataMatrix> x;      // d x n
  std::optional<SymMatrix> kernel;  // n x n
  std::vector<int> labels;

  Index size() const {
    if (x) return x->size();
    if (kernel) return kernel->dim();
    return 0;
  }

  bool has_features() const { return x.has_value(); }

  void validate() const {
    if (x.has_value() == kernel.has_value()) throw InvalidArgument("dataset needs exactly one of features or kernel");
    if (static_cast<Index>(labels.size()) != size()) {
      throw InvalidArgument("dataset has " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(size()) + " points");
    }
  }

  std::vector<int> labels_of(std::span<const Index> idx) const {
    std::vector<int> out;
    out.reserve(idx.size());
    for (Index i : idx) out.push_back(labels[static_cast<std::size_t>(i)]);
    return out;
  }

  DataMatrix points(std::span<const Index> idx) const {
    if (!x) throw InvalidArgument("dataset has no feature vectors");
    return x->subset(idx);
  }
};

/// Input-kernel block kappa0(x_a, x_b) for a in `a`, b in `b`. A precomputed
/// dataset kernel is sliced; otherwise `spec` is evaluated on the features.
inline Matrix kernel_block(const Dataset& data, const KernelSpec& spec, std::span<const Index> a,
                           std::span<const Index> b) {
  if (data.kernel) {
    Matrix out(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
    for (std::size_t c = 0; c < b.size(); ++c)
      for (std::size_t r = 0; r < a.size(); ++r)
        out(static_cast<Index>(r), static_cast<Index>(c)) = (*data.kernel)(a[r], b[c]);
    return out;
  }
  if (spec.kind == KernelSpec::Kind::precomputed) throw InvalidArgument("dataset has no precomputed kernel");
  return cross_gram(data.points(a), data.points(b), spec);
}

/// A squared distance over points of a dataset. Every source is expressed
/// through the learned inner product, so distances are
/// ip(a, a) + ip(b, b) - 2 ip(a, b).
class DistanceOracle {
 public:
  enum class Source { baseline_euclidean, inverse_covariance, linear_model, learned_kernel_model, iplr_model };

  static DistanceOracle euclidean() { return DistanceOracle(Source::baseline_euclidean); }

  /// (x - y)^T W (x - y); `source` is inverse_covariance or linear_model.
  static DistanceOracle mahalanobis(SymMatrix w, Source source = Source::linear_model) {
    if (source != Source::inverse_covariance && source != Source::linear_model) {
      throw InvalidArgument("mahalanobis oracle needs an inverse_covariance or linear_model source");
    }
    DistanceOracle o(source);
    o.w_ = std::move(w);
    return o;
  }

  /// Learned kernel over the dataset points listed in `train`.
  /// `low_rank` optionally keeps the coefficient-basis fit the model came from.
  static DistanceOracle kernel_model(std::shared_ptr<const LearnedKernelModel> model, std::vector<Index> train,
                                     std::shared_ptr<const IPLRModel> low_rank = nullptr) {
    if (!model || static_cast<Index>(train.size()) != model->size()) {
      throw InvalidArgument("kernel oracle: training indices do not match the model");
    }
    DistanceOracle o(low_rank ? Source::iplr_model : Source::learned_kernel_model);
    o.kernel_ = std::move(model);
    o.train_ = std::move(train);
    o.iplr_ = std::move(low_rank);
    return o;
  }

  /// Explicit-basis low-rank model.
  static DistanceOracle iplr(std::shared_ptr<const IPLRModel> model) {
    if (!model || model->basis.mode != BasisMode::explicit_u) {
      throw InvalidArgument("iplr oracle needs an explicit basis");
    }
    DistanceOracle o(Source::iplr_model);
    o.iplr_ = std::move(model);
    return o;
  }

  Source source() const { return source_; }
  const std::optional<SymMatrix>& w() const { return w_; }
  const std::shared_ptr<const LearnedKernelModel>& kernel() const { return kernel_; }
  const std::shared_ptr<const IPLRModel>& iplr_model() const { return iplr_; }
  const std::vector<Index>& train_indices() const { return train_; }

  /// Squared distance between two feature vectors.
  template <typename A, typename B>
  double distance(const Eigen::MatrixBase<A>& z1, const Eigen::MatrixBase<B>& z2) const {
    if (z1.size() != z2.size()) throw InvalidArgument("oracle: point dimensions differ");
    if (kernel_) return kernel_->distance(z1, z2);
    if (iplr_) return iplr_->distance(z1, z2);  // explicit basis
    const Vector v = z1 - z2;
    if (w_) {
      if (v.size() != w_->dim()) throw InvalidArgument("oracle: point dimension does not match W");
      return v.dot(w_->matrix() * v);
    }
    return v.squaredNorm();
  }

  /// Learned inner products between dataset points: |a| x |b|.
  Matrix inner_block(const Dataset& data, std::span<const Index> a, std::span<const Index> b) const {
    if (kernel_) {
      const KernelSpec& spec = kernel_->kernel();
      Matrix base = kernel_block(data, spec, a, b);
      const Matrix ka = kernel_block(data, spec, train_, a);
      const Matrix kb = kernel_block(data, spec, train_, b);
      base *= kernel_->eta();
      if (kernel_->is_factored()) {
        const Matrix pa = kernel_->factor_basis().transpose() * ka;
        const Matrix pb = kernel_->factor_basis().transpose() * kb;
        base += pa.transpose() * kernel_->factor_core().matrix() * pb;
      } else {
        base += ka.transpose() * kernel_->dense_m().matrix() * kb;
      }
      return base;
    }
    if (!data.x) {
      // Without features the baseline is the input kernel itself.
      if (source_ == Source::baseline_euclidean && data.kernel) return kernel_block(data, KernelSpec::precomputed(), a, b);
      throw InvalidArgument("oracle: a feature-space metric needs feature vectors");
    }
    const DataMatrix xa = data.points(a);
    const DataMatrix xb = data.points(b);
    if (iplr_) {
      const Matrix pa = iplr_->basis.u.transpose() * xa.matrix();
      const Matrix pb = iplr_->basis.u.transpose() * xb.matrix();
      const Matrix core = iplr_->f.matrix() - Matrix::Identity(iplr_->f.dim(), iplr_->f.dim());
      return xa.matrix().transpose() * xb.matrix() + pa.transpose() * core * pb;
    }
    if (w_) return xa.matrix().transpose() * w_->matrix() * xb.matrix();
    return xa.matrix().transpose() * xb.matrix();
  }

  /// Squared distances between dataset points: |a| x |b|.
  Matrix distance_block(const Dataset& data, std::span<const Index> a, std::span<const Index> b) const {
    const Matrix ab = inner_block(data, a, b);
    const Vector da = self_products(data, a);
    const Vector db = self_products(data, b);
    Matrix d = -2.0 * ab;
    d.colwise() += da;
    d.rowwise() += db.transpose();
    for (std::size_t r = 0; r < a.size(); ++r) {
      for (std::size_t c = 0; c < b.size(); ++c) {
        double& v = d(static_cast<Index>(r), static_cast<Index>(c));
        if (a[r] == b[c]) v = 0.0;
        else if (v < 0.0 && v >= -1e-8 * std::max({1.0, da(static_cast<Index>(r)), db(static_cast<Index>(c))})) v = 0.0;
      }
    }
    return d;
  }

 private:
  explicit DistanceOracle(Source s) : source_(s) {}

  Vector self_products(const Dataset& data, std::span<const Index> a) const {
    Vector out(static_cast<Index>(a.size()));
    for (std::size_t r = 0; r < a.size(); ++r) {
      const Index one[1] = {a[r]};
      out(static_cast<Index>(r)) = inner_block(data, one, one)(0, 0);
    }
    return out;
  }

  Source source_;
  std::optional<SymMatrix> w_;
  std::shared_ptr<const LearnedKernelModel> kernel_;
  std::shared_ptr<const IPLRModel> iplr_;
  std::vector<Index> train_;
};

inline const char* to_string(DistanceOracle::Source s) {
  switch (s) {
    case DistanceOracle::Source::baseline_euclidean:
      return "euclidean";
    case DistanceOracle::Source::inverse_covariance:
      return "inverse_covariance";
    case DistanceOracle::Source::linear_model:
      return "linear_model";
    case DistanceOracle::Source::learned_kernel_model:
      return "learned_kernel_model";
    case DistanceOracle::Source::iplr_model:
      return "iplr_model";
  }
  return "unknown";
}

/// Majority vote among the k nearest training points for every row of the
/// query-by-train distance matrix. Distance ties and vote ties go to the
/// smallest training index.
inline std::vector<int> knn_from_distances(const Matrix& d, std::span<const int> train_labels, int k) {
  const Index n = d.cols();
  if (n == 0 || train_labels.empty()) throw InvalidArgument("knn: empty training set");
  if (static_cast<Index>(train_labels.size()) != n) throw InvalidArgument("knn: label count does not match");
  if (k < 1 || k > n) throw InvalidArgument("knn: k must lie in [1, #train]");

  std::vector<int> out(static_cast<std::size_t>(d.rows()));
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index q = 0; q < d.rows(); ++q) {
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      const double da = d(q, a), db = d(q, b);
      return da < db || (da == db && a < b);
    });
    // label -> (votes, smallest training index voting for it)
    std::map<int, std::pair<int, Index>> votes;
    for (int r = 0; r < k; ++r) {
      const Index t = order[static_cast<std::size_t>(r)];
      auto [it, fresh] = votes.try_emplace(train_labels[static_cast<std::size_t>(t)], 0, t);
      ++it->second.first;
      it->second.second = std::min(it->second.second, t);
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      if (it->second.first > best->second.first ||
          (it->second.first == best->second.first && it->second.second < best->second.second)) {
        best = it;
      }
    }
    out[static_cast<std::size_t>(q)] = best->first;
  }
  return out;
}

/// k-NN over explicit feature vectors.
inline std::vector<int> knn_classify(const DistanceOracle& oracle, const DataMatrix& train,
                                     std::span<const int> train_labels, const DataMatrix& test, int k) {
  if (train.empty()) throw InvalidArgument("knn: empty training set");
  Matrix d(test.size(), train.size());
  for (Index q = 0; q < test.size(); ++q)
    for (Index t = 0; t < train.size(); ++t) d(q, t) = oracle.distance(test.point(q), train.point(t));
  return knn_from_distances(d, train_labels, k);
}

/// k-NN over dataset indices.
inline std::vector<int> knn_classify(const DistanceOracle& oracle, const Dataset& data, std::span<const Index> train,
                                     std::span<const Index> test, int k) {
  const std::vector<int> labels = data.labels_of(train);
  return knn_from_distances(oracle.distance_block(data, test, train), labels, k);
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw InvalidArgument("accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace ldml

#endif  // LDML_ORACLE_HPP
