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

// Seeded Lloyd k-means on feature vectors and on a Gram matrix.
//
// Both variants represent the centroids as a coefficient matrix Z (n x k),
// centroid c = sum_i Z(i, c) phi(x_i), which makes the kernel case a direct
// restatement of the feature case.

#ifndef LDML_KMEANS_HPP
#define LDML_KMEANS_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "ldml/error.hpp"
#include "ldml/linalg.hpp"

namespace ldml {

enum class KMeansInit { farthest_point, plus_plus };

struct KMeansConfig {
  int k = 2;
  int max_iterations = 50;
  int restarts = 1;
  KMeansInit init = KMeansInit::farthest_point;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<int> assignment;
  Matrix coefficients;  // n x k, centroid c = sum_i Z(i, c) phi(x_i)
  double inertia = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Picks k seed points. `dist(a, b)` is the squared distance between points.
template <typename PointDistance>
std::vector<Index> kmeans_seeds(Index n, int k, KMeansInit init, std::mt19937_64& rng, PointDistance&& dist) {
  std::vector<Index> seeds;
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  std::vector<double> nearest(static_cast<std::size_t>(n), kInfinity);
  auto add = [&](Index s) {
    seeds.push_back(s);
    chosen[static_cast<std::size_t>(s)] = 1;
    for (Index i = 0; i < n; ++i) nearest[static_cast<std::size_t>(i)] = std::min(nearest[static_cast<std::size_t>(i)], dist(i, s));
  };
  add(std::uniform_int_distribution<Index>(0, n - 1)(rng));
  while (static_cast<int>(seeds.size()) < k) {
    Index next = -1;
    if (init == KMeansInit::plus_plus) {
      double total = 0.0;
      for (Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) total += std::max(0.0, nearest[static_cast<std::size_t>(i)]);
      if (total > 0.0) {
        double r = std::uniform_real_distribution<double>(0.0, total)(rng);
        for (Index i = 0; i < n; ++i) {
          if (chosen[static_cast<std::size_t>(i)]) continue;
          const double w = std::max(0.0, nearest[static_cast<std::size_t>(i)]);
          if (w <= 0.0) continue;
          next = i;
          if (r < w) break;
          r -= w;
        }
      }
      if (next < 0) {
        std::vector<Index> open;
        for (Index i = 0; i < n; ++i)
          if (!chosen[static_cast<std::size_t>(i)]) open.push_back(i);
        next = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
      }
    } else {
      double best = -1.0;
      for (Index i = 0; i < n; ++i) {
        if (chosen[static_cast<std::size_t>(i)]) continue;
        if (nearest[static_cast<std::size_t>(i)] > best) {
          best = nearest[static_cast<std::size_t>(i)];
          next = i;
        }
      }
    }
    add(next);
  }
  return seeds;
}

inline Matrix coefficients_from_assignment(const std::vector<int>& assignment, int k) {
  const auto n = static_cast<Index>(assignment.size());
  Matrix z = Matrix::Zero(n, k);
  Vector count = Vector::Zero(k);
  for (Index i = 0; i < n; ++i) count(assignment[static_cast<std::size_t>(i)]) += 1.0;
  for (Index i = 0; i < n; ++i) {
    const int c = assignment[static_cast<std::size_t>(i)];
    z(i, c) = 1.0 / count(c);
  }
  return z;
}

/// Lloyd iterations. `centroid_distances(Z)` returns the n x k matrix of
/// squared distances from every point to every centroid.
template <typename PointDistance, typename CentroidDistances>
KMeansResult lloyd(Index n, const KMeansConfig& cfg, PointDistance&& dist, CentroidDistances&& centroid_distances) {
  if (cfg.k < 1) throw InvalidArgument("k-means: k must be positive");
  if (cfg.k > n) throw InvalidArgument("k-means: k exceeds the number of points");
  if (cfg.restarts < 1 || cfg.max_iterations < 1) throw InvalidArgument("k-means: bad iteration settings");

  std::mt19937_64 rng(cfg.seed);
  KMeansResult best;
  best.inertia = kInfinity;
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    const auto seeds = kmeans_seeds(n, cfg.k, cfg.init, rng, dist);
    Matrix z = Matrix::Zero(n, cfg.k);
    for (int c = 0; c < cfg.k; ++c) z(seeds[static_cast<std::size_t>(c)], c) = 1.0;

    KMeansResult run;
    run.assignment.assign(static_cast<std::size_t>(n), -1);
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
      const Matrix d = centroid_distances(z);
      std::vector<int> next(static_cast<std::size_t>(n));
      std::vector<int> size(static_cast<std::size_t>(cfg.k), 0);
      Vector own(n);
      for (Index i = 0; i < n; ++i) {
        Index c = 0;
        d.row(i).minCoeff(&c);
        next[static_cast<std::size_t>(i)] = static_cast<int>(c);
        own(i) = d(i, c);
        ++size[static_cast<std::size_t>(c)];
      }
      // Empty clusters take the point farthest from its own centroid.
      for (int c = 0; c < cfg.k; ++c) {
        if (size[static_cast<std::size_t>(c)] > 0) continue;
        Index far = -1;
        for (Index i = 0; i < n; ++i) {
          if (size[static_cast<std::size_t>(next[static_cast<std::size_t>(i)])] < 2) continue;
          if (far < 0 || own(i) > own(far)) far = i;
        }
        --size[static_cast<std::size_t>(next[static_cast<std::size_t>(far)])];
        next[static_cast<std::size_t>(far)] = c;
        own(far) = 0.0;
        size[static_cast<std::size_t>(c)] = 1;
      }
      run.iterations = iter;
      const bool same = next == run.assignment;
      run.assignment = std::move(next);
      z = coefficients_from_assignment(run.assignment, cfg.k);
      if (same) {
        run.converged = true;
        break;
      }
    }
    const Matrix d = centroid_distances(z);
    run.inertia = 0.0;
    for (Index i = 0; i < n; ++i) run.inertia += std::max(0.0, d(i, run.assignment[static_cast<std::size_t>(i)]));
    run.coefficients = std::move(z);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace detail

/// k-means on the columns of x. Centroids are x * result.coefficients.
inline KMeansResult kmeans(const Matrix& x, const KMeansConfig& cfg) {
  const Index n = x.cols();
  if (n == 0) throw InvalidArgument("k-means: no points");
  const Vector norms = x.colwise().squaredNorm().transpose();
  return detail::lloyd(
      n, cfg, [&](Index a, Index b) { return (x.col(a) - x.col(b)).squaredNorm(); },
      [&](const Matrix& z) {
        const Matrix centers = x * z;
        Matrix d = -2.0 * x.transpose() * centers;
        d.colwise() += norms;
        d.rowwise() += centers.colwise().squaredNorm();
        return d;
      });
}

/// Kernel k-means on a Gram matrix:
/// ||phi(x) - mu_c||^2 = K(x,x) - 2/|c| sum_i K(x,i) + 1/|c|^2 sum_ij K(i,j).
inline KMeansResult kernel_kmeans(const SymMatrix& k, const KMeansConfig& cfg) {
  if (k.empty()) throw InvalidArgument("kernel k-means: empty kernel");
  const Matrix& g = k.matrix();
  const Vector diag = g.diagonal();
  return detail::lloyd(
      k.dim(), cfg, [&](Index a, Index b) { return diag(a) + diag(b) - 2.0 * g(a, b); },
      [&](const Matrix& z) {
        const Matrix gz = g * z;
        const Vector self = (z.transpose() * gz).diagonal();
        Matrix d = -2.0 * gz;
        d.colwise() += diag;
        d.rowwise() += self.transpose();
        return d;
      });
}

}  // namespace ldml

#endif  // LDML_KMEANS_HPP
