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

// Pairwise similarity / dissimilarity constraints and their distance
// thresholds, generated from class labels.

#ifndef LDML_CONSTRAINTS_HPP
#define LDML_CONSTRAINTS_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ldml/error.hpp"
#include "ldml/linalg.hpp"

namespace ldml {

enum class ConstraintKind { similar, dissimilar };

inline const char* to_string(ConstraintKind k) {
  return k == ConstraintKind::similar ? "similar" : "dissimilar";
}

struct Constraint {
  Index i = 0;
  Index j = 0;
  ConstraintKind kind = ConstraintKind::similar;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Upper bound u for similar pairs, lower bound l for dissimilar pairs.
struct Thresholds {
  double upper = 1.0;
  double lower = 1.0;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

/// An immutable list of distinct constraints plus their bounds.
///
/// Bounds normally come from the two global thresholds. A set may instead
/// carry one bound per constraint (used by the low-rank reduction, where the
/// bound depends on the pair).
class ConstraintSet {
 public:
  ConstraintSet() = default;

  ConstraintSet(std::vector<Constraint> constraints, Thresholds thresholds)
      : constraints_(std::move(constraints)), thresholds_(thresholds) {
    if (!(thresholds_.upper > 0.0) || !(thresholds_.upper <= thresholds_.lower)) {
      throw InvalidArgument("thresholds must satisfy 0 < u <= l (got u=" + std::to_string(thresholds_.upper) +
                            ", l=" + std::to_string(thresholds_.lower) + ")");
    }
    check_pairs();
  }

  ConstraintSet(std::vector<Constraint> constraints, Thresholds thresholds, std::vector<double> bounds)
      : ConstraintSet(std::move(constraints), thresholds) {
    if (bounds.size() != constraints_.size()) {
      throw InvalidArgument("per-constraint bounds must match the number of constraints");
    }
    for (double b : bounds) {
      if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("per-constraint bounds must be positive");
    }
    bounds_ = std::move(bounds);
  }

  std::size_t size() const { return constraints_.size(); }
  bool empty() const { return constraints_.empty(); }
  const Constraint& operator[](std::size_t k) const { return constraints_[k]; }
  auto begin() const { return constraints_.begin(); }
  auto end() const { return constraints_.end(); }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const Thresholds& thresholds() const { return thresholds_; }
  bool has_pair_bounds() const { return bounds_.has_value(); }

  /// Target distance of constraint k (u or l unless per-pair bounds were given).
  double bound(std::size_t k) const {
    if (bounds_) return (*bounds_)[k];
    return constraints_[k].kind == ConstraintKind::similar ? thresholds_.upper : thresholds_.lower;
  }

  /// Throws unless every index is below n.
  void require_indices_below(Index n) const {
    for (const auto& c : constraints_) {
      if (c.i >= n || c.j >= n) {
        throw InvalidArgument("constraint (" + std::to_string(c.i) + ", " + std::to_string(c.j) +
                              ") references a point outside [0, " + std::to_string(n) + ")");
      }
    }
  }

 private:
  void check_pairs() const {
    std::set<std::tuple<Index, Index, ConstraintKind>> seen;
    for (const auto& c : constraints_) {
      if (c.i < 0 || c.j < 0) throw InvalidArgument("negative constraint index");
      if (c.i == c.j) throw InvalidArgument("constraint joins point " + std::to_string(c.i) + " to itself");
      if (!seen.emplace(std::min(c.i, c.j), std::max(c.i, c.j), c.kind).second) {
        throw InvalidArgument("duplicate constraint (" + std::to_string(c.i) + ", " + std::to_string(c.j) + ")");
      }
    }
  }

  std::vector<Constraint> constraints_;
  Thresholds thresholds_;
  std::optional<std::vector<double>> bounds_;
};

struct GeneratedConstraints {
  std::vector<Constraint> constraints;
  std::vector<std::string> warnings;
};

namespace detail {

/// Draws a pair with `draw`, redrawing up to `retries` times while the pair is
/// already present. Returns nullopt if every attempt was a duplicate.
template <typename Draw>
std::optional<Constraint> draw_unique(Draw&& draw, std::set<std::tuple<Index, Index, ConstraintKind>>& seen,
                                      int retries = 10) {
  for (int attempt = 0; attempt <= retries; ++attempt) {
    Constraint c = draw();
    if (seen.emplace(std::min(c.i, c.j), std::max(c.i, c.j), c.kind).second) return c;
  }
  return std::nullopt;
}

}  // namespace detail

/// For every class c: per_class similar pairs drawn within c and per_class
/// dissimilar pairs with the first point in c and the second outside it.
inline GeneratedConstraints generate_from_labels(std::span<const int> labels, int per_class, std::uint64_t seed) {
  if (per_class <= 0) throw InvalidArgument("per_class must be positive");
  std::map<int, std::vector<Index>> members;
  for (std::size_t p = 0; p < labels.size(); ++p) members[labels[p]].push_back(static_cast<Index>(p));

  GeneratedConstraints out;
  std::mt19937_64 rng(seed);
  std::set<std::tuple<Index, Index, ConstraintKind>> seen;
  auto pick = [&rng](const std::vector<Index>& from) {
    return from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
  };
  int dropped = 0;

  for (const auto& [label, inside] : members) {
    if (inside.size() < 2) {
      out.warnings.push_back("class " + std::to_string(label) + " has fewer than 2 members; no similar pairs");
    } else {
      for (int t = 0; t < per_class; ++t) {
        auto c = detail::draw_unique(
            [&] {
              Index a = pick(inside), b = pick(inside);
              while (b == a) b = pick(inside);
              return Constraint{a, b, ConstraintKind::similar};
            },
            seen);
        if (c) out.constraints.push_back(*c); else ++dropped;
      }
    }

    std::vector<Index> outside;
    for (const auto& [other, idx] : members)
      if (other != label) outside.insert(outside.end(), idx.begin(), idx.end());
    if (outside.empty()) {
      out.warnings.push_back("single class; no dissimilar pairs");
      continue;
    }
    for (int t = 0; t < per_class; ++t) {
      auto c = detail::draw_unique([&] { return Constraint{pick(inside), pick(outside), ConstraintKind::dissimilar}; },
                                   seen);
      if (c) out.constraints.push_back(*c); else ++dropped;
    }
  }
  if (dropped > 0) {
    out.warnings.push_back(std::to_string(dropped) + " draws were dropped as duplicates after 10 retries");
  }
  return out;
}

/// `count` uniformly random pairs of distinct points, labelled similar when
/// both points share a class and dissimilar otherwise.
inline GeneratedConstraints generate_random_pairs(std::span<const int> labels, int count, std::uint64_t seed) {
  if (labels.size() < 2) throw InvalidArgument("need at least 2 points to draw pairs");
  if (count <= 0) throw InvalidArgument("count must be positive");
  GeneratedConstraints out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> any(0, static_cast<Index>(labels.size()) - 1);
  std::set<std::tuple<Index, Index, ConstraintKind>> seen;
  int dropped = 0;
  for (int t = 0; t < count; ++t) {
    auto c = detail::draw_unique(
        [&] {
          Index a = any(rng), b = any(rng);
          while (b == a) b = any(rng);
          return Constraint{a, b, labels[a] == labels[b] ? ConstraintKind::similar : ConstraintKind::dissimilar};
        },
        seen);
    if (c) out.constraints.push_back(*c); else ++dropped;
  }
  if (dropped > 0) {
    out.warnings.push_back(std::to_string(dropped) + " draws were dropped as duplicates after 10 retries");
  }
  return out;
}

/// u = 1st percentile and l = 99th percentile of baseline distances.
inline Thresholds compute_thresholds(std::span<const double> distances) {
  if (distances.empty()) throw InvalidArgument("compute_thresholds: no distances");
  double smallest_positive = kInfinity;
  for (double d : distances) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidArgument("compute_thresholds: distances must be finite and >= 0");
    if (d > 0.0) smallest_positive = std::min(smallest_positive, d);
  }
  if (smallest_positive == kInfinity) throw InvalidArgument("compute_thresholds: all distances are zero");
  Thresholds t{percentile(distances, 1.0), percentile(distances, 99.0)};
  if (t.upper <= 0.0) t.upper = smallest_positive * 1e-3;
  // A pool that is mostly zeros can leave the 99th percentile at 0.
  t.lower = std::max(t.lower, t.upper);
  return t;
}

/// Pool of baseline distances used for thresholds: every pair when n <= 2000,
/// otherwise 2e5 pairs sampled uniformly with replacement.
template <typename Distance>
std::vector<double> baseline_distance_pool(Index n, Distance&& distance, std::uint64_t seed) {
  std::vector<double> pool;
  if (n < 2) return pool;
  if (n <= 2000) {
    pool.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) pool.push_back(distance(i, j));
    return pool;
  }
  constexpr std::size_t kSamples = 200000;
  pool.reserve(kSamples);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> any(0, n - 1);
  while (pool.size() < kSamples) {
    Index i = any(rng), j = any(rng);
    if (i != j) pool.push_back(distance(i, j));
  }
  return pool;
}

}  // namespace ldml

#endif  // LDML_CONSTRAINTS_HPP
