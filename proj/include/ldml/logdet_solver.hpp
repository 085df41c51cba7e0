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

// LogDet metric / kernel learning by cyclic Bregman projections with slack.
//
// Each constraint (i, j) is visited in turn and the current matrix A (the
// n x n kernel K, or the d x d Mahalanobis matrix W) is projected onto it
// with the closed-form rank-one update
//
//   p     = v^T A v
//   alpha = min(lambda, delta * gamma / (gamma + 1) * (1/p - 1/xi))
//   beta  = delta * alpha / (1 - delta * alpha * p)
//   xi    = gamma * xi / (gamma + delta * alpha * xi)
//   lambda -= alpha
//   A    += beta * (A v)(A v)^T
//
// where v = e_i - e_j in kernel space and v = x_i - x_j in input space,
// delta = +1 for similar pairs and -1 for dissimilar ones. The update keeps A
// positive definite and lambda >= 0.

#ifndef LDML_LOGDET_SOLVER_HPP
#define LDML_LOGDET_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ldml/constraints.hpp"
#include "ldml/error.hpp"
#include "ldml/linalg.hpp"

namespace ldml {

struct SolverConfig {
  double gamma = 1.0;  // slack tradeoff; +infinity disables slack
  int max_sweeps = 0;  // 0 selects ceil(1e5 / #constraints), at least 50
  double tol = 1e-3;
  std::uint64_t seed = 0;

  int sweep_limit(std::size_t num_constraints) const {
    if (max_sweeps > 0) return max_sweeps;
    if (num_constraints == 0) return 50;
    const auto m = static_cast<long long>(num_constraints);
    return static_cast<int>(std::max<long long>(50, (100000 + m - 1) / m));
  }

  void validate() const {
    if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive (or +infinity)");
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (max_sweeps < 0) throw InvalidArgument("max_sweeps must be positive");
  }
};

/// Per-constraint dual variables lambda_ij and slack targets xi_ij.
struct DualState {
  std::vector<double> lambda;
  std::vector<double> xi;

  friend bool operator==(const DualState&, const DualState&) = default;
};

/// True iff max_k |Δλ_k| / (1 + |λ_k|) <= tol between two aligned states.
inline bool converged(const DualState& before, const DualState& after, double tol) {
  if (before.lambda.size() != after.lambda.size()) {
    throw InvalidArgument("converged: dual states are not aligned");
  }
  for (std::size_t k = 0; k < after.lambda.size(); ++k) {
    const double change = std::abs(after.lambda[k] - before.lambda[k]) / (1.0 + std::abs(after.lambda[k]));
    if (!(change <= tol)) return false;
  }
  return true;
}

/// What a single projection did.
struct ProjectionOutcome {
  double alpha = 0.0;
  double beta = 0.0;
  bool clipped = false;  // alpha was limited by lambda
  bool skipped = false;  // p fell below p_min
};

/// Scalar part of the projection: computes alpha, beta and updates lambda, xi.
/// `p` is the current constraint distance.
inline ProjectionOutcome projection_coefficients(double p, ConstraintKind kind, double& lambda, double& xi,
                                                 double gamma) {
  const double delta = kind == ConstraintKind::similar ? 1.0 : -1.0;
  const bool no_slack = std::isinf(gamma);
  const double step = no_slack ? delta * (1.0 / p - 1.0 / xi) : delta * gamma / (gamma + 1.0) * (1.0 / p - 1.0 / xi);

  ProjectionOutcome out;
  out.clipped = lambda < step;
  out.alpha = std::min(lambda, step);
  const double denom = 1.0 - delta * out.alpha * p;
  if (std::abs(denom) < 1e-12) {
    throw NumericalFailure("projection denominator vanished (1 - delta*alpha*p = " + std::to_string(denom) + ")");
  }
  out.beta = delta * out.alpha / denom;
  if (!no_slack) xi = gamma * xi / (gamma + delta * out.alpha * xi);
  lambda -= out.alpha;
  return out;
}

/// Projects the kernel matrix K onto constraint c (K, lambda, xi updated in place).
inline ProjectionOutcome project_constraint_kernel(SymMatrix& k, const Constraint& c, double& lambda, double& xi,
                                                   double gamma) {
  const Vector kv = k.matrix().col(c.i) - k.matrix().col(c.j);
  const double p = kv(c.i) - kv(c.j);
  const double p_min = 1e-12 * k.trace() / static_cast<double>(k.dim());
  if (!(p > p_min)) return {.skipped = true};
  const ProjectionOutcome out = projection_coefficients(p, c.kind, lambda, xi, gamma);
  if (out.beta != 0.0) k.rank_one_update(out.beta, kv);
  return out;
}

/// Projects the Mahalanobis matrix W onto constraint c with v = x_i - x_j.
inline ProjectionOutcome project_constraint_linear(SymMatrix& w, const DataMatrix& x, const Constraint& c,
                                                   double& lambda, double& xi, double gamma) {
  const Vector v = x.point(c.i) - x.point(c.j);
  const Vector wv = w.matrix() * v;
  const double p = v.dot(wv);
  const double p_min = 1e-12 * w.trace() / static_cast<double>(w.dim()) * v.squaredNorm();
  if (!(p > p_min)) return {.skipped = true};
  const ProjectionOutcome out = projection_coefficients(p, c.kind, lambda, xi, gamma);
  if (out.beta != 0.0) w.rank_one_update(out.beta, wv);
  return out;
}

/// Bookkeeping shared by the kernel and linear fits.
struct FitReport {
  bool converged = false;
  int sweeps_used = 0;
  std::size_t skipped_projections = 0;
  double max_violation = 0.0;  // largest gap to the slack targets xi
  std::vector<std::string> warnings;
};

struct KernelModel {
  SymMatrix k;
  SymMatrix k0;
  DualState dual;
  FitReport report;
};

struct LinearModel {
  SymMatrix w;
  SymMatrix w0;
  DualState dual;
  FitReport report;

  /// (x - y)^T W (x - y).
  template <typename A, typename B>
  double distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
    const Vector v = x - y;
    return v.dot(w.matrix() * v);
  }
};

namespace detail {

inline DualState initial_dual(const ConstraintSet& cs) {
  DualState d;
  d.lambda.assign(cs.size(), 0.0);
  d.xi.resize(cs.size());
  for (std::size_t k = 0; k < cs.size(); ++k) d.xi[k] = cs.bound(k);
  return d;
}

inline std::vector<std::size_t> sweep_order(std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

inline double violation(ConstraintKind kind, double distance, double target) {
  return kind == ConstraintKind::similar ? std::max(0.0, distance - target) : std::max(0.0, target - distance);
}

/// Runs cyclic sweeps. `project(k)` projects constraint k and returns its outcome.
template <typename Project>
void run_sweeps(const ConstraintSet& cs, const SolverConfig& cfg, DualState& dual, const SymMatrix& a,
                FitReport& report, Project&& project) {
  const auto order = sweep_order(cs.size(), cfg.seed);
  const int limit = cfg.sweep_limit(cs.size());
  std::set<std::size_t> flagged;
  for (int sweep = 1; sweep <= limit; ++sweep) {
    const DualState before = dual;
    for (std::size_t k : order) {
      ProjectionOutcome out;
      try {
        out = project(k);
      } catch (const NumericalFailure& e) {
        throw NumericalFailure(std::string(e.what()) + " at constraint " + std::to_string(k) + " (" +
                               std::to_string(cs[k].i) + ", " + std::to_string(cs[k].j) + ")");
      }
      if (out.skipped) {
        ++report.skipped_projections;
        if (cs[k].kind == ConstraintKind::dissimilar && flagged.insert(k).second) {
          report.warnings.push_back("dissimilar constraint " + std::to_string(k) + " (" + std::to_string(cs[k].i) +
                                    ", " + std::to_string(cs[k].j) + ") joins coincident points; infeasible pair");
        }
      } else if (!std::isfinite(out.beta)) {
        throw NumericalFailure("non-finite projection at constraint " + std::to_string(k));
      }
    }
    if (!a.all_finite()) throw NumericalFailure("non-finite matrix entries after sweep " + std::to_string(sweep));
    report.sweeps_used = sweep;
    if (converged(before, dual, cfg.tol)) {
      report.converged = true;
      break;
    }
  }
}

}  // namespace detail

/// Learns K minimizing D_ld(K, K0) + gamma * D_ld(diag(xi), diag(xi0)) subject
/// to the pair constraints, starting from K = K0, lambda = 0, xi = bounds.
inline KernelModel fit_kernel(const SymMatrix& k0, const ConstraintSet& cs, const SolverConfig& cfg) {
  cfg.validate();
  if (k0.empty()) throw InvalidArgument("fit_kernel: empty kernel matrix");
  if (cs.empty()) throw InvalidArgument("fit_kernel: no constraints");
  cs.require_indices_below(k0.dim());
  if (!k0.all_finite()) throw NumericalFailure("fit_kernel: input kernel has non-finite entries");
  if (!is_psd(k0)) throw InvalidArgument("fit_kernel: input kernel is not positive semidefinite");

  KernelModel model{k0, k0, detail::initial_dual(cs), {}};
  detail::run_sweeps(cs, cfg, model.dual, model.k, model.report, [&](std::size_t idx) {
    return project_constraint_kernel(model.k, cs[idx], model.dual.lambda[idx], model.dual.xi[idx], cfg.gamma);
  });
  for (std::size_t idx = 0; idx < cs.size(); ++idx) {
    const double d = pair_distance_kernel(model.k, cs[idx].i, cs[idx].j);
    model.report.max_violation =
        std::max(model.report.max_violation, detail::violation(cs[idx].kind, d, model.dual.xi[idx]));
  }
  return model;
}

/// Input-space learning regularized towards an arbitrary positive definite
/// prior W0: the same projections run on the d x d matrix starting at W0.
inline LinearModel fit_linear_with_prior(const DataMatrix& x, const SymMatrix& w0, const ConstraintSet& cs,
                                         const SolverConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw InvalidArgument("fit_linear: empty data");
  if (cs.empty()) throw InvalidArgument("fit_linear: no constraints");
  if (w0.dim() != x.dim()) throw InvalidArgument("fit_linear: prior dimension does not match the data");
  cs.require_indices_below(x.size());
  if (!x.matrix().allFinite()) throw NumericalFailure("fit_linear: data has non-finite entries");
  if (Eigen::LLT<Matrix>(w0.matrix()).info() != Eigen::Success || min_eigenvalue(w0) <= 0.0) {
    throw InvalidArgument("fit_linear: prior W0 is not positive definite");
  }

  LinearModel model{w0, w0, detail::initial_dual(cs), {}};
  detail::run_sweeps(cs, cfg, model.dual, model.w, model.report, [&](std::size_t idx) {
    return project_constraint_linear(model.w, x, cs[idx], model.dual.lambda[idx], model.dual.xi[idx], cfg.gamma);
  });
  for (std::size_t idx = 0; idx < cs.size(); ++idx) {
    const double d = model.distance(x.point(cs[idx].i), x.point(cs[idx].j));
    model.report.max_violation =
        std::max(model.report.max_violation, detail::violation(cs[idx].kind, d, model.dual.xi[idx]));
  }
  return model;
}

/// Input-space learning with the Euclidean prior W0 = I.
inline LinearModel fit_linear(const DataMatrix& x, const ConstraintSet& cs, const SolverConfig& cfg) {
  if (x.empty()) throw InvalidArgument("fit_linear: empty data");
  return fit_linear_with_prior(x, SymMatrix::identity(x.dim()), cs, cfg);
}

}  // namespace ldml

#endif  // LDML_LOGDET_SOLVER_HPP
