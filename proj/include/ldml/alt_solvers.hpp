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

// Kernelized solvers for two other spectral losses under general linear
// constraints tr(C_i K) <= b_i.
//
// von Neumann: minimize the dual F(lambda) = tr(exp(-C(lambda) K0)) + b(lambda)
// over lambda >= 0, C(lambda) = sum_i lambda_i C_i. With R = K0^{1/2} and
// B = R C(lambda) R the trace equals tr(exp(-B)), and the learned kernel is
// K = R exp(-B) R, so dF/dlambda_i = b_i - tr(C_i K).
//
// Frobenius: minimize tr(K0 S K0 S) subject to tr(eta C_i K0 + C_i K0 S K0) <= b_i
// and S >= -eta K0^{-1}. Writing T = R S R turns this into the Euclidean
// projection of 0 onto {<A_i, T> <= b_i - eta tr(C_i K0)} and {T >= -eta I},
// A_i = R C_i R, which Dykstra's alternating projections solve exactly.

#ifndef LDML_ALT_SOLVERS_HPP
#define LDML_ALT_SOLVERS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ldml/constraints.hpp"
#include "ldml/error.hpp"
#include "ldml/linalg.hpp"

namespace ldml {

/// tr(C K) <= b.
struct LinearConstraintGeneral {
  SymMatrix c;
  double b = 0.0;
};

/// Pair constraints as general ones: d(i,j) <= u becomes tr(v v^T K) <= u and
/// d(i,j) >= l becomes tr(-v v^T K) <= -l, with v = e_i - e_j.
inline std::vector<LinearConstraintGeneral> to_general(const ConstraintSet& cs, Index n) {
  cs.require_indices_below(n);
  std::vector<LinearConstraintGeneral> out;
  out.reserve(cs.size());
  for (std::size_t k = 0; k < cs.size(); ++k) {
    Vector v = Vector::Zero(n);
    v(cs[k].i) = 1.0;
    v(cs[k].j) = -1.0;
    const double sign = cs[k].kind == ConstraintKind::similar ? 1.0 : -1.0;
    out.push_back({SymMatrix(sign * v * v.transpose()), sign * cs.bound(k)});
  }
  return out;
}

namespace detail {

struct KernelRoot {
  SymMatrix root;      // K0^{1/2}
  SymMatrix inv_root;  // K0^{-1/2}
};

inline KernelRoot kernel_root(const SymMatrix& k0, const char* who) {
  const Eigensystem es = eigensystem(k0);
  if (!(es.values(0) > detail::spectral_floor(es.values))) {
    throw InvalidArgument(std::string(who) + ": K0 must be positive definite");
  }
  return {spectral_function(es, [](double x) { return std::sqrt(x); }),
          spectral_function(es, [](double x) { return 1.0 / std::sqrt(x); })};
}

inline void check_general(const SymMatrix& k0, std::span<const LinearConstraintGeneral> cons) {
  for (const auto& c : cons) {
    if (c.c.dim() != k0.dim()) throw InvalidArgument("constraint matrix dimension does not match K0");
    if (!std::isfinite(c.b)) throw InvalidArgument("constraint bound must be finite");
  }
}

inline Matrix weighted_sum(std::span<const LinearConstraintGeneral> cons, std::span<const double> lambda, Index n) {
  Matrix c = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < cons.size(); ++i)
    if (lambda[i] != 0.0) c += lambda[i] * cons[i].c.matrix();
  return c;
}

/// exp(-B) and its trace for B = R C(lambda) R.
struct VnPoint {
  double objective = 0.0;
  SymMatrix exp_neg_b;
};

inline VnPoint vn_point(const SymMatrix& root, std::span<const LinearConstraintGeneral> cons,
                        std::span<const double> lambda) {
  const Index n = root.dim();
  const SymMatrix b(root.matrix() * weighted_sum(cons, lambda, n) * root.matrix());
  const Eigensystem es = eigensystem(b);
  VnPoint out;
  out.exp_neg_b = spectral_function(es, [](double x) { return std::exp(-x); });
  out.objective = es.values.unaryExpr([](double x) { return std::exp(-x); }).sum();
  for (std::size_t i = 0; i < cons.size(); ++i) out.objective += lambda[i] * cons[i].b;
  return out;
}

inline void check_lambda(std::span<const LinearConstraintGeneral> cons, std::span<const double> lambda) {
  if (lambda.size() != cons.size()) throw InvalidArgument("dual vector length does not match the constraints");
}

}  // namespace detail

/// F(lambda) = tr(exp(-C(lambda) K0)) + b(lambda).
inline double vn_dual_objective(const SymMatrix& k0, std::span<const LinearConstraintGeneral> cons,
                                std::span<const double> lambda) {
  detail::check_general(k0, cons);
  detail::check_lambda(cons, lambda);
  const SymMatrix root = spectral_function(k0, [](double x) { return std::sqrt(std::max(0.0, x)); });
  return detail::vn_point(root, cons, lambda).objective;
}

/// dF/dlambda_i = -tr(exp(-B) R C_i R) + b_i.
inline Vector vn_dual_gradient(const SymMatrix& k0, std::span<const LinearConstraintGeneral> cons,
                               std::span<const double> lambda) {
  detail::check_general(k0, cons);
  detail::check_lambda(cons, lambda);
  const SymMatrix root = spectral_function(k0, [](double x) { return std::sqrt(std::max(0.0, x)); });
  const SymMatrix e = detail::vn_point(root, cons, lambda).exp_neg_b;
  const Matrix k = root.matrix() * e.matrix() * root.matrix();
  Vector g(static_cast<Index>(cons.size()));
  for (std::size_t i = 0; i < cons.size(); ++i) {
    g(static_cast<Index>(i)) = cons[i].b - cons[i].c.matrix().cwiseProduct(k).sum();
  }
  return g;
}

struct VnConfig {
  int max_iterations = 1000;
  double tol = 1e-8;        // on the projected gradient, max norm
  double initial_step = 1.0;
};

struct VnResult {
  std::vector<double> lambda;
  SymMatrix k;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after every accepted step
  std::vector<std::string> warnings;
};

/// Projected gradient descent on the dual with a halving line search.
inline VnResult fit_vn_kernel(const SymMatrix& k0, std::span<const LinearConstraintGeneral> cons,
                              const VnConfig& cfg = {}) {
  if (cfg.max_iterations < 1 || !(cfg.tol > 0.0) || !(cfg.initial_step > 0.0)) {
    throw InvalidArgument("fit_vn_kernel: bad configuration");
  }
  detail::check_general(k0, cons);
  const detail::KernelRoot r = detail::kernel_root(k0, "fit_vn_kernel");
  const auto m = cons.size();

  VnResult out;
  out.lambda.assign(m, 0.0);
  detail::VnPoint here = detail::vn_point(r.root, cons, out.lambda);
  out.trace.push_back(here.objective);
  auto gradient = [&](const detail::VnPoint& at) {
    const Matrix k = r.root.matrix() * at.exp_neg_b.matrix() * r.root.matrix();
    std::vector<double> g(m);
    for (std::size_t i = 0; i < m; ++i) g[i] = cons[i].b - cons[i].c.matrix().cwiseProduct(k).sum();
    return g;
  };

  double step = cfg.initial_step;
  for (int iter = 1; iter <= cfg.max_iterations && m > 0; ++iter) {
    const std::vector<double> g = gradient(here);
    double pg = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      pg = std::max(pg, std::abs(out.lambda[i] - std::max(0.0, out.lambda[i] - g[i])));
    if (pg <= cfg.tol) {
      out.converged = true;
      break;
    }
    out.iterations = iter;
    std::vector<double> trial(m);
    detail::VnPoint next;
    bool accepted = false;
    for (step = std::min(cfg.initial_step, 2.0 * step); step > 1e-30; step *= 0.5) {
      for (std::size_t i = 0; i < m; ++i) trial[i] = std::max(0.0, out.lambda[i] - step * g[i]);
      next = detail::vn_point(r.root, cons, trial);
      if (!std::isfinite(next.objective)) continue;
      if (next.objective < here.objective) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.warnings.push_back("line search found no decrease at iteration " + std::to_string(iter) +
                             "; stopping at a numerically stationary point");
      break;
    }
    out.lambda = trial;
    here = std::move(next);
    out.trace.push_back(here.objective);
  }
  if (m == 0) out.converged = true;
  out.objective = here.objective;
  out.k = SymMatrix(r.root.matrix() * here.exp_neg_b.matrix() * r.root.matrix());
  return out;
}

// ---------------------------------------------------------------------------
// Frobenius.

/// Projects S onto {S >= -eta K0^{-1}} by clamping the eigenvalues of
/// K0^{1/2} S K0^{1/2} + eta I at zero. Feasible inputs are returned unchanged.
inline SymMatrix project_frob_psd(const SymMatrix& s, const SymMatrix& k0, double eta) {
  if (s.dim() != k0.dim()) throw InvalidArgument("project_frob_psd: dimension mismatch");
  if (!(eta >= 0.0)) throw InvalidArgument("project_frob_psd: eta must be nonnegative");
  const detail::KernelRoot r = detail::kernel_root(k0, "project_frob_psd");
  const Eigensystem es = eigensystem(SymMatrix(r.root.matrix() * s.matrix() * r.root.matrix()));
  if (es.values(0) >= -eta) return s;
  const SymMatrix t = spectral_function(es, [eta](double x) { return std::max(x, -eta); });
  return SymMatrix(r.inv_root.matrix() * t.matrix() * r.inv_root.matrix());
}

struct FrobConfig {
  double eta = 1.0;
  int max_rounds = 100000;
  double tol = 1e-10;       // relative change of T between rounds
  double feas_tol = 1e-9;   // constraint violation, relative to max(1, |rhs|)
  int stall_rounds = 1000;  // rounds without violation progress before giving up
};

enum class FrobStatus { converged, max_rounds, infeasible };

struct FrobResult {
  SymMatrix s;
  SymMatrix k;              // eta K0 + K0 S K0
  double objective = 0.0;   // tr(K0 S K0 S)
  double max_violation = 0.0;
  int rounds = 0;
  FrobStatus status = FrobStatus::converged;
};

inline FrobResult fit_frob_kernel(const SymMatrix& k0, std::span<const LinearConstraintGeneral> cons,
                                  const FrobConfig& cfg = {}) {
  if (!(cfg.eta >= 0.0)) throw InvalidArgument("fit_frob_kernel: eta must be nonnegative");
  if (cfg.max_rounds < 1 || cfg.stall_rounds < 1) throw InvalidArgument("fit_frob_kernel: bad round limits");
  detail::check_general(k0, cons);
  const detail::KernelRoot r = detail::kernel_root(k0, "fit_frob_kernel");
  const Index n = k0.dim();
  const auto m = cons.size();

  std::vector<Matrix> a(m);
  std::vector<double> rhs(m), a_norm2(m);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = r.root.matrix() * cons[i].c.matrix() * r.root.matrix();
    a[i] = 0.5 * (a[i] + a[i].transpose()).eval();
    rhs[i] = cons[i].b - cfg.eta * cons[i].c.matrix().cwiseProduct(k0.matrix()).sum();
    a_norm2[i] = a[i].squaredNorm();
    if (a_norm2[i] == 0.0 && rhs[i] < 0.0) {
      FrobResult bad{SymMatrix::zero(n), SymMatrix(cfg.eta * k0.matrix()), 0.0, -rhs[i], 0, FrobStatus::infeasible};
      return bad;
    }
  }

  auto linear_violation = [&](const Matrix& t) {
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      v = std::max(v, (a[i].cwiseProduct(t).sum() - rhs[i]) / std::max(1.0, std::abs(rhs[i])));
    }
    return v;
  };
  auto violation = [&](const Matrix& t) {
    return std::max({0.0, linear_violation(t), -cfg.eta - min_eigenvalue(SymMatrix(t))});
  };

  FrobResult out;
  Matrix t = Matrix::Zero(n, n);
  if (m > 0 && violation(t) > cfg.feas_tol) {
    std::vector<Matrix> inc(m + 1, Matrix::Zero(n, n));
    double best = kInfinity;
    int since_best = 0;
    out.status = FrobStatus::max_rounds;
    for (int round = 1; round <= cfg.max_rounds; ++round) {
      const Matrix before = t;
      for (std::size_t i = 0; i < m; ++i) {
        const Matrix y = t + inc[i];
        const double excess = a[i].cwiseProduct(y).sum() - rhs[i];
        t = excess > 0.0 ? Matrix(y - (excess / a_norm2[i]) * a[i]) : y;
        inc[i] = y - t;
      }
      {
        const Matrix y = t + inc[m];
        t = spectral_function(SymMatrix(y), [&](double x) { return std::max(x, -cfg.eta); }).matrix();
        inc[m] = y - t;
      }
      out.rounds = round;
      // t was just clamped into the spectral set, so only the half-spaces can be violated.
      const double viol = std::max(0.0, linear_violation(t));
      const double change = (t - before).norm() / std::max(1.0, t.norm());
      if (viol <= cfg.feas_tol && change <= cfg.tol) {
        out.status = FrobStatus::converged;
        break;
      }
      if (viol < best * (1.0 - 1e-6)) {
        best = viol;
        since_best = 0;
      } else if (viol > cfg.feas_tol && ++since_best >= cfg.stall_rounds) {
        out.status = FrobStatus::infeasible;
        break;
      }
    }
  }
  out.s = SymMatrix(r.inv_root.matrix() * t * r.inv_root.matrix());
  out.k = SymMatrix(cfg.eta * k0.matrix() + r.root.matrix() * t * r.root.matrix());
  out.objective = t.squaredNorm();
  out.max_violation = violation(t);
  return out;
}

inline const char* to_string(FrobStatus s) {
  switch (s) {
    case FrobStatus::converged:
      return "converged";
    case FrobStatus::max_rounds:
      return "max_rounds";
    case FrobStatus::infeasible:
      return "infeasible";
  }
  return "unknown";
}

}  // namespace ldml

#endif  // LDML_ALT_SOLVERS_HPP
