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

// Training pipeline and evaluation protocols: constraint generation and
// thresholds on a training fold, metric fitting for every loss / space /
// basis combination, k-NN two-fold cross validation with gamma selection, and
// semi-supervised k-means clustering error.

#ifndef LDML_EVALUATION_HPP
#define LDML_EVALUATION_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ldml/alt_solvers.hpp"
#include "ldml/constraints.hpp"
#include "ldml/error.hpp"
#include "ldml/iplr.hpp"
#include "ldml/kmeans.hpp"
#include "ldml/linalg.hpp"
#include "ldml/logdet_solver.hpp"
#include "ldml/oracle.hpp"
#include "ldml/out_of_sample.hpp"

namespace ldml {

enum class Loss { logdet, vonneumann, frobenius };
enum class Space { automatic, linear, kernel };

inline const char* to_string(Loss l) {
  switch (l) {
    case Loss::logdet:
      return "logdet";
    case Loss::vonneumann:
      return "vonneumann";
    case Loss::frobenius:
      return "frobenius";
  }
  return "unknown";
}

inline const char* to_string(Space s) {
  switch (s) {
    case Space::automatic:
      return "auto";
    case Space::linear:
      return "linear";
    case Space::kernel:
      return "kernel";
  }
  return "unknown";
}

struct BasisChoice {
  enum class Kind { none, topk, classmeans, random, subset, kmeans };
  Kind kind = Kind::none;
  int k = 0;
};

inline const char* to_string(BasisChoice::Kind k) {
  switch (k) {
    case BasisChoice::Kind::none:
      return "none";
    case BasisChoice::Kind::topk:
      return "topk";
    case BasisChoice::Kind::classmeans:
      return "classmeans";
    case BasisChoice::Kind::random:
      return "random";
    case BasisChoice::Kind::subset:
      return "subset";
    case BasisChoice::Kind::kmeans:
      return "kmeans";
  }
  return "unknown";
}

/// How training constraints are drawn from the labels of a fold.
struct ConstraintProtocol {
  enum class Kind { per_class, random_pairs };
  Kind kind = Kind::per_class;
  int count = 100;  // pairs per class and kind, or total random pairs
};

inline const std::vector<double>& default_gamma_grid() {
  static const std::vector<double> grid{0.01, 0.1, 1.0, 10.0, 100.0, 1000.0};
  return grid;
}

struct PipelineConfig {
  Loss loss = Loss::logdet;
  Space space = Space::automatic;
  KernelSpec::Kind kernel = KernelSpec::Kind::linear;
  std::optional<double> sigma;   // gaussian bandwidth; median heuristic when empty
  std::optional<double> gamma;   // cross-validated over gamma_grid when empty
  std::vector<double> gamma_grid = default_gamma_grid();
  ConstraintProtocol constraints;
  BasisChoice basis;
  double tol = 1e-3;
  int max_sweeps = 0;
  double eta = 1.0;  // Frobenius shift
  int knn_k = 10;
  std::uint64_t seed = 0;
};

/// Everything a training run decided, for logs and model files.
struct TrainSummary {
  Space space = Space::linear;
  KernelSpec kernel;
  double gamma = 1.0;
  bool gamma_cross_validated = false;
  Thresholds thresholds;
  ConstraintSet constraints;
  DualState dual;
  bool converged = false;
  int sweeps = 0;
  double max_violation = 0.0;
  Index basis_k = 0;
  double jitter_used = 0.0;
  std::vector<std::string> warnings;
};

struct TrainedMetric {
  DistanceOracle oracle = DistanceOracle::euclidean();
  TrainSummary summary;
};

/// Median pairwise Euclidean distance (not squared) between the given points.
inline double median_pairwise_distance(const DataMatrix& x, std::uint64_t seed) {
  auto pool = baseline_distance_pool(
      x.size(), [&](Index i, Index j) { return std::sqrt(squared_distance(x.point(i), x.point(j))); }, seed);
  if (pool.empty()) throw InvalidArgument("median heuristic needs at least two points");
  const double med = percentile(pool, 50.0);
  if (!(med > 0.0)) throw InvalidArgument("median heuristic: all training points coincide");
  return med;
}

/// (sample covariance + jitter)^-1.
inline SymMatrix inverse_covariance_baseline(const DataMatrix& x) {
  if (x.size() < 2) throw InvalidArgument("inverse covariance needs at least two points");
  const Vector mean = x.matrix().rowwise().mean();
  const Matrix centered = x.matrix().colwise() - mean;
  const SymMatrix cov(centered * centered.transpose() / static_cast<double>(x.size() - 1));
  return SymMatrix(JitteredCholesky(cov).inverse());
}

inline Space resolve_space(const Dataset& data, const PipelineConfig& cfg) {
  if (!data.has_features()) {
    if (cfg.space == Space::linear) throw InvalidArgument("a precomputed kernel cannot be used in linear space");
    return Space::kernel;
  }
  if (cfg.space != Space::automatic) return cfg.space;
  return data.x->dim() <= data.x->size() ? Space::linear : Space::kernel;
}

namespace detail {

inline ConstraintSet draw_constraints(std::span<const int> labels, const ConstraintProtocol& protocol,
                                      std::uint64_t seed, const std::function<double(Index, Index)>& baseline,
                                      std::vector<std::string>& warnings) {
  GeneratedConstraints gen = protocol.kind == ConstraintProtocol::Kind::per_class
                                 ? generate_from_labels(labels, protocol.count, seed)
                                 : generate_random_pairs(labels, protocol.count, seed);
  warnings.insert(warnings.end(), gen.warnings.begin(), gen.warnings.end());
  if (gen.constraints.empty()) throw InvalidArgument("no constraints could be generated from the labels");
  const auto pool = baseline_distance_pool(static_cast<Index>(labels.size()), baseline, seed);
  return ConstraintSet(std::move(gen.constraints), compute_thresholds(pool));
}

inline SolverConfig solver_config(const PipelineConfig& cfg, double gamma) {
  SolverConfig s;
  s.gamma = gamma;
  s.max_sweeps = cfg.max_sweeps;
  s.tol = cfg.tol;
  s.seed = cfg.seed;
  return s;
}

inline void absorb(TrainSummary& s, const FitReport& r) {
  s.converged = r.converged;
  s.sweeps = r.sweeps_used;
  s.max_violation = r.max_violation;
  s.warnings.insert(s.warnings.end(), r.warnings.begin(), r.warnings.end());
}

/// Pair constraints on explicit points as general d x d constraints:
/// tr(W (+-v v^T)) <= +-b with v = x_i - x_j.
inline std::vector<LinearConstraintGeneral> input_space_general(const DataMatrix& x, const ConstraintSet& cs) {
  std::vector<LinearConstraintGeneral> out;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const Vector v = x.point(cs[k].i) - x.point(cs[k].j);
    const double sign = cs[k].kind == ConstraintKind::similar ? 1.0 : -1.0;
    out.push_back({SymMatrix(sign * v * v.transpose()), sign * cs.bound(k)});
  }
  return out;
}

}  // namespace detail

/// Fits one metric on the training points `train` (dataset indices) with a
/// fixed gamma.
inline TrainedMetric train_metric_fixed_gamma(const Dataset& data, std::span<const Index> train,
                                              const PipelineConfig& cfg, double gamma) {
  data.validate();
  if (train.size() < 2) throw InvalidArgument("training needs at least two points");
  TrainedMetric out;
  TrainSummary& s = out.summary;
  s.space = resolve_space(data, cfg);
  s.gamma = gamma;
  const std::vector<int> labels = data.labels_of(train);
  const std::vector<Index> train_vec(train.begin(), train.end());

  std::optional<DataMatrix> x;
  if (data.has_features()) x = data.points(train);

  // Input kernel.
  if (!data.has_features()) {
    s.kernel = KernelSpec::precomputed();
  } else if (s.space == Space::linear) {
    s.kernel = KernelSpec::linear();
  } else if (cfg.kernel == KernelSpec::Kind::gaussian) {
    s.kernel = KernelSpec::gaussian(cfg.sigma ? *cfg.sigma : median_pairwise_distance(*x, cfg.seed));
  } else if (cfg.kernel == KernelSpec::Kind::precomputed) {
    throw InvalidArgument("--kernel precomputed requires a kernel data file");
  } else {
    s.kernel = KernelSpec::linear();
  }

  std::optional<SymMatrix> k0;
  if (s.space == Space::kernel) k0 = SymMatrix(kernel_block(data, s.kernel, train, train));

  std::function<double(Index, Index)> baseline;
  if (s.space == Space::kernel) {
    baseline = [&](Index i, Index j) { return pair_distance_kernel(*k0, i, j); };
  } else {
    baseline = [&](Index i, Index j) { return squared_distance(x->point(i), x->point(j)); };
  }
  s.constraints = detail::draw_constraints(labels, cfg.constraints, cfg.seed, baseline, s.warnings);
  s.thresholds = s.constraints.thresholds();
  const SolverConfig solver = detail::solver_config(cfg, gamma);
  const BasisChoice& basis = cfg.basis;

  if (cfg.loss != Loss::logdet && basis.kind != BasisChoice::Kind::none) {
    throw InvalidArgument("low-rank bases are only available for the logdet loss");
  }

  if (cfg.loss == Loss::logdet && basis.kind == BasisChoice::Kind::none) {
    if (s.space == Space::linear) {
      LinearModel fit = fit_linear(*x, s.constraints, solver);
      detail::absorb(s, fit.report);
      s.dual = std::move(fit.dual);
      out.oracle = DistanceOracle::mahalanobis(std::move(fit.w));
    } else {
      KernelModel fit = fit_kernel(*k0, s.constraints, solver);
      detail::absorb(s, fit.report);
      s.dual = fit.dual;
      auto model = std::make_shared<LearnedKernelModel>(LearnedKernelModel::from_fit(fit, s.kernel, x));
      s.jitter_used = model->jitter_used();
      if (s.jitter_used > 0.0) s.warnings.push_back("K0 was singular; inverted with jitter");
      out.oracle = DistanceOracle::kernel_model(std::move(model), train_vec);
    }
    return out;
  }

  if (cfg.loss == Loss::logdet) {
    const bool feature_basis = basis.kind == BasisChoice::Kind::topk || basis.kind == BasisChoice::Kind::classmeans ||
                               (basis.kind == BasisChoice::Kind::kmeans && s.space == Space::linear);
    if (feature_basis) {
      if (s.space != Space::linear) throw InvalidArgument("topk / classmeans bases need linear space");
      const FeatureBasisMethod method = basis.kind == BasisChoice::Kind::topk         ? FeatureBasisMethod::topk_svd
                                        : basis.kind == BasisChoice::Kind::classmeans ? FeatureBasisMethod::class_means
                                                                                      : FeatureBasisMethod::cluster_means;
      const Basis b = select_basis_feature(*x, method, basis.k, cfg.seed, labels);
      auto model = std::make_shared<IPLRModel>(fit_iplr(*x, b, s.constraints, solver));
      detail::absorb(s, model->report);
      s.dual = model->dual;
      s.basis_k = model->basis.k;
      out.oracle = DistanceOracle::iplr(std::move(model));
    } else {
      if (!k0) k0 = SymMatrix(kernel_block(data, s.kernel, train, train));
      const KernelBasisMethod method = basis.kind == BasisChoice::Kind::random   ? KernelBasisMethod::random_j
                                       : basis.kind == BasisChoice::Kind::subset ? KernelBasisMethod::subset
                                                                                 : KernelBasisMethod::kernel_kmeans;
      const Basis b = select_basis_kernel(*k0, method, basis.k, cfg.seed);
      auto fit = std::make_shared<IPLRModel>(fit_iplr(*k0, b, s.constraints, solver));
      detail::absorb(s, fit->report);
      s.dual = fit->dual;
      s.basis_k = fit->basis.k;
      auto model = std::make_shared<LearnedKernelModel>(reconstruct_kernel(*fit, s.kernel, x));
      s.jitter_used = model->jitter_used();
      out.oracle = DistanceOracle::kernel_model(std::move(model), train_vec, std::move(fit));
    }
    return out;
  }

  // von Neumann and Frobenius: linear space runs the kernelized solver with
  // K0 = I_d on constraints v v^T; kernel space runs it on K0 directly.
  std::vector<LinearConstraintGeneral> general;
  SymMatrix base;
  if (s.space == Space::linear) {
    general = detail::input_space_general(*x, s.constraints);
    base = SymMatrix::identity(x->dim());
  } else {
    general = to_general(s.constraints, k0->dim());
    base = *k0;
  }

  SymMatrix learned;
  std::optional<SymMatrix> frob_s;
  if (cfg.loss == Loss::vonneumann) {
    VnConfig vc;
    if (cfg.max_sweeps > 0) vc.max_iterations = cfg.max_sweeps;
    const VnResult fit = fit_vn_kernel(base, general, vc);
    s.converged = fit.converged;
    s.sweeps = fit.iterations;
    s.dual.lambda = fit.lambda;
    s.warnings.insert(s.warnings.end(), fit.warnings.begin(), fit.warnings.end());
    learned = fit.k;
  } else {
    FrobConfig fc;
    fc.eta = cfg.eta;
    fc.feas_tol = cfg.tol;
    fc.tol = cfg.tol;
    if (cfg.max_sweeps > 0) fc.max_rounds = cfg.max_sweeps;
    const FrobResult fit = fit_frob_kernel(base, general, fc);
    if (fit.status == FrobStatus::infeasible) throw Infeasible("frobenius program is infeasible for these constraints");
    s.converged = fit.status == FrobStatus::converged;
    s.sweeps = fit.rounds;
    s.max_violation = fit.max_violation;
    learned = fit.k;
    frob_s = fit.s;
  }
  auto learned_distance = [&](const Constraint& con) {
    if (s.space != Space::linear) return pair_distance_kernel(learned, con.i, con.j);
    const Vector v = x->point(con.i) - x->point(con.j);
    return v.dot(learned.matrix() * v);
  };
  for (std::size_t c = 0; c < s.constraints.size(); ++c) {
    const Constraint& con = s.constraints[c];
    const double d = learned_distance(con);
    s.max_violation = std::max(s.max_violation, detail::violation(con.kind, d, s.constraints.bound(c)));
  }

  if (s.space == Space::linear) {
    out.oracle = DistanceOracle::mahalanobis(std::move(learned));
  } else {
    std::shared_ptr<LearnedKernelModel> model;
    if (frob_s) {
      model = std::make_shared<LearnedKernelModel>(s.kernel, x, *k0, *frob_s, 0.0, cfg.eta);
    } else {
      KernelModel km{learned, *k0, s.dual, {}};
      model = std::make_shared<LearnedKernelModel>(LearnedKernelModel::from_fit(km, s.kernel, x));
      s.jitter_used = model->jitter_used();
    }
    out.oracle = DistanceOracle::kernel_model(std::move(model), train_vec);
  }
  return out;
}

/// Splits every class into two halves after a seeded shuffle; members are
/// assigned alternately so per-class counts differ by at most one.
inline std::pair<std::vector<Index>, std::vector<Index>> stratified_split(std::span<const Index> points,
                                                                         std::span<const int> labels,
                                                                         std::uint64_t seed) {
  std::map<int, std::vector<Index>> classes;
  for (Index p : points) classes[labels[static_cast<std::size_t>(p)]].push_back(p);
  std::mt19937_64 rng(seed);
  std::pair<std::vector<Index>, std::vector<Index>> out;
  bool to_first = true;
  for (auto& [label, members] : classes) {
    std::shuffle(members.begin(), members.end(), rng);
    for (Index p : members) {
      (to_first ? out.first : out.second).push_back(p);
      to_first = !to_first;
    }
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

namespace detail {

inline void require_two_per_class(const Dataset& data, std::span<const Index> points) {
  std::map<int, int> count;
  for (Index p : points) ++count[data.labels[static_cast<std::size_t>(p)]];
  for (const auto& [label, c] : count) {
    if (c < 2) throw InvalidArgument("class " + std::to_string(label) + " has fewer than 2 members");
  }
}

/// Mean k-NN accuracy of a fixed-gamma pipeline over a two-fold split of `points`.
inline double inner_cv_accuracy(const Dataset& data, std::span<const Index> points, const PipelineConfig& cfg,
                                double gamma, std::uint64_t seed) {
  const auto [a, b] = stratified_split(points, data.labels, seed);
  double total = 0.0;
  for (int fold = 0; fold < 2; ++fold) {
    const auto& tr = fold == 0 ? a : b;
    const auto& te = fold == 0 ? b : a;
    const TrainedMetric m = train_metric_fixed_gamma(data, tr, cfg, gamma);
    const int k = std::min<int>(cfg.knn_k, static_cast<int>(tr.size()));
    total += accuracy(knn_classify(m.oracle, data, tr, te, k), data.labels_of(te));
  }
  return total / 2.0;
}

}  // namespace detail

/// Chooses gamma by two-fold cross validation restricted to `train`. Ties go
/// to the smaller gamma.
inline double crossvalidate_gamma(const Dataset& data, std::span<const Index> train, const PipelineConfig& cfg,
                                  std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("gamma grid is empty");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() == 1) return sorted.front();
  double best_gamma = sorted.front();
  double best_acc = -1.0;
  for (double g : sorted) {
    const double acc = detail::inner_cv_accuracy(data, train, cfg, g, cfg.seed + 1);
    if (acc > best_acc) {
      best_acc = acc;
      best_gamma = g;
    }
  }
  return best_gamma;
}

/// Fits a metric on `train`, cross-validating gamma when the config leaves it open.
inline TrainedMetric train_metric(const Dataset& data, std::span<const Index> train, const PipelineConfig& cfg) {
  if (cfg.gamma) return train_metric_fixed_gamma(data, train, cfg, *cfg.gamma);
  if (cfg.loss != Loss::logdet) {
    TrainedMetric m = train_metric_fixed_gamma(data, train, cfg, 1.0);
    m.summary.warnings.push_back("gamma is not used by the " + std::string(to_string(cfg.loss)) + " loss");
    return m;
  }
  const double g = crossvalidate_gamma(data, train, cfg, cfg.gamma_grid);
  TrainedMetric m = train_metric_fixed_gamma(data, train, cfg, g);
  m.summary.gamma_cross_validated = true;
  return m;
}

struct FoldResult {
  int fold = 0;
  double learned = 0.0;
  double euclidean = 0.0;
  std::optional<double> inverse_covariance;
  double gamma = 1.0;
  Index basis_k = 0;
  TrainSummary summary;
};

struct EvalReport {
  double accuracy = 0.0;  // learned metric, mean over folds
  double error = 1.0;
  double euclidean_accuracy = 0.0;
  std::optional<double> inverse_covariance_accuracy;
  std::vector<FoldResult> folds;
  int k = 10;
  std::uint64_t seed = 0;
};

/// Two-fold k-NN cross validation: train on one half, classify the other
/// half against it, swap, and average.
inline EvalReport two_fold_cv(const Dataset& data, const PipelineConfig& cfg) {
  data.validate();
  if (data.size() < 4) throw InvalidArgument("two-fold cross validation needs at least 4 points");
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  std::iota(all.begin(), all.end(), Index{0});
  detail::require_two_per_class(data, all);
  const auto [a, b] = stratified_split(all, data.labels, cfg.seed);

  EvalReport report;
  report.k = cfg.knn_k;
  report.seed = cfg.seed;
  for (int fold = 0; fold < 2; ++fold) {
    const auto& tr = fold == 0 ? a : b;
    const auto& te = fold == 0 ? b : a;
    const std::vector<int> truth = data.labels_of(te);
    const int k = std::min<int>(cfg.knn_k, static_cast<int>(tr.size()));
    FoldResult fr;
    fr.fold = fold;
    TrainedMetric m = train_metric(data, tr, cfg);
    fr.learned = accuracy(knn_classify(m.oracle, data, tr, te, k), truth);
    fr.euclidean = accuracy(knn_classify(DistanceOracle::euclidean(), data, tr, te, k), truth);
    if (data.has_features()) {
      const DistanceOracle ic = DistanceOracle::mahalanobis(inverse_covariance_baseline(data.points(tr)),
                                                            DistanceOracle::Source::inverse_covariance);
      fr.inverse_covariance = accuracy(knn_classify(ic, data, tr, te, k), truth);
    }
    fr.gamma = m.summary.gamma;
    fr.basis_k = m.summary.basis_k;
    fr.summary = std::move(m.summary);
    report.folds.push_back(std::move(fr));
  }
  report.accuracy = (report.folds[0].learned + report.folds[1].learned) / 2.0;
  report.error = 1.0 - report.accuracy;
  report.euclidean_accuracy = (report.folds[0].euclidean + report.folds[1].euclidean) / 2.0;
  if (report.folds[0].inverse_covariance) {
    report.inverse_covariance_accuracy = (*report.folds[0].inverse_covariance + *report.folds[1].inverse_covariance) / 2.0;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Clustering.

/// Maximum-weight assignment on a square score matrix (Hungarian method).
/// Returns, for every row, the column it is matched to.
inline std::vector<int> max_weight_assignment(const Matrix& score) {
  const Index n = score.rows();
  if (score.cols() != n) throw InvalidArgument("assignment needs a square matrix");
  const double top = n > 0 ? score.maxCoeff() : 0.0;
  // Minimize cost = top - score with the classic O(n^3) potentials method.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInfinity);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInfinity;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = (top - score(i0 - 1, j - 1)) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= n; ++j) {
    if (match[static_cast<std::size_t>(j)] > 0) {
      row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = static_cast<int>(j - 1);
    }
  }
  return row_to_col;
}

/// 1 - accuracy of the best one-to-one matching between cluster ids and labels.
inline double clustering_error(std::span<const int> clusters, std::span<const int> labels) {
  if (clusters.size() != labels.size() || labels.empty()) throw InvalidArgument("clustering_error: size mismatch");
  std::map<int, int> cid, lid;
  for (int c : clusters) cid.try_emplace(c, static_cast<int>(cid.size()));
  for (int l : labels) lid.try_emplace(l, static_cast<int>(lid.size()));
  const Index n = static_cast<Index>(std::max(cid.size(), lid.size()));
  Matrix score = Matrix::Zero(n, n);
  for (std::size_t p = 0; p < labels.size(); ++p) score(cid[clusters[p]], lid[labels[p]]) += 1.0;
  const std::vector<int> match = max_weight_assignment(score);
  double hits = 0.0;
  for (Index r = 0; r < n; ++r) hits += score(r, match[static_cast<std::size_t>(r)]);
  return 1.0 - hits / static_cast<double>(labels.size());
}

/// Semi-supervised k-means: cluster every dataset point in the geometry of
/// `oracle` (kernel k-means on its learned Gram matrix, k-means++ seeding,
/// best of `restarts`) and return the clustering error on `test`.
inline double semisup_kmeans(const DistanceOracle& oracle, const Dataset& data, int clusters,
                             std::span<const Index> test, std::uint64_t seed, int restarts = 10) {
  if (clusters < 2) throw InvalidArgument("clustering needs at least 2 clusters");
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  std::iota(all.begin(), all.end(), Index{0});
  const SymMatrix g(oracle.inner_block(data, all, all));
  KMeansConfig kc;
  kc.k = clusters;
  kc.restarts = restarts;
  kc.init = KMeansInit::plus_plus;
  kc.max_iterations = 100;
  kc.seed = seed;
  const KMeansResult km = kernel_kmeans(g, kc);
  std::vector<int> assigned, truth;
  for (Index p : test) {
    assigned.push_back(km.assignment[static_cast<std::size_t>(p)]);
    truth.push_back(data.labels[static_cast<std::size_t>(p)]);
  }
  return clustering_error(assigned, truth);
}

struct ClusterReport {
  double error = 0.0;           // learned metric, mean over folds
  double baseline_error = 0.0;  // Euclidean k-means
  std::vector<FoldResult> folds;  // `learned` / `euclidean` hold errors here
  std::uint64_t seed = 0;
};

/// Two-fold clustering protocol: learn from constraints drawn on one half,
/// cluster the whole dataset, score on the other half; swap and average.
inline ClusterReport cluster_experiment(const Dataset& data, const PipelineConfig& cfg) {
  data.validate();
  if (data.size() < 4) throw InvalidArgument("clustering evaluation needs at least 4 points");
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  std::iota(all.begin(), all.end(), Index{0});
  detail::require_two_per_class(data, all);
  std::map<int, int> classes;
  for (int l : data.labels) ++classes[l];
  const int c = static_cast<int>(classes.size());
  const auto [a, b] = stratified_split(all, data.labels, cfg.seed);

  ClusterReport report;
  report.seed = cfg.seed;
  for (int fold = 0; fold < 2; ++fold) {
    const auto& tr = fold == 0 ? a : b;
    const auto& te = fold == 0 ? b : a;
    FoldResult fr;
    fr.fold = fold;
    TrainedMetric m = train_metric(data, tr, cfg);
    fr.learned = semisup_kmeans(m.oracle, data, c, te, cfg.seed + static_cast<std::uint64_t>(fold));
    fr.euclidean = semisup_kmeans(DistanceOracle::euclidean(), data, c, te, cfg.seed + static_cast<std::uint64_t>(fold));
    fr.gamma = m.summary.gamma;
    fr.basis_k = m.summary.basis_k;
    fr.summary = std::move(m.summary);
    report.folds.push_back(std::move(fr));
  }
  report.error = (report.folds[0].learned + report.folds[1].learned) / 2.0;
  report.baseline_error = (report.folds[0].euclidean + report.folds[1].euclidean) / 2.0;
  return report;
}

}  // namespace ldml

#endif  // LDML_EVALUATION_HPP
