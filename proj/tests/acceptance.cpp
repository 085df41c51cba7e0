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

// Acceptance run: one PASS/FAIL line per criterion. The exit status is
// non-zero when a criterion fails that was not named with --expect-fail, or
// when a criterion named there unexpectedly passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ldml/alt_solvers.hpp"
#include "ldml/cli.hpp"
#include "ldml/constraints.hpp"
#include "ldml/evaluation.hpp"
#include "ldml/io.hpp"
#include "ldml/iplr.hpp"
#include "ldml/logdet_solver.hpp"
#include "ldml/out_of_sample.hpp"
#include "support.hpp"

#ifndef LDML_DATA_DIR
#define LDML_DATA_DIR "data"
#endif

namespace {

using namespace ldml;
using testing::gaussian_matrix;
using testing::random_pd;
using testing::relative_frobenius;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

Thresholds pool_thresholds(const SymMatrix& k) {
  std::vector<double> pool;
  for (Index i = 0; i < k.dim(); ++i)
    for (Index j = i + 1; j < k.dim(); ++j) pool.push_back(pair_distance_kernel(k, i, j));
  return compute_thresholds(pool);
}

std::vector<int> random_labels(Index n, int classes, std::mt19937_64& rng) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = static_cast<int>(rng() % static_cast<unsigned>(classes));
  return labels;
}

Outcome kernel_linear_agreement() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 3 + trial % 6;
    const Index n = d + (trial * 7) % (16 - d);
    Matrix x = gaussian_matrix(d, n, rng);
    const SymMatrix k0(x.transpose() * x);
    const auto labels = random_labels(n, 2, rng);
    const ConstraintSet cs(generate_random_pairs(labels, 6, static_cast<std::uint64_t>(trial)).constraints,
                           pool_thresholds(k0));
    SolverConfig cfg;
    cfg.gamma = kInfinity;
    cfg.tol = 1e-12;
    cfg.max_sweeps = 100000;
    const LinearModel lin = fit_linear(DataMatrix(x), cs, cfg);
    const KernelModel ker = fit_kernel(k0, cs, cfg);
    worst = std::max(worst, relative_frobenius(x.transpose() * lin.w.matrix() * x, ker.k.matrix()));
  }
  const double secs = seconds_since(start);
  o.check(worst <= 1e-4, "worst relative gap " + fmt(worst));
  o.check(secs < 10.0, "took " + fmt(secs) + " s");
  if (o.pass) o.detail = "worst relative gap " + fmt(worst) + " in " + fmt(secs) + " s";
  return o;
}

Outcome projections() {
  Outcome o;
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double gammas[] = {0.01, 1.0, 100.0, kInfinity};
  int unclipped = 0, total = 0;
  double worst_gap = 0.0, worst_eig = 0.0;
  bool negative_lambda = false;
  for (int trial = 0; trial < 2000; ++trial) {
    const Index n = 2 + trial % 7;
    const Matrix g = gaussian_matrix(n, n + 1, rng);
    SymMatrix k(g * g.transpose());
    const Index i = static_cast<Index>(rng() % static_cast<unsigned>(n));
    const Index j = (i + 1 + static_cast<Index>(rng() % static_cast<unsigned>(n - 1))) % n;
    const ConstraintKind kind = unit(rng) < 0.5 ? ConstraintKind::similar : ConstraintKind::dissimilar;
    double xi = pair_distance_kernel(k, i, j) * (0.1 + 1.8 * unit(rng));
    double lambda = unit(rng) < 0.5 ? 0.0 : 0.5 * unit(rng);
    const auto out = project_constraint_kernel(k, {i, j, kind}, lambda, xi, gammas[trial % 4]);
    if (out.skipped) continue;
    ++total;
    negative_lambda = negative_lambda || lambda < 0.0;
    const double floor = -1e-8 * std::max(1.0, k.trace() / static_cast<double>(n));
    worst_eig = std::min(worst_eig, min_eigenvalue(k) - floor);
    if (!out.clipped) {
      ++unclipped;
      worst_gap = std::max(worst_gap, std::abs(pair_distance_kernel(k, i, j) - xi) / std::max(1.0, xi));
    }
  }
  o.check(total >= 1000, "only " + std::to_string(total) + " projections");
  o.check(worst_gap <= 1e-9, "distance vs xi gap " + fmt(worst_gap));
  o.check(worst_eig >= 0.0, "eigenvalue below floor by " + fmt(-worst_eig));
  o.check(!negative_lambda, "negative dual variable");
  if (o.pass) {
    o.detail = std::to_string(total) + " projections, " + std::to_string(unclipped) + " unclipped, worst gap " +
               fmt(worst_gap);
  }
  return o;
}

Outcome out_of_sample() {
  Outcome o;
  std::mt19937_64 rng(103);
  double worst_pair = 0.0, worst_inner = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    const Index d = 2 + 3 * (trial % 3), n = 12;
    const KernelSpec spec = trial < 3 ? KernelSpec::gaussian(1.0 + trial) : KernelSpec::linear();
    const DataMatrix x(gaussian_matrix(d, n, rng));
    const SymMatrix k0 = gram(x, spec);
    const auto labels = random_labels(n, 3, rng);
    const ConstraintSet cs(generate_random_pairs(labels, 30, static_cast<std::uint64_t>(trial)).constraints,
                           pool_thresholds(k0));
    SolverConfig cfg;
    cfg.tol = 1e-8;
    const KernelModel fit = fit_kernel(k0, cs, cfg);
    const LearnedKernelModel model = LearnedKernelModel::from_fit(fit, spec, x);
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b)
        worst_pair = std::max(worst_pair, std::abs(model.distance(x.point(a), x.point(b)) -
                                                   pair_distance_kernel(fit.k, a, b)));
    if (spec.kind == KernelSpec::Kind::linear) {
      const Matrix w = Matrix::Identity(d, d) + x.matrix() * model.dense_m().matrix() * x.matrix().transpose();
      for (int q = 0; q < 20; ++q) {
        const Vector z1 = gaussian_matrix(d, 1, rng), z2 = gaussian_matrix(d, 1, rng);
        worst_inner = std::max(worst_inner, std::abs(model.inner_product(z1, z2) - z1.dot(w * z2)));
      }
    }
  }
  o.check(worst_pair <= 1e-8, "training pair gap " + fmt(worst_pair));
  o.check(worst_inner <= 1e-8, "linear inner product gap " + fmt(worst_inner));
  if (o.pass) o.detail = "pair gap " + fmt(worst_pair) + ", inner product gap " + fmt(worst_inner);
  return o;
}

Matrix orthonormal(Index d, Index k, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(d, k, rng));
  return qr.householderQ() * Matrix::Identity(d, k);
}

Outcome iplr() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(104);
  SolverConfig tight;
  tight.tol = 1e-11;
  tight.max_sweeps = 50000;
  double worst_full = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 3 + trial % 4, n = 14;
    const DataMatrix x(gaussian_matrix(d, n, rng));
    const auto labels = random_labels(n, 2, rng);
    const ConstraintSet cs(generate_from_labels(labels, 6, static_cast<std::uint64_t>(trial)).constraints,
                           pool_thresholds(gram(x, KernelSpec::linear())));
    const Basis b = select_basis_feature(x, FeatureBasisMethod::topk_svd, d, 0);
    const IPLRModel m = fit_iplr(x, b, cs, tight);
    const LinearModel direct = fit_linear(x, cs, tight);
    worst_full = std::max(worst_full, relative_frobenius(reconstruct_linear(m).w.matrix(), direct.w.matrix()));
  }
  double worst_obj = 0.0, worst_dist = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 3 + trial % 6;
    const Index k = 1 + trial % d;
    const Matrix u = orthonormal(d, k, rng);
    const SymMatrix f = random_pd(k, rng, 0.05);
    const SymMatrix w(Matrix::Identity(d, d) + u * (f.matrix() - Matrix::Identity(k, k)) * u.transpose());
    const double lhs = logdet_divergence(w, SymMatrix::identity(d));
    const double rhs = logdet_divergence(f, SymMatrix::identity(k));
    worst_obj = std::max(worst_obj, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    const Vector v = gaussian_matrix(d, 1, rng);
    const Vector vp = u.transpose() * v;
    const double dist = v.dot(w.matrix() * v);
    const double split = v.squaredNorm() - vp.squaredNorm() + vp.dot(f.matrix() * vp);
    worst_dist = std::max(worst_dist, std::abs(dist - split) / std::max(1.0, std::abs(dist)));
  }
  const double secs = seconds_since(start);
  o.check(worst_full <= 1e-4, "full basis gap " + fmt(worst_full));
  o.check(worst_obj <= 1e-9, "objective identity gap " + fmt(worst_obj));
  o.check(worst_dist <= 1e-9, "distance decomposition gap " + fmt(worst_dist));
  o.check(secs < 30.0, "took " + fmt(secs) + " s");
  if (o.pass) {
    o.detail = "full basis gap " + fmt(worst_full) + ", identities " + fmt(worst_obj) + " / " + fmt(worst_dist) +
               " in " + fmt(secs) + " s";
  }
  return o;
}

Outcome ionosphere() {
  Outcome o;
  const auto start = Clock::now();
  const std::string path = std::string(LDML_DATA_DIR) + "/ionosphere.csv";
  auto [x, labels] = split_label_column(read_numeric_csv(path), path);
  const Dataset data{"ionosphere", DataMatrix::from_rows(x), std::nullopt, std::move(labels)};
  double learned = 0.0, baseline = 0.0;
  constexpr int kSeeds = 5;
  for (int seed = 0; seed < kSeeds; ++seed) {
    PipelineConfig cfg;
    cfg.constraints = {ConstraintProtocol::Kind::random_pairs, 50};
    cfg.seed = static_cast<std::uint64_t>(seed);
    const ClusterReport r = cluster_experiment(data, cfg);
    learned += r.error / kSeeds;
    baseline += r.baseline_error / kSeeds;
  }
  const double secs = seconds_since(start);
  o.detail = "k-means error " + fmt(baseline) + " (target 0.314 +- 0.06), LogDet error " + fmt(learned) +
             " (target 0.113 +- 0.06), " + fmt(secs) + " s";
  o.pass = std::abs(baseline - 0.314) <= 0.06 && std::abs(learned - 0.113) <= 0.06 && secs < 120.0;
  return o;
}

Outcome anisotropic() {
  Outcome o;
  double learned = 0.0, euclid = 0.0;
  constexpr int kSeeds = 5;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Dataset data = testing::anisotropic_blobs(20, 300, static_cast<std::uint64_t>(seed));
    PipelineConfig cfg;
    cfg.space = Space::linear;
    cfg.knn_k = 10;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const EvalReport r = two_fold_cv(data, cfg);
    learned += r.accuracy / kSeeds;
    euclid += r.euclidean_accuracy / kSeeds;
  }
  o.detail = "learned accuracy " + fmt(learned) + ", Euclidean " + fmt(euclid);
  o.pass = learned >= euclid - 0.02;
  return o;
}

SymMatrix random_symmetric(Index n, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  return SymMatrix(0.5 * (g + g.transpose()));
}

Outcome von_neumann() {
  Outcome o;
  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_fd = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 5;
    const int m = 1 + trial % 4;
    const SymMatrix k0 = random_pd(n, rng);
    std::vector<LinearConstraintGeneral> cons;
    std::vector<double> lambda;
    for (int i = 0; i < m; ++i) {
      cons.push_back({random_symmetric(n, rng), unit(rng)});
      lambda.push_back(0.5 * unit(rng));
    }
    const Vector g = vn_dual_gradient(k0, cons, lambda);
    for (int i = 0; i < m; ++i) {
      const double h = 1e-5;
      auto plus = lambda, minus = lambda;
      plus[static_cast<std::size_t>(i)] += h;
      minus[static_cast<std::size_t>(i)] -= h;
      const double fd = (vn_dual_objective(k0, cons, plus) - vn_dual_objective(k0, cons, minus)) / (2 * h);
      worst_fd = std::max(worst_fd, std::abs(fd - g(i)) / std::max(1.0, std::abs(fd)));
    }
  }
  const SymMatrix k0 = random_pd(3, rng);
  const ConstraintSet cs({{0, 1, ConstraintKind::similar}}, Thresholds{0.3 * pair_distance_kernel(k0, 0, 1), 10.0});
  const auto cons = to_general(cs, 3);
  const VnResult r = fit_vn_kernel(k0, cons);
  const double achieved = cons[0].c.matrix().cwiseProduct(r.k.matrix()).sum();
  const double miss = std::abs(achieved - cons[0].b) / std::abs(cons[0].b);
  const double lo = min_eigenvalue(r.k);
  o.check(worst_fd <= 1e-5, "gradient gap " + fmt(worst_fd));
  o.check(lo > 0.0, "output not PD (min eigenvalue " + fmt(lo) + ")");
  o.check(r.lambda[0] > 0.0, "constraint not active");
  o.check(miss <= 0.05, "active constraint missed by " + fmt(100 * miss) + "%");
  if (o.pass) o.detail = "gradient gap " + fmt(worst_fd) + ", active constraint within " + fmt(100 * miss) + "%";
  return o;
}

double frob_dual_oracle(const Matrix& a, double r, double eta) {
  auto g = [&](double mu) {
    const SymMatrix t = spectral_function(SymMatrix(-0.5 * mu * a), [eta](double x) { return std::max(x, -eta); });
    return t.matrix().squaredNorm() + mu * (a.cwiseProduct(t.matrix()).sum() - r);
  };
  double best_mu = 0.0, best = g(0.0);
  const double hi = 4.0 * std::abs(r) / std::max(a.squaredNorm(), 1e-300) + 1.0;
  for (int i = 1; i <= 4000; ++i) {
    const double mu = hi * i / 4000.0;
    const double v = g(mu);
    if (v > best) best = v, best_mu = mu;
  }
  double lo = std::max(0.0, best_mu - hi / 4000.0), up = best_mu + hi / 4000.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = up - phi * (up - lo), m2 = lo + phi * (up - lo);
    if (g(m1) < g(m2)) lo = m1;
    else up = m2;
  }
  return std::max(best, g(0.5 * (lo + up)));
}

Outcome frobenius() {
  Outcome o;
  std::mt19937_64 rng(108);
  double worst_obj = 0.0, worst_idem = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    const SymMatrix k0 = random_pd(3, rng);
    const bool similar = trial % 2 == 0;
    const double p = pair_distance_kernel(k0, 0, 1);
    const ConstraintSet cs({{0, 1, similar ? ConstraintKind::similar : ConstraintKind::dissimilar}},
                           Thresholds{similar ? 0.4 * p : 0.1, similar ? 10.0 : 2.5 * p});
    const auto cons = to_general(cs, 3);
    const FrobResult r = fit_frob_kernel(k0, cons);
    const Matrix root = spectral_function(k0, [](double x) { return std::sqrt(x); }).matrix();
    const double rhs = cons[0].b - cons[0].c.matrix().cwiseProduct(k0.matrix()).sum();
    const double oracle = frob_dual_oracle(root * cons[0].c.matrix() * root, rhs, 1.0);
    worst_obj = std::max(worst_obj, std::abs(r.objective - oracle) / std::max(1.0, oracle));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 5;
    const SymMatrix k0 = random_pd(n, rng);
    const SymMatrix once = project_frob_psd(random_symmetric(n, rng), k0, 1.0);
    const SymMatrix twice = project_frob_psd(once, k0, 1.0);
    worst_idem = std::max(worst_idem, (twice.matrix() - once.matrix()).cwiseAbs().maxCoeff());
  }
  o.check(worst_obj <= 1e-3, "objective gap " + fmt(worst_obj));
  o.check(worst_idem <= 1e-10, "idempotence gap " + fmt(worst_idem));
  if (o.pass) o.detail = "objective gap " + fmt(worst_obj) + ", idempotence gap " + fmt(worst_idem);
  return o;
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "ldml");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  return code;
}

Outcome determinism() {
  Outcome o;
  testing::TempDir dir;
  const Dataset data = testing::blobs(3, 20, 5, 2.0, 109);
  const std::string csv = dir.write("data.csv", testing::to_csv(data.x->matrix(), &data.labels));
  const std::vector<std::vector<std::string>> trains{
      {"--per-class", "8"},
      {"--per-class", "8", "--gamma", "cv"},
      {"--per-class", "8", "--space", "kernel", "--kernel", "gaussian", "--basis", "kmeans:6"},
      {"--per-class", "8", "--loss", "vonneumann"},
      // Dykstra rounds cost a dense eigendecomposition each, so keep this one small.
      {"--per-class", "3", "--loss", "frobenius", "--space", "kernel", "--kernel", "gaussian"},
  };
  int artifacts = 0;
  for (std::size_t t = 0; t < trains.size(); ++t) {
    std::string files[2];
    for (int rep = 0; rep < 2; ++rep) {
      const std::string model = dir.file("m" + std::to_string(t) + "_" + std::to_string(rep));
      std::vector<std::string> args{"train", "--data", csv, "--label-col", "last", "--seed", "4", "--out", model};
      args.insert(args.end(), trains[t].begin(), trains[t].end());
      const int code = run_cli(args);
      o.check(code == 0, "train variant " + std::to_string(t) + " exited " + std::to_string(code));
      files[rep] = testing::slurp(model);
    }
    o.check(files[0] == files[1], "train variant " + std::to_string(t) + " differs");
    ++artifacts;
  }
  for (const char* mode : {"knn", "cluster"}) {
    std::string outs[2];
    for (auto& s : outs) {
      const int code = run_cli({"eval", "--data", csv, "--label-col", "last", "--mode", mode, "--seed", "2"}, &s);
      o.check(code == 0, std::string("eval ") + mode + " exited " + std::to_string(code));
    }
    o.check(outs[0] == outs[1] && !outs[0].empty(), std::string("eval ") + mode + " differs");
    ++artifacts;
  }
  if (o.pass) o.detail = std::to_string(artifacts) + " artifacts byte-identical across reruns";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expect_fail;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--expect-fail" && a + 1 < argc) {
      std::stringstream list(argv[++a]);
      for (std::string item; std::getline(list, item, ',');) expect_fail.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--expect-fail N[,N...]]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"kernel and linear LogDet solutions agree", kernel_linear_agreement},
      {"single projection properties", projections},
      {"out-of-sample consistency", out_of_sample},
      {"IPLR full basis and identities", iplr},
      {"Ionosphere clustering errors", ionosphere},
      {"anisotropic blobs k-NN", anisotropic},
      {"von Neumann gradient and solver", von_neumann},
      {"Frobenius solver", frobenius},
      {"train and eval determinism", determinism},
  };
  int unexpected = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c) + 1;
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool expected = expect_fail.count(id) != 0;
    std::printf("criterion %d %s: %s (%s)%s\n", id, o.pass ? "PASS" : "FAIL", criteria[c].first, o.detail.c_str(),
                expected ? " [expected failure]" : "");
    std::fflush(stdout);
    if (o.pass == expected) ++unexpected;
  }
  return unexpected == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
