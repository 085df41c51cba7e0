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

// The ldml command line: train, distance and eval subcommands.
//
// Exit codes: 0 success, 2 malformed data, 3 infeasible problem or numerical
// failure, 4 bad flags.

#ifndef LDML_CLI_HPP
#define LDML_CLI_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldml/error.hpp"
#include "ldml/evaluation.hpp"
#include "ldml/io.hpp"
#include "ldml/model_file.hpp"

namespace ldml::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 2;
inline constexpr int kExitFailure = 3;
inline constexpr int kExitUsage = 4;

/// A flag value or combination that cannot be honoured.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct DataOptions {
  std::string data;
  std::string labels;
  std::string label_col;
  bool header = false;
};

struct LearnOptions {
  std::string loss = "logdet";
  std::string space = "auto";
  std::string kernel = "linear";
  std::string gamma = "1";
  std::string basis = "none";
  double tol = 1e-3;
  int max_sweeps = 0;
  double eta = 1.0;
  std::uint64_t seed = 0;
};

struct TrainOptions {
  DataOptions data;
  LearnOptions learn;
  int per_class = 100;
  std::string out;
  std::string log;
};

struct DistanceOptions {
  std::string model;
  std::string pairs;
  std::string points;
  bool header = false;
  std::string out;
};

struct EvalOptions {
  DataOptions data;
  LearnOptions learn;
  std::string mode = "knn";
  int k = 10;
  std::optional<int> constraints;
  std::string name;
  std::string out;
  std::string log;
};

// ---------------------------------------------------------------------------
// Flag parsing.

namespace detail {

inline double parse_positive(const std::string& text, const std::string& flag) {
  const auto v = ldml::detail::parse_double(text);
  if (!v || !(*v > 0.0)) throw UsageError(flag + " expects a positive number, got '" + text + "'");
  return *v;
}

inline int parse_count(const std::string& text, const std::string& flag) {
  const auto v = ldml::detail::parse_integer(text);
  if (!v || *v < 1 || *v > 1000000000) throw UsageError(flag + " expects a positive integer, got '" + text + "'");
  return static_cast<int>(*v);
}

inline PipelineConfig pipeline_config(const LearnOptions& o) {
  PipelineConfig cfg;
  if (o.loss == "logdet") cfg.loss = Loss::logdet;
  else if (o.loss == "vonneumann") cfg.loss = Loss::vonneumann;
  else if (o.loss == "frobenius") cfg.loss = Loss::frobenius;
  else throw UsageError("--loss must be logdet, vonneumann or frobenius");

  if (o.space == "auto") cfg.space = Space::automatic;
  else if (o.space == "linear") cfg.space = Space::linear;
  else if (o.space == "kernel") cfg.space = Space::kernel;
  else throw UsageError("--space must be auto, linear or kernel");

  const auto colon = o.kernel.find(':');
  const std::string kname = o.kernel.substr(0, colon);
  if (kname == "linear" && colon == std::string::npos) {
    cfg.kernel = KernelSpec::Kind::linear;
  } else if (kname == "gaussian") {
    cfg.kernel = KernelSpec::Kind::gaussian;
    if (colon != std::string::npos) cfg.sigma = parse_positive(o.kernel.substr(colon + 1), "--kernel gaussian:");
  } else if (kname == "precomputed" && colon == std::string::npos) {
    cfg.kernel = KernelSpec::Kind::precomputed;
  } else {
    throw UsageError("--kernel must be linear, gaussian[:sigma] or precomputed");
  }

  if (o.gamma == "cv") cfg.gamma.reset();
  else if (o.gamma == "inf") cfg.gamma = kInfinity;
  else cfg.gamma = parse_positive(o.gamma, "--gamma");

  const auto bc = o.basis.find(':');
  const std::string bname = o.basis.substr(0, bc);
  if (bname == "none" && bc == std::string::npos) {
    cfg.basis.kind = BasisChoice::Kind::none;
  } else {
    if (bc == std::string::npos) throw UsageError("--basis " + bname + " needs a rank, e.g. " + bname + ":10");
    cfg.basis.k = parse_count(o.basis.substr(bc + 1), "--basis");
    if (bname == "topk") cfg.basis.kind = BasisChoice::Kind::topk;
    else if (bname == "classmeans") cfg.basis.kind = BasisChoice::Kind::classmeans;
    else if (bname == "random") cfg.basis.kind = BasisChoice::Kind::random;
    else if (bname == "subset") cfg.basis.kind = BasisChoice::Kind::subset;
    else if (bname == "kmeans") cfg.basis.kind = BasisChoice::Kind::kmeans;
    else throw UsageError("--basis must be none, topk:K, classmeans:K, random:K, subset:K or kmeans:K");
  }
  if (cfg.loss != Loss::logdet && cfg.basis.kind != BasisChoice::Kind::none) {
    throw UsageError("--basis is only supported with --loss logdet");
  }
  if (!(o.tol > 0.0)) throw UsageError("--tol must be positive");
  if (o.max_sweeps < 0) throw UsageError("--max-sweeps must be non-negative (0 = automatic)");
  if (!(o.eta >= 0.0)) throw UsageError("--eta must be non-negative");
  cfg.tol = o.tol;
  cfg.max_sweeps = o.max_sweeps;
  cfg.eta = o.eta;
  cfg.seed = o.seed;
  return cfg;
}

inline Dataset load_dataset(const DataOptions& o, const PipelineConfig& cfg) {
  if (o.data.empty()) throw UsageError("--data is required");
  if (!o.label_col.empty() && o.label_col != "last") throw UsageError("--label-col only accepts 'last'");
  if (!o.labels.empty() && !o.label_col.empty()) throw UsageError("use either --labels or --label-col, not both");
  if (o.labels.empty() && o.label_col.empty()) throw UsageError("labels are required: pass --labels or --label-col last");
  Dataset data;
  data.name = std::filesystem::path(o.data).stem().string();
  if (cfg.kernel == KernelSpec::Kind::precomputed) {
    if (!o.label_col.empty()) throw UsageError("--label-col cannot be used with a precomputed kernel");
    if (cfg.space == Space::linear) throw UsageError("--kernel precomputed needs --space kernel or auto");
    data.kernel = read_kernel_csv(o.data, o.header);
    data.labels = read_labels(o.labels);
  } else {
    Matrix rows = read_numeric_csv(o.data, o.header);
    if (!o.label_col.empty()) {
      auto [features, labels] = split_label_column(rows, o.data);
      rows = std::move(features);
      data.labels = std::move(labels);
    } else {
      data.labels = read_labels(o.labels);
    }
    data.x = DataMatrix::from_rows(rows);
  }
  if (static_cast<Index>(data.labels.size()) != data.size()) {
    throw DataError("found " + std::to_string(data.labels.size()) + " labels for " + std::to_string(data.size()) +
                    " points");
  }
  return data;
}

class Log {
 public:
  Log(std::ostream& err, const std::string& path) : err_(err) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw UsageError("cannot write log file " + path);
    }
  }
  template <typename T>
  void kv(const std::string& key, const T& value) {
    std::ostringstream line;
    line << key << '=' << value << '\n';
    err_ << line.str();
    if (file_) file_ << line.str();
  }
  void warn(const std::string& msg) { kv("warning", msg); }

 private:
  std::ostream& err_;
  std::ofstream file_;
};

inline void log_learn(Log& log, const LearnOptions& o) {
  log.kv("loss", o.loss);
  log.kv("space", o.space);
  log.kv("kernel", o.kernel);
  log.kv("gamma", o.gamma);
  log.kv("basis", o.basis);
  log.kv("tol", format_double(o.tol));
  log.kv("max_sweeps", o.max_sweeps);
  log.kv("eta", format_double(o.eta));
  log.kv("seed", o.seed);
}

inline void log_data(Log& log, const DataOptions& o) {
  log.kv("data", o.data);
  log.kv("labels", o.labels.empty() ? "-" : o.labels);
  log.kv("label_col", o.label_col.empty() ? "-" : o.label_col);
  log.kv("header", o.header ? 1 : 0);
}

inline void log_summary(Log& log, const TrainSummary& s, const std::string& prefix = "") {
  log.kv(prefix + "resolved_space", to_string(s.space));
  log.kv(prefix + "resolved_kernel", ldml::detail::kernel_to_text(s.kernel));
  log.kv(prefix + "gamma_used", format_double(s.gamma));
  log.kv(prefix + "gamma_cross_validated", s.gamma_cross_validated ? 1 : 0);
  log.kv(prefix + "constraints", s.constraints.size());
  log.kv(prefix + "threshold_upper", format_double(s.thresholds.upper));
  log.kv(prefix + "threshold_lower", format_double(s.thresholds.lower));
  log.kv(prefix + "sweeps", s.sweeps);
  log.kv(prefix + "converged", s.converged ? 1 : 0);
  log.kv(prefix + "max_violation", format_double(s.max_violation));
  if (s.basis_k > 0) log.kv(prefix + "basis_k", s.basis_k);
  if (s.jitter_used > 0.0) log.kv(prefix + "jitter_used", format_double(s.jitter_used));
  for (const auto& w : s.warnings) log.warn(w);
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
  if (!f) throw UsageError("failed writing " + path);
}

inline std::string format12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands.

inline int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  detail::Log log(err, o.log);
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.per_class < 1) throw UsageError("--per-class must be positive");
  PipelineConfig cfg = detail::pipeline_config(o.learn);
  cfg.constraints = {ConstraintProtocol::Kind::per_class, o.per_class};
  log.kv("command", "train");
  detail::log_data(log, o.data);
  detail::log_learn(log, o.learn);
  log.kv("per_class", o.per_class);
  log.kv("out", o.out);

  const Dataset data = detail::load_dataset(o.data, cfg);
  log.kv("points", data.size());
  if (data.x) log.kv("dimension", data.x->dim());
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  std::iota(all.begin(), all.end(), Index{0});
  const TrainedMetric m = train_metric(data, all, cfg);
  detail::log_summary(log, m.summary);
  const ModelDocument doc = model_document(m, data, all, cfg.loss, cfg.seed, cfg.eta);
  detail::write_text(o.out, doc.serialize(), out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log.kv("wall_time_s", detail::format12(secs));
  return kExitOk;
}

inline int cmd_distance(const DistanceOptions& o, std::ostream& out, std::ostream& err) {
  if (o.model.empty()) throw UsageError("--model is required");
  if (o.pairs.empty() && o.points.empty()) throw UsageError("pass --pairs, --points, or both");
  const LoadedModel model = load_model(ModelDocument::parse(ldml::detail::read_file(o.model), o.model));
  std::string csv = "i,j,distance\n";
  auto row = [&](Index i, Index j, double d) {
    csv += std::to_string(i) + "," + std::to_string(j) + "," + format_double(d) + "\n";
  };
  if (!o.points.empty()) {
    const Matrix rows = read_numeric_csv(o.points, o.header);
    if (model.train && rows.cols() != model.train->dim()) {
      throw DataError(o.points + ": points have " + std::to_string(rows.cols()) + " columns, the model expects " +
                      std::to_string(model.train->dim()));
    }
    if (!model.train && !model.oracle.w() && !model.oracle.iplr_model()) {
      throw DataError("a precomputed-kernel model cannot evaluate new feature vectors");
    }
    if (model.oracle.w() && rows.cols() != model.oracle.w()->dim()) {
      throw DataError(o.points + ": points have " + std::to_string(rows.cols()) + " columns, the model expects " +
                      std::to_string(model.oracle.w()->dim()));
    }
    const Matrix z = rows.transpose();
    std::vector<std::pair<Index, Index>> pairs;
    if (!o.pairs.empty()) {
      pairs = read_pairs(o.pairs);
    } else {
      for (Index i = 0; i < z.cols(); ++i)
        for (Index j = i + 1; j < z.cols(); ++j) pairs.emplace_back(i, j);
    }
    for (const auto& [i, j] : pairs) {
      if (i >= z.cols() || j >= z.cols()) {
        throw DataError("pair (" + std::to_string(i) + ", " + std::to_string(j) + ") is outside the " +
                        std::to_string(z.cols()) + " query points");
      }
      row(i, j, i == j ? 0.0 : model.oracle.distance(z.col(i), z.col(j)));
    }
  } else {
    for (const auto& [i, j] : read_pairs(o.pairs)) {
      if (i >= model.train_size || j >= model.train_size) {
        throw DataError("pair (" + std::to_string(i) + ", " + std::to_string(j) + ") is outside the " +
                        std::to_string(model.train_size) + " training points");
      }
      row(i, j, i == j ? 0.0 : training_pair_distance(model, i, j));
    }
  }
  detail::write_text(o.out, csv, out);
  (void)err;
  return kExitOk;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  detail::Log log(err, o.log);
  PipelineConfig cfg = detail::pipeline_config(o.learn);
  if (o.k < 1) throw UsageError("--k must be positive");
  if (o.mode != "knn" && o.mode != "cluster") throw UsageError("--mode must be knn or cluster");
  const bool knn = o.mode == "knn";
  const int count = o.constraints.value_or(knn ? 100 : 50);
  if (count < 1) throw UsageError("--constraints must be positive");
  cfg.constraints = knn ? ConstraintProtocol{ConstraintProtocol::Kind::per_class, count}
                        : ConstraintProtocol{ConstraintProtocol::Kind::random_pairs, count};
  cfg.knn_k = o.k;
  log.kv("command", "eval");
  detail::log_data(log, o.data);
  detail::log_learn(log, o.learn);
  log.kv("mode", o.mode);
  log.kv("k", o.k);
  log.kv("constraints", count);
  log.kv("constraint_protocol", knn ? "per_class" : "random_pairs");

  Dataset data = detail::load_dataset(o.data, cfg);
  if (!o.name.empty()) data.name = o.name;
  log.kv("dataset", data.name);
  log.kv("points", data.size());
  log.kv("out", o.out.empty() ? "-" : o.out);

  std::string csv = "dataset,mode,metric,value,fold,seed,gamma,basis_k\n";
  auto emit = [&](const std::string& metric, double value, const std::string& fold, const std::string& gamma,
                  Index basis_k) {
    csv += data.name + "," + o.mode + "," + metric + "," + detail::format12(value) + "," + fold + "," +
           std::to_string(cfg.seed) + "," + gamma + "," + std::to_string(basis_k) + "\n";
  };
  const std::string config_gamma = cfg.gamma ? detail::format12(*cfg.gamma) : "cv";
  if (knn) {
    const EvalReport r = two_fold_cv(data, cfg);
    for (const FoldResult& f : r.folds) {
      const std::string fold = std::to_string(f.fold);
      const std::string g = detail::format12(f.gamma);
      detail::log_summary(log, f.summary, "fold" + fold + ".");
      emit("learned_accuracy", f.learned, fold, g, f.basis_k);
      emit("euclidean_accuracy", f.euclidean, fold, g, f.basis_k);
      if (f.inverse_covariance) emit("inverse_covariance_accuracy", *f.inverse_covariance, fold, g, f.basis_k);
    }
    emit("learned_accuracy", r.accuracy, "mean", config_gamma, r.folds[0].basis_k);
    emit("learned_error", r.error, "mean", config_gamma, r.folds[0].basis_k);
    emit("euclidean_accuracy", r.euclidean_accuracy, "mean", config_gamma, r.folds[0].basis_k);
    if (r.inverse_covariance_accuracy) {
      emit("inverse_covariance_accuracy", *r.inverse_covariance_accuracy, "mean", config_gamma, r.folds[0].basis_k);
    }
  } else {
    const ClusterReport r = cluster_experiment(data, cfg);
    for (const FoldResult& f : r.folds) {
      const std::string fold = std::to_string(f.fold);
      const std::string g = detail::format12(f.gamma);
      detail::log_summary(log, f.summary, "fold" + fold + ".");
      emit("learned_error", f.learned, fold, g, f.basis_k);
      emit("euclidean_error", f.euclidean, fold, g, f.basis_k);
    }
    emit("learned_error", r.error, "mean", config_gamma, r.folds[0].basis_k);
    emit("euclidean_error", r.baseline_error, "mean", config_gamma, r.folds[0].basis_k);
  }
  detail::write_text(o.out, csv, out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log.kv("wall_time_s", detail::format12(secs));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point.

namespace detail {

inline void add_data_flags(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.data, "numeric CSV (one point per row) or, with --kernel precomputed, an n x n kernel");
  cmd->add_option("--labels", d.labels, "file with one integer label per line");
  cmd->add_option("--label-col", d.label_col, "'last': the final CSV column holds integer labels");
  cmd->add_flag("--header", d.header, "skip the first line of CSV inputs");
}

inline void add_learn_flags(CLI::App* cmd, LearnOptions& l) {
  cmd->add_option("--loss", l.loss, "logdet | vonneumann | frobenius")->capture_default_str();
  cmd->add_option("--space", l.space, "auto | linear | kernel")->capture_default_str();
  cmd->add_option("--kernel", l.kernel, "linear | gaussian[:sigma] | precomputed")->capture_default_str();
  cmd->add_option("--gamma", l.gamma, "slack tradeoff: a positive number, inf, or cv")->capture_default_str();
  cmd->add_option("--basis", l.basis, "none | topk:K | classmeans:K | random:K | subset:K | kmeans:K")
      ->capture_default_str();
  cmd->add_option("--tol", l.tol, "convergence tolerance on the dual variables")->capture_default_str();
  cmd->add_option("--max-sweeps", l.max_sweeps, "sweep limit (0 = max(50, 1e5 / #constraints))")
      ->capture_default_str();
  cmd->add_option("--eta", l.eta, "shift of the Frobenius solver")->capture_default_str();
  cmd->add_option("--seed", l.seed, "random seed")->capture_default_str();
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Learn Mahalanobis metrics and kernels from pairwise constraints"};
  app.name("ldml");
  app.require_subcommand(1);

  TrainOptions train;
  auto* tr = app.add_subcommand("train", "learn a metric from labelled data and write a model file");
  detail::add_data_flags(tr, train.data);
  detail::add_learn_flags(tr, train.learn);
  tr->add_option("--per-class", train.per_class, "similar and dissimilar pairs drawn per class")->capture_default_str();
  tr->add_option("--out", train.out, "model file to write");
  tr->add_option("--log", train.log, "also write the log to this file");

  DistanceOptions dist;
  auto* di = app.add_subcommand("distance", "learned squared distances from a model file");
  di->add_option("--model", dist.model, "model file");
  di->add_option("--pairs", dist.pairs, "CSV of index pairs 'i,j'");
  di->add_option("--points", dist.points, "CSV of query points; pairs index its rows");
  di->add_flag("--header", dist.header, "skip the first line of the points CSV");
  di->add_option("--out", dist.out, "output CSV (default: stdout)");

  EvalOptions ev;
  auto* ea = app.add_subcommand("eval", "two-fold k-NN or clustering evaluation");
  detail::add_data_flags(ea, ev.data);
  detail::add_learn_flags(ea, ev.learn);
  ea->add_option("--mode", ev.mode, "knn | cluster")->capture_default_str();
  ea->add_option("--k", ev.k, "neighbours for k-NN")->capture_default_str();
  ea->add_option("--constraints", ev.constraints,
                 "knn: pairs per class and kind (default 100); cluster: random pairs (default 50)");
  ea->add_option("--name", ev.name, "dataset name in the output (default: data file stem)");
  ea->add_option("--out", ev.out, "output CSV (default: stdout)");
  ea->add_option("--log", ev.log, "also write the log to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (tr->parsed()) return cmd_train(train, out, err);
    if (di->parsed()) return cmd_distance(dist, out, err);
    return cmd_eval(ev, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Infeasible& e) {
    err << "error: infeasible: " << e.what() << "\n";
    return kExitFailure;
  } catch (const NumericalFailure& e) {
    err << "error: numerical failure: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace ldml::cli

#endif  // LDML_CLI_HPP
