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

// Persisted models: conversion between a trained metric and ModelDocument.

#ifndef LDML_MODEL_FILE_HPP
#define LDML_MODEL_FILE_HPP

#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ldml/error.hpp"
#include "ldml/evaluation.hpp"
#include "ldml/io.hpp"
#include "ldml/iplr.hpp"
#include "ldml/oracle.hpp"
#include "ldml/out_of_sample.hpp"

namespace ldml {

inline constexpr int kModelVersion = 1;

/// A loaded model: the oracle plus the training points it refers to.
struct LoadedModel {
  std::string kind;  // linear | kernel | iplr
  DistanceOracle oracle = DistanceOracle::euclidean();
  std::optional<DataMatrix> train;  // absent for precomputed kernels
  Index train_size = 0;
};

namespace detail {

inline std::string kernel_to_text(const KernelSpec& k) {
  switch (k.kind) {
    case KernelSpec::Kind::linear:
      return "linear";
    case KernelSpec::Kind::gaussian:
      return "gaussian " + format_double(k.sigma);
    case KernelSpec::Kind::precomputed:
      return "precomputed";
  }
  return "linear";
}

inline KernelSpec kernel_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string name;
  in >> name;
  if (name == "linear") return KernelSpec::linear();
  if (name == "precomputed") return KernelSpec::precomputed();
  if (name == "gaussian") {
    std::string sigma;
    in >> sigma;
    const auto v = parse_double(sigma);
    if (!v) throw DataError("model file: bad gaussian bandwidth");
    return KernelSpec::gaussian(*v);
  }
  throw DataError("model file: unknown kernel '" + name + "'");
}

inline Matrix constraints_matrix(const ConstraintSet& cs) {
  Matrix m(static_cast<Index>(cs.size()), 3);
  for (std::size_t k = 0; k < cs.size(); ++k) {
    m(static_cast<Index>(k), 0) = static_cast<double>(cs[k].i);
    m(static_cast<Index>(k), 1) = static_cast<double>(cs[k].j);
    m(static_cast<Index>(k), 2) = cs[k].kind == ConstraintKind::similar ? 0.0 : 1.0;
  }
  return m;
}

}  // namespace detail

/// Serializes a metric trained on `train` (dataset indices). Key order is
/// fixed so equal models give equal bytes.
inline ModelDocument model_document(const TrainedMetric& m, const Dataset& data, std::span<const Index> train,
                                    Loss loss, std::uint64_t seed, double eta) {
  const TrainSummary& s = m.summary;
  const DistanceOracle& o = m.oracle;
  ModelDocument doc;
  std::string kind;
  if (o.iplr_model()) kind = "iplr";
  else if (o.kernel()) kind = "kernel";
  else if (o.w()) kind = "linear";
  else throw InvalidArgument("model_document: nothing to save for a baseline oracle");

  doc.set_int("version", kModelVersion);
  doc.set("kind", kind);
  doc.set("loss", to_string(loss));
  doc.set("space", to_string(s.space));
  doc.set("kernel", detail::kernel_to_text(s.kernel));
  doc.set("threshold_upper", s.thresholds.upper);
  doc.set("threshold_lower", s.thresholds.lower);
  doc.set("gamma", s.gamma);
  doc.set("gamma_cross_validated", s.gamma_cross_validated ? "1" : "0");
  doc.set_int("seed", static_cast<long long>(seed));
  doc.set("converged", s.converged ? "1" : "0");
  doc.set_int("sweeps", s.sweeps);
  doc.set("max_violation", s.max_violation);
  doc.set("jitter_used", s.jitter_used);
  doc.set("eta", o.kernel() ? o.kernel()->eta() : eta);
  doc.set_int("n_train", static_cast<long long>(train.size()));
  doc.set_matrix("constraints", detail::constraints_matrix(s.constraints));
  doc.set_vector("lambda", s.dual.lambda);
  doc.set_vector("xi", s.dual.xi);

  if (kind == "linear") {
    doc.set_matrix("W", o.w()->matrix());
  } else if (kind == "kernel") {
    doc.set_matrix("K0", o.kernel()->k0().matrix());
    doc.set_matrix("M", o.kernel()->dense_m().matrix());
  } else {
    const IPLRModel& ip = *o.iplr_model();
    doc.set("basis_mode", ip.basis.mode == BasisMode::explicit_u ? "explicit_u" : "coefficient_j");
    doc.set_int("basis_k", static_cast<long long>(ip.basis.k));
    if (ip.basis.mode == BasisMode::explicit_u) {
      doc.set_matrix("U", ip.basis.u);
    } else {
      doc.set_matrix("J", ip.basis.j);
      doc.set_matrix("K0", ip.k0->matrix());
    }
    doc.set_matrix("F", ip.f.matrix());
  }
  if (data.has_features()) doc.set_matrix("train_points", data.points(train).matrix().transpose());
  return doc;
}

/// Rebuilds the distance oracle of a saved model.
inline LoadedModel load_model(const ModelDocument& doc) {
  const long long version = doc.integer("version");
  if (version != kModelVersion) throw DataError("model file: unsupported version " + std::to_string(version));
  LoadedModel out;
  out.kind = doc.scalar("kind");
  const KernelSpec spec = detail::kernel_from_text(doc.scalar("kernel"));
  out.train_size = static_cast<Index>(doc.integer("n_train"));
  if (doc.has("train_points")) {
    out.train = DataMatrix::from_rows(doc.matrix("train_points"));
    if (out.train->size() != out.train_size) throw DataError("model file: train_points does not match n_train");
  }
  std::vector<Index> train_idx(static_cast<std::size_t>(out.train_size));
  std::iota(train_idx.begin(), train_idx.end(), Index{0});

  auto square = [&](const std::string& key, Index n) {
    const Matrix& m = doc.matrix(key);
    if (m.rows() != m.cols() || (n >= 0 && m.rows() != n)) throw DataError("model file: '" + key + "' has bad shape");
    return SymMatrix(m);
  };

  if (out.kind == "linear") {
    const SymMatrix w = square("W", out.train ? out.train->dim() : -1);
    out.oracle = DistanceOracle::mahalanobis(w);
  } else if (out.kind == "kernel") {
    const SymMatrix k0 = square("K0", out.train_size);
    const SymMatrix m = square("M", out.train_size);
    auto model = std::make_shared<LearnedKernelModel>(spec, out.train, k0, m, doc.number("jitter_used"),
                                                      doc.number("eta"));
    out.oracle = DistanceOracle::kernel_model(std::move(model), train_idx);
  } else if (out.kind == "iplr") {
    IPLRModel ip;
    const std::string mode = doc.scalar("basis_mode");
    ip.basis.k = static_cast<Index>(doc.integer("basis_k"));
    ip.f = square("F", ip.basis.k);
    if (mode == "explicit_u") {
      ip.basis.mode = BasisMode::explicit_u;
      ip.basis.u = doc.matrix("U");
      if (ip.basis.u.cols() != ip.basis.k) throw DataError("model file: U does not match basis_k");
      out.oracle = DistanceOracle::iplr(std::make_shared<IPLRModel>(std::move(ip)));
    } else if (mode == "coefficient_j") {
      ip.basis.mode = BasisMode::coefficient_j;
      ip.basis.j = doc.matrix("J");
      if (ip.basis.j.cols() != ip.basis.k || ip.basis.j.rows() != out.train_size) {
        throw DataError("model file: J has bad shape");
      }
      ip.k0 = square("K0", out.train_size);
      auto fit = std::make_shared<IPLRModel>(std::move(ip));
      auto model = std::make_shared<LearnedKernelModel>(reconstruct_kernel(*fit, spec, out.train));
      out.oracle = DistanceOracle::kernel_model(std::move(model), train_idx, std::move(fit));
    } else {
      throw DataError("model file: unknown basis_mode '" + mode + "'");
    }
  } else {
    throw DataError("model file: unknown kind '" + out.kind + "'");
  }
  return out;
}

/// Squared distance between training points a and b of a loaded model.
inline double training_pair_distance(const LoadedModel& m, Index a, Index b) {
  if (a < 0 || b < 0 || a >= m.train_size || b >= m.train_size) {
    throw InvalidArgument("pair (" + std::to_string(a) + ", " + std::to_string(b) + ") is outside the " +
                          std::to_string(m.train_size) + " training points");
  }
  if (m.oracle.kernel()) return m.oracle.kernel()->training_distance(a, b);
  if (!m.train) throw InvalidArgument("model holds no training points");
  return m.oracle.distance(m.train->point(a), m.train->point(b));
}

}  // namespace ldml

#endif  // LDML_MODEL_FILE_HPP
