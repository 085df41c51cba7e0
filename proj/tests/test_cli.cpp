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

#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ldml/cli.hpp"
#include "ldml/model_file.hpp"
#include "support.hpp"

namespace ldml {
namespace {

using testing::TempDir;
using testing::slurp;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ldml");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = testing::blobs(2, 15, 3, 3.0, 31);
    csv_ = dir_.write("train.csv", testing::to_csv(data_.x->matrix(), &data_.labels));
  }

  Result train(std::vector<std::string> extra, const std::string& model) {
    std::vector<std::string> args{"train", "--data", csv_, "--label-col", "last", "--per-class", "5", "--out", model};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  TempDir dir_;
  Dataset data_;
  std::string csv_;
};

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"train", "--data", csv_, "--label-col", "last"}).code, cli::kExitUsage);  // no --out
  EXPECT_EQ(train({"--loss", "hinge"}, dir_.file("m")).code, cli::kExitUsage);
  EXPECT_EQ(train({"--gamma", "-1"}, dir_.file("m")).code, cli::kExitUsage);
  EXPECT_EQ(train({"--loss", "frobenius", "--basis", "topk:2"}, dir_.file("m")).code, cli::kExitUsage);
  EXPECT_EQ(run({"train", "--data", csv_, "--out", dir_.file("m")}).code, cli::kExitUsage);  // no labels
}

TEST_F(Cli, TrainIsByteDeterministic) {
  const std::string a = dir_.file("a.model"), b = dir_.file("b.model");
  const Result ra = train({"--seed", "3"}, a);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(train({"--seed", "3"}, b).code, 0);
  EXPECT_FALSE(slurp(a).empty());
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(ra.err.find("loss=logdet"), std::string::npos);
  EXPECT_NE(ra.err.find("wall_time_s="), std::string::npos);
}

TEST_F(Cli, CrossValidatedGammaIsLogged) {
  const Result r = train({"--gamma", "cv"}, dir_.file("cv.model"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("gamma_used="), std::string::npos);
  const LoadedModel m = load_model(ModelDocument::parse(slurp(dir_.file("cv.model"))));
  EXPECT_EQ(m.kind, "linear");
}

TEST_F(Cli, PrecomputedKernelValidation) {
  const std::string labels = dir_.write("labels.csv", "0\n0\n1\n");
  const std::string asym = dir_.write("asym.csv", "1,0.5,0\n0.4,1,0\n0,0,1\n");
  EXPECT_EQ(run({"train", "--data", asym, "--labels", labels, "--kernel", "precomputed", "--out", dir_.file("m")}).code,
            cli::kExitData);
  const std::string badnum = dir_.write("bad.csv", "1,2\n3,oops\n");
  const Result r = run({"train", "--data", badnum, "--label-col", "last", "--out", dir_.file("m")});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_EQ(run({"train", "--data", dir_.file("nope.csv"), "--label-col", "last", "--out", dir_.file("m")}).code,
            cli::kExitData);
}

TEST_F(Cli, DistanceOnTrainingPairs) {
  const std::string model = dir_.file("k.model");
  ASSERT_EQ(train({"--space", "kernel", "--kernel", "gaussian"}, model).code, 0);
  const std::string pairs = dir_.write("pairs.csv", "0,0\n0,1\n3,20\n");
  const Result r = run({"distance", "--model", model, "--pairs", pairs});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "i,j,distance");
  EXPECT_EQ(rows[1].substr(0, 5), "0,0,0");
  const LoadedModel m = load_model(ModelDocument::parse(slurp(model)));
  const double want = m.oracle.kernel()->training_distance(3, 20);
  EXPECT_NEAR(std::stod(rows[3].substr(5)), want, 1e-12 * std::max(1.0, want));

  const std::string out_of_range = dir_.write("oor.csv", "0,30\n");
  EXPECT_EQ(run({"distance", "--model", model, "--pairs", out_of_range}).code, cli::kExitData);
}

TEST_F(Cli, DistanceOnUnseenPoints) {
  const std::string model = dir_.file("lin.model");
  ASSERT_EQ(train({}, model).code, 0);
  std::mt19937_64 rng(32);
  const Matrix z = testing::gaussian_matrix(3, 4, rng);
  const std::string points = dir_.write("z.csv", testing::to_csv(z));
  const std::string out = dir_.file("d.csv");
  const Result r = run({"distance", "--model", model, "--points", points, "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out));
  ASSERT_EQ(rows.size(), 7u);  // header + 6 pairs i<j
  const Matrix w = ModelDocument::parse(slurp(model)).matrix("W");
  int row = 1;
  for (Index i = 0; i < 4; ++i) {
    for (Index j = i + 1; j < 4; ++j, ++row) {
      const Vector diff = z.col(i) - z.col(j);
      const double want = diff.dot(w * diff);
      const std::string& line = rows[static_cast<std::size_t>(row)];
      EXPECT_EQ(line.substr(0, 4), std::to_string(i) + "," + std::to_string(j) + ",");
      EXPECT_NEAR(std::stod(line.substr(4)), want, 1e-10 * std::max(1.0, want));
    }
  }
  const std::string wrong_dim = dir_.write("w.csv", "1,2\n3,4\n");
  EXPECT_EQ(run({"distance", "--model", model, "--points", wrong_dim}).code, cli::kExitData);
}

TEST_F(Cli, EvalSchemaAndDeterminism) {
  const std::vector<std::string> args{"eval", "--data", csv_, "--label-col", "last", "--constraints", "5",
                                      "--k", "3", "--gamma", "1", "--name", "blobs"};
  const Result a = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(run(args).out, a.out);
  const auto rows = lines(a.out);
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], "dataset,mode,metric,value,fold,seed,gamma,basis_k");
  bool saw_mean = false;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::vector<std::string> f;
    std::istringstream in(rows[r]);
    for (std::string cell; std::getline(in, cell, ',');) f.push_back(cell);
    ASSERT_EQ(f.size(), 8u) << rows[r];
    EXPECT_EQ(f[0], "blobs");
    EXPECT_EQ(f[1], "knn");
    const double v = std::stod(f[3]);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    if (f[4] == "mean" && f[2] == "learned_accuracy") {
      saw_mean = true;
      EXPECT_EQ(f[6], "1");
    }
  }
  EXPECT_TRUE(saw_mean);
}

TEST_F(Cli, EvalClusterMode) {
  const Result r = run({"eval", "--data", csv_, "--label-col", "last", "--mode", "cluster", "--constraints", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find(",cluster,learned_error,"), std::string::npos);
  EXPECT_NE(r.out.find(",cluster,euclidean_error,"), std::string::npos);
  EXPECT_EQ(run({"eval", "--data", csv_, "--label-col", "last", "--mode", "spectral"}).code, cli::kExitUsage);
}

}  // namespace
}  // namespace ldml
