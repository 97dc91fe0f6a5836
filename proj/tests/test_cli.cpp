/* Copyright (c) 2026 The scprune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "models.hpp"
#include "scprune/io.hpp"

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = scprune::testing::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    model_ = scprune::testing::toy_vgg(3);
    scprune::io::save_model(model_, dir_ / "model.scpm");
    const auto inputs = scprune::testing::random_inputs(model_.input_shape, 8, 4);
    scprune::testing::write_dataset(dir_ / "calib", inputs);
    labels_.clear();
    for (const auto& x : inputs) labels_.push_back(scprune::testing::argmax(scprune::nn::forward(model_, x).output));
    scprune::testing::write_labels(dir_ / "labels.json", labels_);
    scprune::io::write_text(dir_ / "empty.json", "{}");
    scprune::io::write_text(dir_ / "half.json",
                            R"({"layers":[{"lower":"conv2","ratio":2},{"lower":"conv3","ratio":2},)"
                            R"({"lower":"conv4","ratio":2}]})");
    scprune::io::write_text(dir_ / "fast.json", R"({"kmeans_restarts": 3})");
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(SCPRUNE_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }
  std::string p(const char* name) const { return (dir_ / name).string(); }

  fs::path dir_;
  scprune::nn::ModelGraph model_;
  std::vector<std::size_t> labels_;
};

TEST_F(CliTest, EmptyStrategyRoundTripsModel) {
  const CliRun r = run("prune --model " + p("model.scpm") + " --calib " + p("calib") + " --strategy " + p("empty.json") +
                    " --out " + p("out.scpm") + " --report " + p("report.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(scprune::io::load_model(dir_ / "out.scpm"), model_);
  const Json report = Json::parse(slurp(dir_ / "report.json"));
  EXPECT_TRUE(report["records"].empty());
  EXPECT_EQ(report["toolkit"]["name"], "scprune");
  EXPECT_EQ(report["config"]["seed"], 42);
}

TEST_F(CliTest, UniformHalvingReportsRatioTwo) {
  const CliRun r = run("prune --model " + p("model.scpm") + " --calib " + p("calib") + " --strategy " + p("half.json") +
                    " --out " + p("out.scpm") + " --report " + p("report.json") + " --config " + p("fast.json") +
                    " --seed 7 --threads 2");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json report = Json::parse(slurp(dir_ / "report.json"));
  ASSERT_EQ(report["records"].size(), 3u);
  for (const auto& rec : report["records"]) EXPECT_EQ(rec["speed_up_ratio"].get<double>(), 2.0);
  EXPECT_EQ(report["config"]["seed"], 7);
  EXPECT_EQ(report["config"]["threads"], 2);
  EXPECT_EQ(report["config"]["kmeans_restarts"], 3);
}

TEST_F(CliTest, MissingCalibrationDirectory) {
  const CliRun r = run("prune --model " + p("model.scpm") + " --calib " + p("nocalib") + " --strategy " + p("half.json") +
                    " --out " + p("out.scpm") + " --report " + p("report.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nocalib"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "out.scpm"));
  EXPECT_FALSE(fs::exists(dir_ / "report.json"));
}

TEST_F(CliTest, BadInputsExitTwoWithoutOutputs) {
  scprune::io::write_text(dir_ / "bad_strategy.json", R"({"layers":[{"lower":"fc","ratio":2}]})");
  scprune::io::write_text(dir_ / "bad_config.json", R"({"alpha": -1})");
  scprune::io::write_text(dir_ / "junk.scpm", "XXXX");
  const std::string tail = " --out " + p("out.scpm") + " --report " + p("report.json");
  EXPECT_EQ(run("prune --model " + p("model.scpm") + " --calib " + p("calib") + " --strategy " +
                p("bad_strategy.json") + tail)
                .code,
            2);
  EXPECT_EQ(run("prune --model " + p("model.scpm") + " --calib " + p("calib") + " --strategy " + p("half.json") +
                " --config " + p("bad_config.json") + tail)
                .code,
            2);
  const CliRun junk = run("prune --model " + p("junk.scpm") + " --calib " + p("calib") + " --strategy " +
                       p("half.json") + tail);
  EXPECT_EQ(junk.code, 2);
  EXPECT_NE(junk.err.find("format"), std::string::npos) << junk.err;
  EXPECT_EQ(run("prune --model " + p("model.scpm")).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_FALSE(fs::exists(dir_ / "out.scpm"));
  EXPECT_FALSE(fs::exists(dir_ / "report.json"));
}

TEST_F(CliTest, DegenerateCalibrationExitsThree) {
  // All-zero inputs make every feature map constant: no channel correlates
  // with another after the data matrix drops to zero columns.
  scprune::nn::ModelGraph m;
  m.input_shape = {1, 3, 3};
  scprune::nn::ConvLayer a{"a", scprune::nn::Tensor({3, 1, 1, 1}, {1.0f, 0.0f, 0.0f}), {0, 0, 0}, 1, 0};
  scprune::nn::ConvLayer b{"b", scprune::nn::Tensor({1, 3, 1, 1}, {1.0f, 1.0f, 1.0f}), {0}, 1, 0};
  m.layers.emplace_back(a);
  m.layers.emplace_back(b);
  scprune::io::save_model(m, dir_ / "degenerate.scpm");
  scprune::nn::Tensor x({1, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) x[i] = (i == 4) ? 1.0f : 0.0f;
  scprune::testing::write_dataset(dir_ / "onehot", {x});
  scprune::io::write_text(dir_ / "s.json", R"({"layers":[{"lower":"b","c_prime":2}]})");
  const CliRun r = run("prune --model " + p("degenerate.scpm") + " --calib " + p("onehot") + " --strategy " +
                    p("s.json") + " --out " + p("out.scpm") + " --report " + p("report.json"));
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "out.scpm"));
}

TEST_F(CliTest, EvalPrintsFourDigits) {
  CliRun r = run("eval --model " + p("model.scpm") + " --data " + p("calib") + " --labels " + p("labels.json") +
              " --topk 1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "1.0000\n");
  std::vector<std::size_t> wrong = labels_;
  for (std::size_t i = 0; i < 3; ++i) wrong[i] = (wrong[i] + 1) % 4;
  scprune::testing::write_labels(dir_ / "wrong.json", wrong);
  r = run("eval --model " + p("model.scpm") + " --data " + p("calib") + " --labels " + p("wrong.json") + " --topk 1");
  EXPECT_EQ(r.out, "0.6250\n");
  r = run("eval --model " + p("model.scpm") + " --data " + p("calib") + " --labels " + p("wrong.json") + " --topk 4");
  EXPECT_EQ(r.out, "1.0000\n");
  EXPECT_EQ(run("eval --model " + p("model.scpm") + " --data " + p("nodata") + " --labels " + p("labels.json")).code,
            2);
}

TEST_F(CliTest, AccuracyDeltaMatchesTwoEvalRuns) {
  const CliRun r = run("prune --model " + p("model.scpm") + " --calib " + p("calib") + " --strategy " + p("half.json") +
                    " --out " + p("out.scpm") + " --report " + p("report.json") + " --config " + p("fast.json") +
                    " --eval-data " + p("calib") + " --labels " + p("labels.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Json report = Json::parse(slurp(dir_ / "report.json"));
  // Both commands default to top-1.
  const CliRun before = run("eval --model " + p("model.scpm") + " --data " + p("calib") + " --labels " +
                            p("labels.json"));
  const CliRun after = run("eval --model " + p("out.scpm") + " --data " + p("calib") + " --labels " + p("labels.json"));
  const double delta = std::stod(before.out) - std::stod(after.out);
  EXPECT_NEAR(report["accuracy"]["delta"].get<double>(), delta, 1e-4);
}

TEST_F(CliTest, InspectSingleConvAndEmptyModel) {
  scprune::io::save_model(scprune::testing::single_conv(), dir_ / "single.scpm");
  CliRun r = run("inspect --model " + p("single.scpm"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total_params 112 "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("total_flops 13824 "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("[4,8,8]"), std::string::npos) << r.out;

  scprune::nn::ModelGraph empty;
  empty.input_shape = {3, 4, 4};
  scprune::io::save_model(empty, dir_ / "empty.scpm");
  r = run("inspect --model " + p("empty.scpm"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total_params 0 "), std::string::npos);
  EXPECT_NE(r.out.find("total_flops 0 "), std::string::npos);

  scprune::io::write_text(dir_ / "junk.scpm", "XXXX");
  EXPECT_EQ(run("inspect --model " + p("junk.scpm")).code, 2);
}

TEST_F(CliTest, CompareGrid) {
  const CliRun r = run("compare --model " + p("model.scpm") + " --calib " + p("calib") +
                    " --layer conv3 --ratios 2,4 --selectors firstk,random,maxresponse,kmeans,ssc --report " +
                    p("cmp.json") + " --config " + p("fast.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Json doc = Json::parse(slurp(dir_ / "cmp.json"));
  EXPECT_EQ(doc["rows"].size(), 10u);
  EXPECT_EQ(doc["upper_layer"], "conv2");

  const CliRun ones = run("compare --model " + p("model.scpm") + " --calib " + p("calib") +
                       " --layer conv3 --ratios 1 --selectors firstk,random,maxresponse,kmeans,ssc --report " +
                       p("ones.json"));
  ASSERT_EQ(ones.code, 0) << ones.err;
  for (const auto& row : Json::parse(slurp(dir_ / "ones.json"))["rows"]) {
    EXPECT_LE(row["recon_error_after"].get<double>(), 1e-4);
  }

  const CliRun bad = run("compare --model " + p("model.scpm") + " --calib " + p("calib") +
                      " --layer conv3 --ratios 2 --selectors firstk,oracle --report " + p("bad.json"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("oracle"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "bad.json"));
}

TEST_F(CliTest, SameSeedSameBytes) {
  const std::string base = "prune --model " + p("model.scpm") + " --calib " + p("calib") + " --strategy " +
                           p("half.json") + " --config " + p("fast.json") + " --seed 11";
  ASSERT_EQ(run(base + " --out " + p("a.scpm") + " --report " + p("a.json")).code, 0);
  ASSERT_EQ(run(base + " --out " + p("b.scpm") + " --report " + p("b.json")).code, 0);
  EXPECT_EQ(slurp(dir_ / "a.scpm"), slurp(dir_ / "b.scpm"));
  EXPECT_EQ(slurp(dir_ / "a.json"), slurp(dir_ / "b.json"));
}

}  // namespace
