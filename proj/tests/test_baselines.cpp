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

#include "models.hpp"
#include "scprune/baselines.hpp"
#include "scprune/error.hpp"

namespace scprune::baselines {
namespace {

using nn::Tensor;

Tensor filters_with_sums(const std::vector<float>& sums) {
  // One-weight filters whose absolute sums are `sums`, alternating sign.
  std::vector<float> data;
  for (std::size_t i = 0; i < sums.size(); ++i) data.push_back(i % 2 ? -sums[i] : sums[i]);
  return Tensor({sums.size(), 1, 1, 1}, data);
}

TEST(ParseSelector, KnownNamesAndSeeds) {
  EXPECT_EQ(parse_selector("firstk", 42).kind, SelectorKind::kFirstK);
  EXPECT_EQ(parse_selector("maxresponse", 42).kind, SelectorKind::kMaxResponse);
  EXPECT_EQ(parse_selector("ssc", 42).kind, SelectorKind::kSsc);
  const Selector r = parse_selector("random", 42);
  EXPECT_EQ(r.kind, SelectorKind::kRandom);
  EXPECT_EQ(r.seed, 42u);
  EXPECT_EQ(parse_selector("random:7", 42).seed, 7u);
  EXPECT_EQ(parse_selector("kmeans:3", 42).name(), "kmeans:3");
  EXPECT_EQ(parse_selector("ssc", 1).name(), "ssc");
}

TEST(ParseSelector, RejectsUnknownOrMalformed) {
  for (const char* bad : {"magic", "ssc:3", "random:", "random:x1", ""}) {
    try {
      parse_selector(bad, 42);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInput) << bad;
    }
  }
}

TEST(SelectChannels, FirstKKeepsLeadingChannels) {
  const auto r = select_channels({SelectorKind::kFirstK, 42}, filters_with_sums({1, 1, 1, 1}), {}, 2, RunConfig{});
  EXPECT_EQ(r.kind, pruner::ChannelReduction::Kind::kKeep);
  EXPECT_EQ(r.keep, (std::vector<std::size_t>{0, 1}));
}

TEST(SelectChannels, MaxResponseRanksByAbsoluteSum) {
  const auto r = select_channels({SelectorKind::kMaxResponse, 42}, filters_with_sums({0.1f, 5.0f, 3.0f, 0.2f}), {},
                                 2, RunConfig{});
  EXPECT_EQ(r.keep, (std::vector<std::size_t>{1, 2}));
}

TEST(SelectChannels, RandomIsReproducible) {
  const Tensor w = filters_with_sums(std::vector<float>(20, 1.0f));
  const auto a = select_channels({SelectorKind::kRandom, 5}, w, {}, 7, RunConfig{});
  const auto b = select_channels({SelectorKind::kRandom, 5}, w, {}, 7, RunConfig{});
  EXPECT_EQ(a.keep, b.keep);
  EXPECT_EQ(a.keep.size(), 7u);
  EXPECT_TRUE(std::is_sorted(a.keep.begin(), a.keep.end()));
  const auto c = select_channels({SelectorKind::kRandom, 6}, w, {}, 7, RunConfig{});
  EXPECT_NE(a.keep, c.keep);
}

TEST(SelectChannels, ClusteringSelectorsNeedCalibration) {
  const Tensor w = filters_with_sums({1, 2, 3});
  for (auto kind : {SelectorKind::kKMeansRaw, SelectorKind::kSsc}) {
    try {
      select_channels({kind, 42}, w, {}, 2, RunConfig{});
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInput);
    }
  }
}

TEST(SelectChannels, KMeansGroupsDuplicatedMaps) {
  Rng rng(1);
  std::vector<Tensor> maps;
  for (int n = 0; n < 3; ++n) {
    const Tensor base = testing::random_tensor({2, 4, 4}, rng);
    Tensor t({4, 4, 4});
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t i = 0; i < 16; ++i) t[p * 16 + i] = base[(p / 2) * 16 + i];
    maps.push_back(t);
  }
  const auto r = select_channels({SelectorKind::kKMeansRaw, 42}, filters_with_sums({1, 1, 1, 1}), maps, 2,
                                 RunConfig{});
  EXPECT_EQ(r.kind, pruner::ChannelReduction::Kind::kMerge);
  EXPECT_EQ(r.assignment.labels, (std::vector<std::size_t>{0, 0, 1, 1}));
}

TEST(SelectChannels, RejectsBadTarget) {
  const Tensor w = filters_with_sums({1, 2, 3});
  EXPECT_THROW(select_channels({SelectorKind::kFirstK, 42}, w, {}, 4, RunConfig{}), Error);
  EXPECT_THROW(select_channels({SelectorKind::kFirstK, 42}, w, {}, 0, RunConfig{}), Error);
}

std::vector<Selector> all_selectors() {
  return {{SelectorKind::kFirstK, 42},
          {SelectorKind::kRandom, 42},
          {SelectorKind::kMaxResponse, 42},
          {SelectorKind::kKMeansRaw, 42},
          {SelectorKind::kSsc, 42}};
}

TEST(CompareSelectors, GridShapeAndOrder) {
  const nn::ModelGraph m = testing::toy_vgg(2);
  const auto calib = testing::random_inputs(m.input_shape, 6, 3);
  const std::vector<double> ratios = {2.0, 4.0};
  const auto sel = all_selectors();
  const auto table = compare_selectors(m, "conv3", ratios, calib, sel, RunConfig{});
  ASSERT_EQ(table.rows.size(), 10u);
  EXPECT_EQ(table.upper_layer, "conv2");
  EXPECT_EQ(table.rows[0].selector, "firstk");
  EXPECT_EQ(table.rows[1].selector, "firstk");
  EXPECT_EQ(table.rows[1].ratio, 4.0);
  EXPECT_EQ(table.rows[9].selector, "ssc");
  EXPECT_EQ(table.rows[0].c_prime, 8u);
  EXPECT_EQ(table.rows[1].c_prime, 4u);
  for (const auto& row : table.rows) EXPECT_LE(row.recon_error_after, row.recon_error_before);
  EXPECT_FALSE(table.original_accuracy.has_value());
}

TEST(CompareSelectors, RatioOneTiesAtZero) {
  const nn::ModelGraph m = testing::toy_vgg(4);
  const auto calib = testing::random_inputs(m.input_shape, 6, 5);
  const std::vector<double> ratios = {1.0};
  const auto sel = all_selectors();
  for (const auto& row : compare_selectors(m, "conv3", ratios, calib, sel, RunConfig{}).rows) {
    EXPECT_LE(row.recon_error_after, 1e-4) << row.selector;
  }
}

TEST(CompareSelectors, SubspaceClusteringWinsOnPlantedRedundancy) {
  const nn::ModelGraph m = testing::planted_redundancy(6);
  const auto calib = testing::random_inputs(m.input_shape, 16, 7);
  const std::vector<double> ratios = {2.0};
  const auto sel = all_selectors();
  const auto table = compare_selectors(m, "conv3", ratios, calib, sel, RunConfig{});
  const double ssc_error = table.rows.back().recon_error_after;
  EXPECT_LE(ssc_error, 0.01);
  for (const auto& row : table.rows) EXPECT_LE(ssc_error, row.recon_error_after) << row.selector;
}

TEST(CompareSelectors, ReportsAccuracyWhenEvaluating) {
  const nn::ModelGraph m = testing::toy_vgg(8);
  EvalSet eval;
  eval.inputs = testing::random_inputs(m.input_shape, 10, 9);
  for (const auto& x : eval.inputs) eval.labels.push_back(testing::argmax(nn::forward(m, x).output));
  const auto calib = testing::random_inputs(m.input_shape, 6, 10);
  const std::vector<double> ratios = {2.0};
  const std::vector<Selector> sel = {{SelectorKind::kFirstK, 42}};
  const auto table = compare_selectors(m, "conv2", ratios, calib, sel, RunConfig{}, &eval);
  ASSERT_TRUE(table.original_accuracy.has_value());
  EXPECT_DOUBLE_EQ(*table.original_accuracy, 1.0);
  ASSERT_TRUE(table.rows[0].accuracy.has_value());
}

TEST(CompareSelectors, InputErrors) {
  const nn::ModelGraph m = testing::toy_vgg(8);
  const auto calib = testing::random_inputs(m.input_shape, 2, 1);
  const std::vector<double> bad = {0.5};
  const auto sel = all_selectors();
  EXPECT_THROW(compare_selectors(m, "conv3", bad, calib, sel, RunConfig{}), Error);
  const std::vector<double> ok = {2.0};
  EXPECT_THROW(compare_selectors(m, "conv1", ok, calib, sel, RunConfig{}), Error);
  EXPECT_THROW(compare_selectors(m, "conv3", ok, {}, sel, RunConfig{}), Error);
}

}  // namespace
}  // namespace scprune::baselines
