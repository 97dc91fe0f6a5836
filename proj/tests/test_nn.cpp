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

#include <cmath>

#include "models.hpp"
#include "scprune/error.hpp"
#include "scprune/linalg.hpp"
#include "scprune/nn.hpp"

namespace scprune::nn {
namespace {

using testing::max_abs_diff;
using testing::random_conv;
using testing::random_tensor;

// Direct nested-loop convolution in float64, independent of conv2d.
Tensor naive_conv(const ConvLayer& l, const Tensor& x) {
  const std::size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t kh = l.k_h(), kw = l.k_w(), p = l.padding, s = l.stride;
  const std::size_t ho = (h + 2 * p - kh) / s + 1, wo = (w + 2 * p - kw) / s + 1;
  Tensor out({l.c_out(), ho, wo});
  for (std::size_t o = 0; o < l.c_out(); ++o)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx) {
        double acc = l.bias.empty() ? 0.0 : l.bias[o];
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t b = 0; b < kw; ++b) {
              const auto iy = static_cast<std::ptrdiff_t>(y * s + a) - static_cast<std::ptrdiff_t>(p);
              const auto ix = static_cast<std::ptrdiff_t>(xx * s + b) - static_cast<std::ptrdiff_t>(p);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix >= static_cast<std::ptrdiff_t>(w))
                continue;
              acc += double{l.weights[((o * c_in + c) * kh + a) * kw + b]} * x[(c * h + iy) * w + ix];
            }
        out[(o * ho + y) * wo + xx] = static_cast<float>(acc);
      }
  return out;
}

Tensor im2col_conv(const ConvLayer& l, const Tensor& x) {
  const linalg::Matrix cols = im2col(x, l.k_h(), l.k_w(), l.stride, l.padding);
  const std::size_t fan = l.c_in() * l.k_h() * l.k_w();
  linalg::Matrix wt(fan, l.c_out());
  for (std::size_t o = 0; o < l.c_out(); ++o)
    for (std::size_t f = 0; f < fan; ++f) wt(f, o) = l.weights[o * fan + f];
  const linalg::Matrix y = linalg::matmul(cols, wt);
  const std::size_t hw = cols.rows();
  const std::size_t ho = (x.dim(1) + 2 * l.padding - l.k_h()) / l.stride + 1;
  Tensor out({l.c_out(), ho, hw / ho});
  for (std::size_t o = 0; o < l.c_out(); ++o)
    for (std::size_t r = 0; r < hw; ++r) out[o * hw + r] = static_cast<float>(y(r, o) + (l.bias.empty() ? 0 : l.bias[o]));
  return out;
}

ModelGraph one_layer(Layer layer, Shape input) {
  ModelGraph m;
  m.input_shape = std::move(input);
  m.layers.push_back(std::move(layer));
  return m;
}

TEST(Forward, IdentityKernel) {
  ConvLayer conv{"c", Tensor({1, 1, 1, 1}, {1.0f}), {0.0f}, 1, 0};
  Rng rng(1);
  const Tensor x = random_tensor({1, 5, 4}, rng);
  EXPECT_EQ(forward(one_layer(conv, {1, 5, 4}), x).output, x);
}

TEST(Forward, Relu) {
  const Tensor x({3, 1, 1}, {-1.0f, 2.0f, 0.0f});
  EXPECT_EQ(forward(one_layer(ReluLayer{"r"}, {3, 1, 1}), x).output, Tensor({3, 1, 1}, {0.0f, 2.0f, 0.0f}));
}

TEST(Forward, MaxPoolAndFc) {
  const Tensor x({1, 2, 4}, {1, 5, 2, 0, 3, 4, 7, 8});
  const auto pooled = forward(one_layer(MaxPoolLayer{"p", 2, 2}, {1, 2, 4}), x).output;
  EXPECT_EQ(pooled, Tensor({1, 1, 2}, {5, 8}));
  FcLayer fc{"fc", Tensor({1, 2}, {2.0f, -1.0f}), {0.5f}};
  EXPECT_EQ(forward(one_layer(fc, {1, 1, 2}), pooled).output, Tensor({1}, {2.5f}));
}

TEST(Forward, TwoConvNetworkMatchesNestedLoops) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ModelGraph m;
    m.input_shape = {3, 9, 7};
    m.layers.emplace_back(random_conv("a", 5, 3, 3, rng, 1, 1));
    m.layers.emplace_back(random_conv("b", 4, 5, 3, rng, 2, 0));
    const Tensor x = random_tensor(m.input_shape, rng);
    const Tensor expected = naive_conv(m.conv("b"), naive_conv(m.conv("a"), x));
    EXPECT_LE(max_abs_diff(forward(m, x).output, expected), 1e-4);
  }
}

TEST(Forward, CaptureReturnsRawLayerOutput) {
  const ModelGraph m = testing::toy_vgg(3);
  const Tensor x = testing::random_inputs(m.input_shape, 1, 4)[0];
  const auto r = forward(m, x, {"conv2", "relu2"});
  ASSERT_EQ(r.captured.size(), 2u);
  bool negative = false;
  for (float v : r.captured.at("conv2").data()) negative |= v < 0;
  EXPECT_TRUE(negative);
  for (float v : r.captured.at("relu2").data()) EXPECT_GE(v, 0.0f);
  EXPECT_EQ(r.output.shape(), (Shape{4}));
}

TEST(Forward, UnknownCaptureIsLookupError) {
  const ModelGraph m = testing::toy_vgg(3);
  try {
    forward(m, Tensor(m.input_shape), {"nope"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLookup);
  }
}

TEST(Forward, WrongInputShapeIsShapeError) {
  const ModelGraph m = testing::toy_vgg(3);
  try {
    forward(m, Tensor({3, 8, 8}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(Forward, ResidualBlockAddsInputAfterLastConv) {
  const ModelGraph m = testing::toy_resnet(5);
  const Tensor x = testing::random_inputs(m.input_shape, 1, 6)[0];
  const auto r = forward(m, x, {"stem_relu", "block1_conv3", "block1_relu3"});
  const auto& skip = r.captured.at("stem_relu");
  const auto& raw = r.captured.at("block1_conv3");
  const auto& after = r.captured.at("block1_relu3");
  for (std::size_t i = 0; i < skip.size(); ++i) {
    EXPECT_FLOAT_EQ(after[i], std::max(0.0f, raw[i] + skip[i]));
  }
}

TEST(Forward, PrefixFeedsRequestedLayer) {
  const ModelGraph m = testing::toy_vgg(8);
  const Tensor x = testing::random_inputs(m.input_shape, 1, 9)[0];
  const auto r = forward(m, x, {"pool1"});
  EXPECT_EQ(forward_prefix(m, x, m.index_of("conv3")), r.captured.at("pool1"));
  EXPECT_EQ(forward_prefix(m, x, 0), x);
}

TEST(Forward, ConvolutionIsLinearWithoutBias) {
  Rng rng(11);
  ModelGraph m = one_layer(random_conv("c", 4, 3, 3, rng, 1, 1, false), {3, 6, 6});
  const Tensor a = random_tensor(m.input_shape, rng), b = random_tensor(m.input_shape, rng);
  Tensor mix(m.input_shape);
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0f * a[i] - 3.0f * b[i];
  const Tensor ya = forward(m, a).output, yb = forward(m, b).output, ym = forward(m, mix).output;
  for (std::size_t i = 0; i < ym.size(); ++i) EXPECT_NEAR(ym[i], 2.0f * ya[i] - 3.0f * yb[i], 1e-3);
}

TEST(Im2col, OneByOneIsReshape) {
  Rng rng(2);
  const Tensor x = random_tensor({3, 2, 4}, rng);
  const auto m = im2col(x, 1, 1, 1, 0);
  ASSERT_EQ(m.rows(), 8u);
  ASSERT_EQ(m.cols(), 3u);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(m(r, c), x[c * 8 + r]);
}

TEST(Im2col, HandUnrolling) {
  const auto m = im2col(Tensor({1, 2, 2}, {1, 2, 3, 4}), 2, 2, 1, 0);
  EXPECT_EQ(m, linalg::Matrix(1, 4, {1, 2, 3, 4}));
}

TEST(Im2col, KernelLargerThanInputIsShapeError) {
  EXPECT_THROW(im2col(Tensor({1, 2, 2}), 3, 3, 1, 0), Error);
}

TEST(Im2col, MatmulMatchesDirectConvolutionOnRandomShapes) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c_in = 1 + rng.index(4), c_out = 1 + rng.index(4), k = 1 + rng.index(3);
    const std::size_t stride = 1 + rng.index(2), pad = rng.index(2);
    const std::size_t h = k + rng.index(6), w = k + rng.index(6);
    const ConvLayer l = random_conv("c", c_out, c_in, k, rng, stride, pad);
    const Tensor x = random_tensor({c_in, h, w}, rng);
    const Tensor direct = naive_conv(l, x);
    EXPECT_LE(max_abs_diff(im2col_conv(l, x), direct), 1e-4);
    EXPECT_LE(max_abs_diff(conv2d(l, x), direct), 1e-4);
  }
}

TEST(FoldBatchnorm, IdentityNormalization) {
  Rng rng(4);
  ModelGraph m = one_layer(random_conv("c", 2, 1, 3, rng), {1, 5, 5});
  m.layers.emplace_back(BatchNormLayer{"bn", {1, 1}, {0, 0}, {0, 0}, {1, 1}, 0.0f});
  const ModelGraph f = fold_batchnorm(m);
  ASSERT_EQ(f.layers.size(), 1u);
  EXPECT_EQ(std::get<ConvLayer>(f.layers[0]), std::get<ConvLayer>(m.layers[0]));
}

TEST(FoldBatchnorm, PureScaleDoubles) {
  Rng rng(4);
  ModelGraph m = one_layer(random_conv("c", 2, 1, 3, rng), {1, 5, 5});
  m.layers.emplace_back(BatchNormLayer{"bn", {2, 2}, {0, 0}, {0, 0}, {1, 1}, 0.0f});
  const auto& before = std::get<ConvLayer>(m.layers[0]);
  const ModelGraph folded = fold_batchnorm(m);
  const auto& after = std::get<ConvLayer>(folded.layers[0]);
  for (std::size_t i = 0; i < before.weights.size(); ++i) EXPECT_EQ(after.weights[i], 2.0f * before.weights[i]);
  for (std::size_t i = 0; i < before.bias.size(); ++i) EXPECT_EQ(after.bias[i], 2.0f * before.bias[i]);
}

TEST(FoldBatchnorm, ForwardEquivalence) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ModelGraph m = testing::toy_resnet(seed, true);
    const ModelGraph f = fold_batchnorm(m);
    for (const auto& layer : f.layers) EXPECT_FALSE(std::holds_alternative<BatchNormLayer>(layer));
    for (const auto& x : testing::random_inputs(m.input_shape, 3, seed + 100)) {
      EXPECT_LE(max_abs_diff(forward(m, x).output, forward(f, x).output), 1e-4);
    }
  }
}

TEST(FoldBatchnorm, AddsBiasWhenConvHasNone) {
  Rng rng(4);
  ModelGraph m = one_layer(random_conv("c", 2, 1, 1, rng, 1, 0, false), {1, 3, 3});
  m.layers.emplace_back(BatchNormLayer{"bn", {1, 1}, {0.5f, -0.5f}, {0, 0}, {1, 1}, 0.0f});
  const ModelGraph folded = fold_batchnorm(m);
  const auto& conv = std::get<ConvLayer>(folded.layers[0]);
  EXPECT_EQ(conv.bias, (std::vector<float>{0.5f, -0.5f}));
}

TEST(FoldBatchnorm, WithoutPrecedingConvIsStructureError) {
  ModelGraph m = one_layer(ReluLayer{"r"}, {1, 3, 3});
  m.layers.emplace_back(BatchNormLayer{"bn", {1}, {0}, {0}, {1}, 1e-5f});
  try {
    fold_batchnorm(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStructure);
  }
}

TEST(Costs, SingleOneByOneConv) {
  ConvLayer conv{"c", Tensor({1, 1, 1, 1}, {1.0f}), {}, 1, 0};
  const Costs c = count_costs(one_layer(conv, {1, 4, 4}));
  EXPECT_EQ(c.params, 1u);
  EXPECT_EQ(c.flops, 32u);
}

TEST(Costs, SingleConvToy) {
  // 4 filters of 3x3x3 plus bias; 8x8 output.
  const Costs c = count_costs(testing::single_conv());
  EXPECT_EQ(c.params, 4u * 27u + 4u);
  EXPECT_EQ(c.flops, 2u * 3u * 9u * 4u * 64u);
}

TEST(Costs, EmptyModel) {
  ModelGraph m;
  m.input_shape = {3, 4, 4};
  const Costs c = count_costs(m);
  EXPECT_EQ(c.params, 0u);
  EXPECT_EQ(c.flops, 0u);
}

TEST(Costs, Vgg16MatchesPublishedFigures) {
  const Costs c = count_costs(testing::vgg16());
  EXPECT_EQ(c.params, 138357544u);
  EXPECT_NEAR(static_cast<double>(c.params), 138.34e6, 0.01 * 138.34e6);
  EXPECT_NEAR(static_cast<double>(c.flops), 30.94e9, 0.05 * 30.94e9);
}

TEST(Costs, BatchnormCountsScaleAndShift) {
  const auto layers = layer_costs(testing::toy_resnet(1, true));
  for (const auto& l : layers) {
    if (l.kind == "batchnorm") {
      EXPECT_EQ(l.costs.params, 2 * l.output_shape[0]);
      EXPECT_EQ(l.costs.flops, 0u);
    }
  }
}

TEST(Validate, DuplicateNamesAreStructureErrors) {
  ModelGraph m = one_layer(ReluLayer{"r"}, {1, 3, 3});
  m.layers.emplace_back(ReluLayer{"r"});
  try {
    validate(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStructure);
  }
}

TEST(Validate, BlockReferencingUnknownLayerIsLookupError) {
  ModelGraph m = testing::toy_resnet(2);
  m.blocks[0].conv_layer_names[1] = "ghost";
  try {
    validate(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLookup);
  }
}

TEST(Validate, ResidualShapeMismatchIsShapeError) {
  ModelGraph m = testing::toy_resnet(2);
  m.blocks[0].conv_layer_names.pop_back();  // block would end at a 6-channel conv
  m.blocks[0].prunable_prefix = 1;
  EXPECT_THROW(validate(m), Error);
}

}  // namespace
}  // namespace scprune::nn
