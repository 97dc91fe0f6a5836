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

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scprune/linalg.hpp"

namespace scprune::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major float32 tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

struct ConvLayer {
  std::string name;
  Tensor weights;           // [c_out, c_in, k_h, k_w]
  std::vector<float> bias;  // [c_out], or empty when the layer has no bias
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t c_out() const { return weights.dim(0); }
  std::size_t c_in() const { return weights.dim(1); }
  std::size_t k_h() const { return weights.dim(2); }
  std::size_t k_w() const { return weights.dim(3); }

  bool operator==(const ConvLayer&) const = default;
};

struct ReluLayer {
  std::string name;
  bool operator==(const ReluLayer&) const = default;
};

struct MaxPoolLayer {
  std::string name;
  std::size_t kernel = 2;
  std::size_t stride = 2;
  bool operator==(const MaxPoolLayer&) const = default;
};

/// Fully connected layer over the flattened input.
struct FcLayer {
  std::string name;
  Tensor weights;  // [out, in]
  std::vector<float> bias;
  bool operator==(const FcLayer&) const = default;
};

struct BatchNormLayer {
  std::string name;
  std::vector<float> gamma, beta, mean, var;
  float epsilon = 1e-5f;
  bool operator==(const BatchNormLayer&) const = default;
};

using Layer = std::variant<ConvLayer, ReluLayer, MaxPoolLayer, FcLayer, BatchNormLayer>;

const std::string& layer_name(const Layer& layer);
const char* layer_kind(const Layer& layer);

/// Residual block over a contiguous run of the flat layer list. The block
/// input (the tensor feeding its first conv) is added to the raw output of
/// its last conv.
struct BlockSpec {
  std::string block_id;
  std::vector<std::string> conv_layer_names;
  std::size_t prunable_prefix = 2;
  bool operator==(const BlockSpec&) const = default;
};

struct ModelGraph {
  Shape input_shape;
  std::vector<Layer> layers;
  std::vector<BlockSpec> blocks;

  std::optional<std::size_t> find(const std::string& name) const;
  /// Index of `name`; throws kLookup if absent.
  std::size_t index_of(const std::string& name) const;
  const ConvLayer& conv(const std::string& name) const;
  ConvLayer& conv(const std::string& name);

  bool operator==(const ModelGraph&) const = default;
};

/// Output shape of every layer, in order. Throws kShape / kStructure when the
/// graph is inconsistent (including duplicate names and malformed blocks).
std::vector<Shape> infer_shapes(const ModelGraph& model);

inline void validate(const ModelGraph& model) { (void)infer_shapes(model); }

struct ForwardResult {
  Tensor output;
  std::map<std::string, Tensor> captured;
};

/// Single-image forward pass. `captured` holds the raw output of each named
/// layer (for the last conv of a residual block: before the residual add).
ForwardResult forward(const ModelGraph& model, const Tensor& input,
                      const std::set<std::string>& capture = {});

/// Runs layers [0, end) and returns the tensor that feeds layer `end`.
Tensor forward_prefix(const ModelGraph& model, const Tensor& input, std::size_t end);

/// Unrolls a [c, H, W] input into [H_out·W_out, c·k_h·k_w]; columns are
/// channel-major, then row-major within the kernel.
linalg::Matrix im2col(const Tensor& input, std::size_t k_h, std::size_t k_w, std::size_t stride,
                      std::size_t padding);

/// Direct convolution of a [c, H, W] tensor by one conv layer.
Tensor conv2d(const ConvLayer& conv, const Tensor& input);

/// Absorbs every BatchNormLayer into the conv right before it.
ModelGraph fold_batchnorm(const ModelGraph& model);

struct Costs {
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

struct LayerCost {
  std::string name;
  std::string kind;
  Shape output_shape;
  Costs costs;
};

/// Multiply-add counts as 2 ops; pooling, ReLU and batch norm are free.
std::vector<LayerCost> layer_costs(const ModelGraph& model);
Costs count_costs(const ModelGraph& model);

}  // namespace scprune::nn
