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

#include "scprune/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "scprune/error.hpp"

namespace scprune::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                        const std::string& where) {
  if (stride == 0) fail(ErrorCode::kShape, where + ": stride must be positive");
  if (in + 2 * pad < k) {
    fail(ErrorCode::kShape, where + ": kernel " + std::to_string(k) + " larger than padded input " +
                                std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - k) / stride + 1;
}

// Residual block extents as layer indices: [first conv, last layer before the add].
struct BlockExtent {
  std::size_t begin;
  std::size_t end;
};

std::vector<BlockExtent> block_extents(const ModelGraph& model) {
  std::vector<BlockExtent> extents;
  std::unordered_set<std::string> ids;
  for (const auto& block : model.blocks) {
    const std::string where = "block '" + block.block_id + "'";
    if (!ids.insert(block.block_id).second) fail(ErrorCode::kStructure, "duplicate " + where);
    if (block.conv_layer_names.empty()) fail(ErrorCode::kStructure, where + " has no conv layers");
    if (block.prunable_prefix > block.conv_layer_names.size()) {
      fail(ErrorCode::kStructure, where + ": prunable_prefix exceeds conv count");
    }
    std::optional<std::size_t> previous;
    for (const auto& name : block.conv_layer_names) {
      const auto idx = model.find(name);
      if (!idx) fail(ErrorCode::kLookup, where + " references unknown layer '" + name + "'");
      if (!std::holds_alternative<ConvLayer>(model.layers[*idx])) {
        fail(ErrorCode::kStructure, where + ": layer '" + name + "' is not a conv layer");
      }
      if (previous && *idx <= *previous) fail(ErrorCode::kStructure, where + ": conv layers out of order");
      previous = *idx;
    }
    BlockExtent extent{model.index_of(block.conv_layer_names.front()), *previous};
    while (extent.end + 1 < model.layers.size() &&
           std::holds_alternative<BatchNormLayer>(model.layers[extent.end + 1])) {
      ++extent.end;
    }
    extents.push_back(extent);
  }
  std::sort(extents.begin(), extents.end(),
            [](const BlockExtent& a, const BlockExtent& b) { return a.begin < b.begin; });
  for (std::size_t i = 1; i < extents.size(); ++i) {
    if (extents[i].begin <= extents[i - 1].end) fail(ErrorCode::kStructure, "residual blocks overlap");
  }
  return extents;
}

Shape layer_output_shape(const Layer& layer, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const ConvLayer& l) -> Shape {
            const std::string where = "conv '" + l.name + "'";
            if (l.weights.rank() != 4) fail(ErrorCode::kShape, where + ": weights must be rank 4");
            if (!l.bias.empty() && l.bias.size() != l.c_out()) {
              fail(ErrorCode::kShape, where + ": bias length does not match c_out");
            }
            if (in.size() != 3 || in[0] != l.c_in()) {
              fail(ErrorCode::kShape, where + ": expects [" + std::to_string(l.c_in()) + ",H,W] input, got " +
                                          shape_string(in));
            }
            return {l.c_out(), conv_extent(in[1], l.k_h(), l.stride, l.padding, where),
                    conv_extent(in[2], l.k_w(), l.stride, l.padding, where)};
          },
          [&](const ReluLayer&) -> Shape { return in; },
          [&](const MaxPoolLayer& l) -> Shape {
            const std::string where = "maxpool '" + l.name + "'";
            if (in.size() != 3) fail(ErrorCode::kShape, where + ": expects rank-3 input");
            if (l.kernel == 0) fail(ErrorCode::kShape, where + ": kernel must be positive");
            return {in[0], conv_extent(in[1], l.kernel, l.stride, 0, where),
                    conv_extent(in[2], l.kernel, l.stride, 0, where)};
          },
          [&](const FcLayer& l) -> Shape {
            const std::string where = "fc '" + l.name + "'";
            if (l.weights.rank() != 2) fail(ErrorCode::kShape, where + ": weights must be rank 2");
            if (shape_size(in) != l.weights.dim(1)) {
              fail(ErrorCode::kShape, where + ": expects " + std::to_string(l.weights.dim(1)) +
                                          " inputs, got " + shape_string(in));
            }
            if (!l.bias.empty() && l.bias.size() != l.weights.dim(0)) {
              fail(ErrorCode::kShape, where + ": bias length does not match outputs");
            }
            return {l.weights.dim(0)};
          },
          [&](const BatchNormLayer& l) -> Shape {
            const std::string where = "batchnorm '" + l.name + "'";
            const std::size_t c = l.gamma.size();
            if (l.beta.size() != c || l.mean.size() != c || l.var.size() != c) {
              fail(ErrorCode::kShape, where + ": parameter lengths differ");
            }
            if (in.empty() || in[0] != c) fail(ErrorCode::kShape, where + ": channel count mismatch");
            return in;
          },
      },
      layer);
}

void relu_inplace(Tensor& t) {
  for (float& v : t.data()) v = v > 0.0f ? v : 0.0f;
}

Tensor maxpool(const MaxPoolLayer& l, const Tensor& in) {
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t ho = (h - l.kernel) / l.stride + 1, wo = (w - l.kernel) / l.stride + 1;
  Tensor out({c, ho, wo});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        float best = in[(ch * h + oy * l.stride) * w + ox * l.stride];
        for (std::size_t ky = 0; ky < l.kernel; ++ky)
          for (std::size_t kx = 0; kx < l.kernel; ++kx)
            best = std::max(best, in[(ch * h + oy * l.stride + ky) * w + ox * l.stride + kx]);
        out[(ch * ho + oy) * wo + ox] = best;
      }
  return out;
}

Tensor fully_connected(const FcLayer& l, const Tensor& in) {
  const std::size_t out_n = l.weights.dim(0), in_n = l.weights.dim(1);
  Tensor out({out_n});
  for (std::size_t o = 0; o < out_n; ++o) {
    float acc = l.bias.empty() ? 0.0f : l.bias[o];
    const float* row = l.weights.data().data() + o * in_n;
    for (std::size_t i = 0; i < in_n; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
  return out;
}

Tensor batchnorm(const BatchNormLayer& l, const Tensor& in) {
  Tensor out = in;
  const std::size_t c = in.dim(0);
  const std::size_t plane = in.size() / c;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float scale = l.gamma[ch] / std::sqrt(l.var[ch] + l.epsilon);
    for (std::size_t i = 0; i < plane; ++i) {
      float& v = out[ch * plane + i];
      v = (v - l.mean[ch]) * scale + l.beta[ch];
    }
  }
  return out;
}

Tensor apply_layer(const Layer& layer, const Tensor& in) {
  return std::visit(Overloaded{
                        [&](const ConvLayer& l) { return conv2d(l, in); },
                        [&](const ReluLayer&) {
                          Tensor out = in;
                          relu_inplace(out);
                          return out;
                        },
                        [&](const MaxPoolLayer& l) { return maxpool(l, in); },
                        [&](const FcLayer& l) { return fully_connected(l, in); },
                        [&](const BatchNormLayer& l) { return batchnorm(l, in); },
                    },
                    layer);
}

// Runs layers [0, end); optionally records raw outputs of captured layers.
Tensor run_layers(const ModelGraph& model, const Tensor& input, std::size_t end,
                  const std::set<std::string>* capture, std::map<std::string, Tensor>* captured) {
  if (input.shape() != model.input_shape) {
    fail(ErrorCode::kShape, "forward: input shape " + shape_string(input.shape()) + " != model input " +
                                shape_string(model.input_shape));
  }
  (void)infer_shapes(model);
  const auto extents = block_extents(model);

  Tensor current = input;
  std::optional<Tensor> residual;
  std::size_t next_block = 0;
  for (std::size_t i = 0; i < end; ++i) {
    if (next_block < extents.size() && extents[next_block].begin == i) residual = current;
    current = apply_layer(model.layers[i], current);
    if (capture && capture->count(layer_name(model.layers[i]))) {
      (*captured)[layer_name(model.layers[i])] = current;
    }
    if (next_block < extents.size() && extents[next_block].end == i) {
      auto out = current.data();
      auto skip = residual->data();
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += skip[k];
      residual.reset();
      ++next_block;
    }
  }
  return current;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    fail(ErrorCode::kShape, "Tensor: " + std::to_string(data_.size()) + " values for shape " +
                                shape_string(shape_));
  }
  for (float v : data_) {
    if (!std::isfinite(v)) fail(ErrorCode::kInput, "Tensor: non-finite entry");
  }
}

const std::string& layer_name(const Layer& layer) {
  return std::visit([](const auto& l) -> const std::string& { return l.name; }, layer);
}

const char* layer_kind(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const ConvLayer&) { return "conv"; },
                        [](const ReluLayer&) { return "relu"; },
                        [](const MaxPoolLayer&) { return "maxpool"; },
                        [](const FcLayer&) { return "fc"; },
                        [](const BatchNormLayer&) { return "batchnorm"; },
                    },
                    layer);
}

std::optional<std::size_t> ModelGraph::find(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layer_name(layers[i]) == name) return i;
  return std::nullopt;
}

std::size_t ModelGraph::index_of(const std::string& name) const {
  const auto idx = find(name);
  if (!idx) fail(ErrorCode::kLookup, "unknown layer '" + name + "'");
  return *idx;
}

const ConvLayer& ModelGraph::conv(const std::string& name) const {
  const auto* c = std::get_if<ConvLayer>(&layers[index_of(name)]);
  if (!c) fail(ErrorCode::kStructure, "layer '" + name + "' is not a conv layer");
  return *c;
}

ConvLayer& ModelGraph::conv(const std::string& name) {
  auto* c = std::get_if<ConvLayer>(&layers[index_of(name)]);
  if (!c) fail(ErrorCode::kStructure, "layer '" + name + "' is not a conv layer");
  return *c;
}

std::vector<Shape> infer_shapes(const ModelGraph& model) {
  std::unordered_set<std::string> names;
  for (const auto& layer : model.layers) {
    if (!names.insert(layer_name(layer)).second) {
      fail(ErrorCode::kStructure, "duplicate layer name '" + layer_name(layer) + "'");
    }
  }
  const auto extents = block_extents(model);

  std::vector<Shape> shapes;
  shapes.reserve(model.layers.size());
  Shape current = model.input_shape;
  Shape block_input;
  std::size_t next_block = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (next_block < extents.size() && extents[next_block].begin == i) block_input = current;
    current = layer_output_shape(model.layers[i], current);
    if (next_block < extents.size() && extents[next_block].end == i) {
      if (current != block_input) {
        fail(ErrorCode::kShape, "residual add at '" + layer_name(model.layers[i]) + "': " +
                                    shape_string(current) + " vs block input " + shape_string(block_input));
      }
      ++next_block;
    }
    shapes.push_back(current);
  }
  return shapes;
}

ForwardResult forward(const ModelGraph& model, const Tensor& input, const std::set<std::string>& capture) {
  for (const auto& name : capture) {
    if (!model.find(name)) fail(ErrorCode::kLookup, "forward: unknown capture layer '" + name + "'");
  }
  ForwardResult result;
  result.output = run_layers(model, input, model.layers.size(), &capture, &result.captured);
  return result;
}

Tensor forward_prefix(const ModelGraph& model, const Tensor& input, std::size_t end) {
  if (end > model.layers.size()) fail(ErrorCode::kParameter, "forward_prefix: end past last layer");
  return run_layers(model, input, end, nullptr, nullptr);
}

Tensor conv2d(const ConvLayer& conv, const Tensor& input) {
  const Shape out_shape = layer_output_shape(conv, input.shape());
  const std::size_t c_in = conv.c_in(), h = input.dim(1), w = input.dim(2);
  const std::size_t kh = conv.k_h(), kw = conv.k_w();
  const std::size_t ho = out_shape[1], wo = out_shape[2];
  const std::size_t s = conv.stride;
  const auto pad = static_cast<std::ptrdiff_t>(conv.padding);
  Tensor out(out_shape);
  auto weights = conv.weights.data();
  for (std::size_t co = 0; co < conv.c_out(); ++co) {
    float* dst = out.data().data() + co * ho * wo;
    if (!conv.bias.empty()) std::fill(dst, dst + ho * wo, conv.bias[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const float* src = input.data().data() + ci * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const float wv = weights[((co * c_in + ci) * kh + ky) * kw + kx];
          if (wv == 0.0f) continue;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const float* src_row = src + iy * static_cast<std::ptrdiff_t>(w);
            float* dst_row = dst + oy * wo;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              dst_row[ox] += wv * src_row[ix];
            }
          }
        }
    }
  }
  return out;
}

linalg::Matrix im2col(const Tensor& input, std::size_t k_h, std::size_t k_w, std::size_t stride,
                      std::size_t padding) {
  if (input.rank() != 3) fail(ErrorCode::kShape, "im2col: input must be rank 3, got " + shape_string(input.shape()));
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t ho = conv_extent(h, k_h, stride, padding, "im2col");
  const std::size_t wo = conv_extent(w, k_w, stride, padding, "im2col");
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  linalg::Matrix out(ho * wo, c * k_h * k_w);
  for (std::size_t oy = 0; oy < ho; ++oy)
    for (std::size_t ox = 0; ox < wo; ++ox) {
      auto row = out.row(oy * wo + ox);
      std::size_t col = 0;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ky = 0; ky < k_h; ++ky)
          for (std::size_t kx = 0; kx < k_w; ++kx, ++col) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix >= static_cast<std::ptrdiff_t>(w)) {
              continue;
            }
            row[col] = input[(ch * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
          }
    }
  return out;
}

ModelGraph fold_batchnorm(const ModelGraph& model) {
  ModelGraph out;
  out.input_shape = model.input_shape;
  out.blocks = model.blocks;
  for (const auto& layer : model.layers) {
    const auto* bn = std::get_if<BatchNormLayer>(&layer);
    if (!bn) {
      out.layers.push_back(layer);
      continue;
    }
    ConvLayer* conv = out.layers.empty() ? nullptr : std::get_if<ConvLayer>(&out.layers.back());
    if (!conv) {
      fail(ErrorCode::kStructure, "batchnorm '" + bn->name + "' is not immediately preceded by a conv layer");
    }
    const std::size_t c = conv->c_out();
    if (bn->gamma.size() != c || bn->beta.size() != c || bn->mean.size() != c || bn->var.size() != c) {
      fail(ErrorCode::kShape, "batchnorm '" + bn->name + "' does not match conv '" + conv->name + "'");
    }
    const std::size_t filter = conv->weights.size() / c;
    std::vector<float> bias(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double scale = static_cast<double>(bn->gamma[ch]) /
                           std::sqrt(static_cast<double>(bn->var[ch]) + static_cast<double>(bn->epsilon));
      for (std::size_t k = 0; k < filter; ++k) {
        float& wv = conv->weights[ch * filter + k];
        wv = static_cast<float>(static_cast<double>(wv) * scale);
      }
      const double b = conv->bias.empty() ? 0.0 : conv->bias[ch];
      bias[ch] = static_cast<float>((b - bn->mean[ch]) * scale + bn->beta[ch]);
    }
    conv->bias = std::move(bias);
  }
  return out;
}

std::vector<LayerCost> layer_costs(const ModelGraph& model) {
  const auto shapes = infer_shapes(model);
  std::vector<LayerCost> out;
  out.reserve(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    LayerCost lc{layer_name(model.layers[i]), layer_kind(model.layers[i]), shapes[i], {}};
    std::visit(Overloaded{
                   [&](const ConvLayer& l) {
                     lc.costs.params = l.weights.size() + l.bias.size();
                     lc.costs.flops = 2ull * l.c_in() * l.k_h() * l.k_w() * l.c_out() * shapes[i][1] * shapes[i][2];
                   },
                   [&](const FcLayer& l) {
                     lc.costs.params = l.weights.size() + l.bias.size();
                     lc.costs.flops = 2ull * l.weights.dim(0) * l.weights.dim(1);
                   },
                   [&](const BatchNormLayer& l) { lc.costs.params = l.gamma.size() + l.beta.size(); },
                   [](const auto&) {},
               },
               model.layers[i]);
    out.push_back(std::move(lc));
  }
  return out;
}

Costs count_costs(const ModelGraph& model) {
  Costs total;
  for (const auto& lc : layer_costs(model)) {
    total.params += lc.costs.params;
    total.flops += lc.costs.flops;
  }
  return total;
}

}  // namespace scprune::nn
