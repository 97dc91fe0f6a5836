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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scprune/config.hpp"
#include "scprune/nn.hpp"
#include "scprune/ssc.hpp"

namespace scprune::pruner {

/// Producer/consumer conv pair: the upper layer emits the channels that the
/// lower layer reads. Only ReLU and max-pool layers may sit between them.
struct LayerPair {
  std::size_t upper = 0;
  std::size_t lower = 0;
};

struct LayerPrunePlan {
  std::string upper_layer;
  std::string lower_layer;
  std::size_t target_channels = 0;
  ssc::ClusterAssignment assignment;
};

/// How the c channels between a layer pair shrink to c′: average each
/// cluster, or keep a subset and drop the rest.
struct ChannelReduction {
  enum class Kind { kMerge, kKeep };

  Kind kind = Kind::kMerge;
  ssc::ClusterAssignment assignment;  // kMerge
  std::vector<std::size_t> keep;      // kKeep, ascending

  static ChannelReduction merge(ssc::ClusterAssignment assignment);
  static ChannelReduction keep_set(std::vector<std::size_t> keep);

  std::size_t target_channels() const;
  std::vector<std::size_t> group_sizes() const;
};

struct SscDiagnostics {
  double lambda = 0.0;
  std::size_t iterations = 0;
  double final_objective = 0.0;
};

struct PruneRecord {
  std::string upper_layer;
  std::string lower_layer;
  std::string selector = "ssc";
  std::size_t c = 0;
  std::size_t c_prime = 0;
  double speed_up_ratio = 1.0;
  std::vector<std::size_t> cluster_sizes;
  // Relative Frobenius error of the lower layer's output on the calibration
  // set, before and after the least-squares refit.
  double recon_error_before = 0.0;
  double recon_error_after = 0.0;
  std::uint64_t params_before = 0, params_after = 0;
  std::uint64_t flops_before = 0, flops_after = 0;
  std::optional<SscDiagnostics> ssc;
};

struct PruneReport {
  std::vector<PruneRecord> records;
  nn::Costs totals_before;
  nn::Costs totals_after;
  std::optional<double> accuracy_before;
  std::optional<double> accuracy_after;
};

/// Averages the input channels of each filter over every cluster:
/// [c_out, c, k_h, k_w] -> [c_out, c′, k_h, k_w].
nn::Tensor cluster_lower_channels(const nn::Tensor& w, const ssc::ClusterAssignment& assignment);

/// Averages whole filters (and their biases) over every cluster:
/// [c, c_in, k_h, k_w] -> [c′, c_in, k_h, k_w]. An empty bias stays empty.
std::pair<nn::Tensor, std::vector<float>> cluster_upper_filters(const nn::Tensor& w, std::span<const float> bias,
                                                                const ssc::ClusterAssignment& assignment);

nn::Tensor keep_lower_channels(const nn::Tensor& w, std::span<const std::size_t> keep);
std::pair<nn::Tensor, std::vector<float>> keep_upper_filters(const nn::Tensor& w, std::span<const float> bias,
                                                             std::span<const std::size_t> keep);

struct Refit {
  nn::Tensor weights;
  std::vector<float> bias;
  double error_before = 0.0;
  double error_after = 0.0;
  bool refit_applied = false;
};

/// Least-squares refit of the lower layer. Targets are the raw lower-layer
/// outputs of `reference`; inputs are what reaches the lower layer once
/// `current` has both pruned layers substituted. Weights and bias are solved
/// jointly (ones column). If the refit does not beat the merged weights after
/// rounding to float32, the merged weights are returned unchanged.
Refit reconstruct(const nn::ModelGraph& reference, const nn::ModelGraph& current, const LayerPrunePlan& plan,
                  const nn::ConvLayer& pruned_upper, const nn::ConvLayer& pruned_lower,
                  std::span<const nn::Tensor> calib, double ridge, std::size_t threads = 1);

/// Locates the conv producing the input of `lower` and checks that its
/// channels may be pruned (no residual skip reads them).
LayerPair resolve_pair(const nn::ModelGraph& model, const std::string& lower);

/// Tensors feeding layer `index` of `model` for every calibration input.
std::vector<nn::Tensor> capture_inputs(const nn::ModelGraph& model, std::size_t index,
                                       std::span<const nn::Tensor> calib, std::size_t threads);

/// Applies a reduction to the pair, refits, and reports. `reference` supplies
/// refit targets; `current` is the model being pruned.
std::pair<nn::ModelGraph, PruneRecord> apply_reduction(const nn::ModelGraph& reference,
                                                       const nn::ModelGraph& current, LayerPair pair,
                                                       const ChannelReduction& reduction,
                                                       std::span<const nn::Tensor> calib, const RunConfig& cfg);

std::pair<nn::ModelGraph, PruneRecord> prune_layer_pair(const nn::ModelGraph& model, const std::string& upper,
                                                        const std::string& lower, std::size_t c_prime,
                                                        std::span<const nn::Tensor> calib, const RunConfig& cfg);

struct LayerTarget {
  std::string lower_layer;
  std::optional<double> ratio;
  std::optional<std::size_t> c_prime;
};

/// Prunes every eligible pair inside a residual block: the lower layers are
/// conv_layer_names[1 .. prunable_prefix].
struct BlockTarget {
  std::string block_id;
  std::optional<double> ratio;
  std::optional<std::size_t> c_prime;
};

struct PruneStrategy {
  std::vector<LayerTarget> layers;
  std::vector<BlockTarget> blocks;

  bool empty() const { return layers.empty() && blocks.empty(); }
};

/// c′ = max(1, round(c / ratio)), ties to even.
std::size_t channels_for_ratio(std::size_t c, double ratio);

/// Sequential whole-model pruning, shallow to deep. Batch norm is folded
/// first whenever there is anything to prune.
std::pair<nn::ModelGraph, PruneReport> prune_model(const nn::ModelGraph& model, const PruneStrategy& strategy,
                                                   std::span<const nn::Tensor> calib, const RunConfig& cfg);

}  // namespace scprune::pruner
