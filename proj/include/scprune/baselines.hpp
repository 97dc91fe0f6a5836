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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scprune/config.hpp"
#include "scprune/nn.hpp"
#include "scprune/pruner.hpp"

namespace scprune::baselines {

enum class SelectorKind {
  kFirstK,       // keep the first c′ channels
  kRandom,       // keep a seeded uniform c′-subset
  kMaxResponse,  // keep the c′ upper filters with the largest Σ|w|
  kKMeansRaw,    // k-means on the normalized feature-map columns, then merge
  kSsc,          // subspace clustering, then merge
};

struct Selector {
  SelectorKind kind = SelectorKind::kSsc;
  std::uint64_t seed = 42;

  std::string name() const;
  bool operator==(const Selector&) const = default;
};

/// Parses "firstk", "random", "maxresponse", "kmeans", "ssc"; seeded kinds
/// accept an explicit seed as "random:7". Unknown names throw kInput.
Selector parse_selector(const std::string& text, std::uint64_t default_seed);

/// Chooses how the c channels feeding the lower layer shrink to c′.
/// `feature_maps` are the [c,H,W] tensors feeding the lower layer.
pruner::ChannelReduction select_channels(const Selector& selector, const nn::Tensor& upper_weights,
                                         std::span<const nn::Tensor> feature_maps, std::size_t c_prime,
                                         const RunConfig& cfg);

struct EvalSet {
  std::vector<nn::Tensor> inputs;
  std::vector<std::size_t> labels;
  std::size_t topk = 1;
};

struct ComparisonRow {
  std::string selector;
  double ratio = 1.0;
  std::size_t c = 0;
  std::size_t c_prime = 0;
  double recon_error_before = 0.0;
  double recon_error_after = 0.0;
  std::optional<double> accuracy;
};

struct ComparisonTable {
  std::string upper_layer;
  std::string lower_layer;
  std::optional<double> original_accuracy;
  std::vector<ComparisonRow> rows;  // selector-major, then ratio
};

/// Prunes a single layer pair with every selector at every ratio. Keep-set
/// selectors drop channels, clustering selectors merge them; all are refit.
ComparisonTable compare_selectors(const nn::ModelGraph& model, const std::string& lower_layer,
                                  std::span<const double> ratios, std::span<const nn::Tensor> calib,
                                  std::span<const Selector> selectors, const RunConfig& cfg,
                                  const EvalSet* eval = nullptr);

}  // namespace scprune::baselines
