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

#include "scprune/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scprune/error.hpp"
#include "scprune/io.hpp"
#include "scprune/ssc.hpp"
#include "scprune/util.hpp"

namespace scprune::baselines {

using pruner::ChannelReduction;

std::string Selector::name() const {
  switch (kind) {
    case SelectorKind::kFirstK: return "firstk";
    case SelectorKind::kRandom: return "random:" + std::to_string(seed);
    case SelectorKind::kMaxResponse: return "maxresponse";
    case SelectorKind::kKMeansRaw: return "kmeans:" + std::to_string(seed);
    case SelectorKind::kSsc: return "ssc";
  }
  return "unknown";
}

Selector parse_selector(const std::string& text, std::uint64_t default_seed) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  Selector s;
  s.seed = default_seed;
  if (head == "firstk") {
    s.kind = SelectorKind::kFirstK;
  } else if (head == "random") {
    s.kind = SelectorKind::kRandom;
  } else if (head == "maxresponse") {
    s.kind = SelectorKind::kMaxResponse;
  } else if (head == "kmeans") {
    s.kind = SelectorKind::kKMeansRaw;
  } else if (head == "ssc") {
    s.kind = SelectorKind::kSsc;
  } else {
    fail(ErrorCode::kInput, "unknown selector '" + text + "'");
  }
  if (colon != std::string::npos) {
    if (s.kind != SelectorKind::kRandom && s.kind != SelectorKind::kKMeansRaw) {
      fail(ErrorCode::kInput, "selector '" + head + "' takes no seed");
    }
    const std::string digits = text.substr(colon + 1);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      fail(ErrorCode::kInput, "bad seed in selector '" + text + "'");
    }
    s.seed = std::stoull(digits);
  }
  return s;
}

ChannelReduction select_channels(const Selector& selector, const nn::Tensor& upper_weights,
                                 std::span<const nn::Tensor> feature_maps, std::size_t c_prime,
                                 const RunConfig& cfg) {
  if (upper_weights.rank() != 4) fail(ErrorCode::kShape, "select_channels: upper weights must be rank 4");
  const std::size_t c = upper_weights.dim(0);
  if (c_prime < 1 || c_prime > c) {
    fail(ErrorCode::kParameter, "select_channels: c_prime " + std::to_string(c_prime) + " outside [1, " +
                                    std::to_string(c) + "]");
  }

  switch (selector.kind) {
    case SelectorKind::kFirstK: {
      std::vector<std::size_t> keep(c_prime);
      std::iota(keep.begin(), keep.end(), std::size_t{0});
      return ChannelReduction::keep_set(std::move(keep));
    }
    case SelectorKind::kRandom: {
      Rng rng(selector.seed);
      return ChannelReduction::keep_set(rng.sample_without_replacement(c, c_prime));
    }
    case SelectorKind::kMaxResponse: {
      const std::size_t filter = upper_weights.size() / c;
      std::vector<double> score(c, 0.0);
      for (std::size_t p = 0; p < c; ++p)
        for (std::size_t a = 0; a < filter; ++a) score[p] += std::abs(upper_weights[p * filter + a]);
      std::vector<std::size_t> order(c);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
      order.resize(c_prime);
      std::sort(order.begin(), order.end());
      return ChannelReduction::keep_set(std::move(order));
    }
    case SelectorKind::kKMeansRaw: {
      if (feature_maps.empty()) fail(ErrorCode::kInput, "kmeans selector needs a non-empty calibration set");
      const linalg::Matrix x = ssc::build_data_matrix(feature_maps, cfg.max_rows, cfg.seed);
      ssc::KMeansOptions options;
      options.restarts = cfg.kmeans_restarts;
      options.threads = cfg.threads;
      return ChannelReduction::merge(ssc::kmeans(x.transposed(), c_prime, selector.seed, options).assignment);
    }
    case SelectorKind::kSsc: {
      if (feature_maps.empty()) fail(ErrorCode::kInput, "ssc selector needs a non-empty calibration set");
      if (c_prime == c) return ChannelReduction::merge(ssc::identity_assignment(c));
      return ChannelReduction::merge(ssc::cluster_feature_maps(feature_maps, c_prime, cfg.clustering()).assignment);
    }
  }
  fail(ErrorCode::kInput, "unknown selector kind");
}

ComparisonTable compare_selectors(const nn::ModelGraph& model, const std::string& lower_layer,
                                  std::span<const double> ratios, std::span<const nn::Tensor> calib,
                                  std::span<const Selector> selectors, const RunConfig& cfg, const EvalSet* eval) {
  cfg.validate();
  nn::validate(model);
  if (calib.empty()) fail(ErrorCode::kInput, "compare_selectors: empty calibration set");
  for (double r : ratios) {
    if (!(r >= 1.0)) fail(ErrorCode::kParameter, "compare_selectors: ratios must be >= 1");
  }
  const pruner::LayerPair pair = pruner::resolve_pair(model, lower_layer);
  const auto& upper = std::get<nn::ConvLayer>(model.layers[pair.upper]);
  const auto maps = pruner::capture_inputs(model, pair.lower, calib, cfg.threads);

  ComparisonTable table;
  table.upper_layer = upper.name;
  table.lower_layer = lower_layer;
  if (eval) table.original_accuracy = io::evaluate_topk(model, eval->inputs, eval->labels, eval->topk, cfg.threads);

  for (const auto& selector : selectors) {
    for (double ratio : ratios) {
      const std::size_t c = upper.c_out();
      const std::size_t c_prime = pruner::channels_for_ratio(c, ratio);
      const auto reduction = select_channels(selector, upper.weights, maps, c_prime, cfg);
      auto [pruned, record] = pruner::apply_reduction(model, model, pair, reduction, calib, cfg);
      ComparisonRow row;
      row.selector = selector.name();
      row.ratio = ratio;
      row.c = c;
      row.c_prime = c_prime;
      row.recon_error_before = record.recon_error_before;
      row.recon_error_after = record.recon_error_after;
      if (eval) row.accuracy = io::evaluate_topk(pruned, eval->inputs, eval->labels, eval->topk, cfg.threads);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace scprune::baselines
