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

#include "scprune/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "scprune/error.hpp"
#include "scprune/util.hpp"

namespace scprune::pruner {

using linalg::Matrix;
using nn::ConvLayer;
using nn::ModelGraph;
using nn::Tensor;

namespace {

void check_labels(std::size_t c, const ssc::ClusterAssignment& a, const char* where) {
  if (a.labels.size() != c) {
    fail(ErrorCode::kShape, std::string(where) + ": assignment covers " + std::to_string(a.labels.size()) +
                                " channels, tensor has " + std::to_string(c));
  }
  (void)ssc::canonicalize(a.labels, a.k);
}

void check_keep(std::size_t c, std::span<const std::size_t> keep, const char* where) {
  if (keep.empty()) fail(ErrorCode::kParameter, std::string(where) + ": empty keep set");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= c || (i > 0 && keep[i] <= keep[i - 1])) {
      fail(ErrorCode::kParameter, std::string(where) + ": keep set must be ascending indices below " +
                                      std::to_string(c));
    }
  }
}

bool is_passthrough(const nn::Layer& layer) {
  return std::holds_alternative<nn::ReluLayer>(layer) || std::holds_alternative<nn::MaxPoolLayer>(layer);
}

}  // namespace

ChannelReduction ChannelReduction::merge(ssc::ClusterAssignment assignment) {
  ChannelReduction r;
  r.kind = Kind::kMerge;
  r.assignment = std::move(assignment);
  return r;
}

ChannelReduction ChannelReduction::keep_set(std::vector<std::size_t> keep) {
  ChannelReduction r;
  r.kind = Kind::kKeep;
  r.keep = std::move(keep);
  return r;
}

std::size_t ChannelReduction::target_channels() const {
  return kind == Kind::kMerge ? assignment.k : keep.size();
}

std::vector<std::size_t> ChannelReduction::group_sizes() const {
  if (kind == Kind::kMerge) return assignment.sizes();
  return std::vector<std::size_t>(keep.size(), 1);
}

Tensor cluster_lower_channels(const Tensor& w, const ssc::ClusterAssignment& assignment) {
  if (w.rank() != 4) fail(ErrorCode::kShape, "cluster_lower_channels: weights must be rank 4");
  const std::size_t c_out = w.dim(0), c = w.dim(1), area = w.dim(2) * w.dim(3);
  check_labels(c, assignment, "cluster_lower_channels");
  const auto members = assignment.members();
  const std::size_t k = assignment.k;
  Tensor out({c_out, k, w.dim(2), w.dim(3)});
  std::vector<double> acc(area);
  for (std::size_t m = 0; m < c_out; ++m) {
    for (std::size_t j = 0; j < k; ++j) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t p : members[j])
        for (std::size_t a = 0; a < area; ++a) acc[a] += w[(m * c + p) * area + a];
      const double inv = 1.0 / static_cast<double>(members[j].size());
      for (std::size_t a = 0; a < area; ++a) out[(m * k + j) * area + a] = static_cast<float>(acc[a] * inv);
    }
  }
  return out;
}

std::pair<Tensor, std::vector<float>> cluster_upper_filters(const Tensor& w, std::span<const float> bias,
                                                            const ssc::ClusterAssignment& assignment) {
  if (w.rank() != 4) fail(ErrorCode::kShape, "cluster_upper_filters: weights must be rank 4");
  const std::size_t c = w.dim(0), filter = w.size() / std::max<std::size_t>(c, 1);
  if (!bias.empty() && bias.size() != c) fail(ErrorCode::kShape, "cluster_upper_filters: bias length mismatch");
  check_labels(c, assignment, "cluster_upper_filters");
  const auto members = assignment.members();
  const std::size_t k = assignment.k;
  Tensor out({k, w.dim(1), w.dim(2), w.dim(3)});
  std::vector<float> out_bias(bias.empty() ? 0 : k);
  std::vector<double> acc(filter);
  for (std::size_t j = 0; j < k; ++j) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double bias_acc = 0.0;
    for (std::size_t p : members[j]) {
      for (std::size_t a = 0; a < filter; ++a) acc[a] += w[p * filter + a];
      if (!bias.empty()) bias_acc += bias[p];
    }
    const double inv = 1.0 / static_cast<double>(members[j].size());
    for (std::size_t a = 0; a < filter; ++a) out[j * filter + a] = static_cast<float>(acc[a] * inv);
    if (!bias.empty()) out_bias[j] = static_cast<float>(bias_acc * inv);
  }
  return {std::move(out), std::move(out_bias)};
}

Tensor keep_lower_channels(const Tensor& w, std::span<const std::size_t> keep) {
  if (w.rank() != 4) fail(ErrorCode::kShape, "keep_lower_channels: weights must be rank 4");
  const std::size_t c_out = w.dim(0), c = w.dim(1), area = w.dim(2) * w.dim(3);
  check_keep(c, keep, "keep_lower_channels");
  Tensor out({c_out, keep.size(), w.dim(2), w.dim(3)});
  for (std::size_t m = 0; m < c_out; ++m)
    for (std::size_t j = 0; j < keep.size(); ++j)
      for (std::size_t a = 0; a < area; ++a) out[(m * keep.size() + j) * area + a] = w[(m * c + keep[j]) * area + a];
  return out;
}

std::pair<Tensor, std::vector<float>> keep_upper_filters(const Tensor& w, std::span<const float> bias,
                                                         std::span<const std::size_t> keep) {
  if (w.rank() != 4) fail(ErrorCode::kShape, "keep_upper_filters: weights must be rank 4");
  const std::size_t c = w.dim(0), filter = w.size() / std::max<std::size_t>(c, 1);
  if (!bias.empty() && bias.size() != c) fail(ErrorCode::kShape, "keep_upper_filters: bias length mismatch");
  check_keep(c, keep, "keep_upper_filters");
  Tensor out({keep.size(), w.dim(1), w.dim(2), w.dim(3)});
  std::vector<float> out_bias;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    std::copy_n(w.data().begin() + static_cast<std::ptrdiff_t>(keep[j] * filter), filter,
                out.data().begin() + static_cast<std::ptrdiff_t>(j * filter));
    if (!bias.empty()) out_bias.push_back(bias[keep[j]]);
  }
  return {std::move(out), std::move(out_bias)};
}

std::vector<Tensor> capture_inputs(const ModelGraph& model, std::size_t index, std::span<const Tensor> calib,
                                   std::size_t threads) {
  std::vector<Tensor> out(calib.size());
  parallel_for(calib.size(), threads, [&](std::size_t i) { out[i] = nn::forward_prefix(model, calib[i], index); });
  return out;
}

Refit reconstruct(const ModelGraph& reference, const ModelGraph& current, const LayerPrunePlan& plan,
                  const ConvLayer& pruned_upper, const ConvLayer& pruned_lower, std::span<const Tensor> calib,
                  double ridge, std::size_t threads) {
  if (calib.empty()) fail(ErrorCode::kInput, "reconstruct: empty calibration set");
  const std::size_t c_prime = plan.target_channels;
  if (pruned_upper.c_out() != c_prime || pruned_lower.c_in() != c_prime) {
    fail(ErrorCode::kShape, "reconstruct: pruned layers do not have " + std::to_string(c_prime) + " channels");
  }
  const ConvLayer& ref_lower = reference.conv(plan.lower_layer);
  if (ref_lower.c_out() != pruned_lower.c_out() || ref_lower.k_h() != pruned_lower.k_h() ||
      ref_lower.k_w() != pruned_lower.k_w()) {
    fail(ErrorCode::kShape, "reconstruct: lower layer '" + plan.lower_layer + "' differs from the reference");
  }

  ModelGraph pruned = current;
  pruned.conv(plan.upper_layer) = pruned_upper;
  pruned.conv(plan.lower_layer) = pruned_lower;
  nn::validate(pruned);
  const std::size_t ref_index = reference.index_of(plan.lower_layer);
  const std::size_t cur_index = pruned.index_of(plan.lower_layer);

  const std::size_t kh = pruned_lower.k_h(), kw = pruned_lower.k_w();
  const std::size_t c_out = pruned_lower.c_out();
  const std::size_t p = c_prime * kh * kw + 1;

  Matrix gram(p, p), atb(p, c_out);
  double target_energy = 0.0;

  // Images are processed in batches of `threads`; accumulation stays in index
  // order so results do not depend on the worker count.
  const std::size_t batch = std::max<std::size_t>(threads, 1);
  std::vector<Tensor> inputs(batch), targets(batch);
  for (std::size_t start = 0; start < calib.size(); start += batch) {
    const std::size_t count = std::min(batch, calib.size() - start);
    parallel_for(count, threads, [&](std::size_t b) {
      inputs[b] = nn::forward_prefix(pruned, calib[start + b], cur_index);
      targets[b] = nn::conv2d(ref_lower, nn::forward_prefix(reference, calib[start + b], ref_index));
    });
    for (std::size_t b = 0; b < count; ++b) {
      const Matrix cols = nn::im2col(inputs[b], kh, kw, pruned_lower.stride, pruned_lower.padding);
      const Tensor& target = targets[b];
      const std::size_t positions = cols.rows();
      if (target.size() != positions * c_out) {
        fail(ErrorCode::kShape, "reconstruct: target and input extents disagree at '" + plan.lower_layer + "'");
      }
      std::vector<double> row(p);
      for (std::size_t r = 0; r < positions; ++r) {
        auto src = cols.row(r);
        std::copy(src.begin(), src.end(), row.begin());
        row[p - 1] = 1.0;
        for (std::size_t i = 0; i < p; ++i) {
          const double ri = row[i];
          if (ri == 0.0) continue;
          auto g = gram.row(i);
          for (std::size_t j = i; j < p; ++j) g[j] += ri * row[j];
          auto t = atb.row(i);
          for (std::size_t o = 0; o < c_out; ++o) t[o] += ri * target[o * positions + r];
        }
        for (std::size_t o = 0; o < c_out; ++o) {
          const double v = target[o * positions + r];
          target_energy += v * v;
        }
      }
    }
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);

  // ‖B − A·X‖² = ‖B‖² − 2⟨X, AᵀB⟩ + ⟨X, AᵀA·X⟩
  auto relative_error = [&](const Matrix& x) {
    const Matrix gx = linalg::matmul(gram, x);
    double cross = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < x.data().size(); ++i) {
      cross += x.data()[i] * atb.data()[i];
      quad += x.data()[i] * gx.data()[i];
    }
    const double sq = std::max(0.0, target_energy - 2.0 * cross + quad);
    return target_energy > 0.0 ? std::sqrt(sq / target_energy) : std::sqrt(sq);
  };

  auto as_solution = [&](const Tensor& w, std::span<const float> bias) {
    Matrix x(p, c_out);
    const std::size_t fan = p - 1;
    for (std::size_t o = 0; o < c_out; ++o) {
      for (std::size_t i = 0; i < fan; ++i) x(i, o) = w[o * fan + i];
      x(fan, o) = bias.empty() ? 0.0 : bias[o];
    }
    return x;
  };

  Refit out;
  out.weights = pruned_lower.weights;
  out.bias = pruned_lower.bias;
  out.error_before = relative_error(as_solution(pruned_lower.weights, pruned_lower.bias));
  out.error_after = out.error_before;

  Matrix solution;
  try {
    solution = linalg::solve_normal_equations(gram, atb, ridge);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSingular || ridge != 0.0) throw;
    solution = linalg::solve_normal_equations(gram, atb, 1e-8);
  }

  Tensor weights({c_out, c_prime, kh, kw});
  std::vector<float> bias(c_out);
  const std::size_t fan = p - 1;
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t i = 0; i < fan; ++i) weights[o * fan + i] = static_cast<float>(solution(i, o));
    bias[o] = static_cast<float>(solution(fan, o));
  }
  for (float v : weights.data())
    if (!std::isfinite(v)) fail(ErrorCode::kSingular, "reconstruct: refit produced non-finite weights");
  for (float v : bias)
    if (!std::isfinite(v)) fail(ErrorCode::kSingular, "reconstruct: refit produced non-finite bias");

  const double refit_error = relative_error(as_solution(weights, bias));
  if (refit_error <= out.error_before) {
    out.weights = std::move(weights);
    out.bias = std::move(bias);
    out.error_after = refit_error;
    out.refit_applied = true;
  }
  return out;
}

LayerPair resolve_pair(const ModelGraph& model, const std::string& lower) {
  const std::size_t li = model.index_of(lower);
  if (!std::holds_alternative<ConvLayer>(model.layers[li])) {
    fail(ErrorCode::kStructure, "layer '" + lower + "' is not a conv layer");
  }
  std::size_t ui = li;
  while (ui > 0 && is_passthrough(model.layers[ui - 1])) --ui;
  if (ui == 0 || !std::holds_alternative<ConvLayer>(model.layers[ui - 1])) {
    fail(ErrorCode::kStructure, "conv '" + lower + "' is not fed by a conv layer through ReLU/pool layers only");
  }
  --ui;
  const std::string& upper = nn::layer_name(model.layers[ui]);
  for (const auto& block : model.blocks) {
    if (block.conv_layer_names.front() == lower) {
      fail(ErrorCode::kStructure, "channels between '" + upper + "' and '" + lower +
                                      "' feed the residual skip of block '" + block.block_id + "'");
    }
    if (block.conv_layer_names.back() == upper) {
      fail(ErrorCode::kStructure, "conv '" + upper + "' produces the output of residual block '" +
                                      block.block_id + "'");
    }
  }
  return {ui, li};
}

std::pair<ModelGraph, PruneRecord> apply_reduction(const ModelGraph& reference, const ModelGraph& current,
                                                   LayerPair pair, const ChannelReduction& reduction,
                                                   std::span<const Tensor> calib, const RunConfig& cfg) {
  const auto& upper = std::get<ConvLayer>(current.layers[pair.upper]);
  const auto& lower = std::get<ConvLayer>(current.layers[pair.lower]);
  const std::size_t c = upper.c_out();

  ConvLayer pruned_upper = upper;
  ConvLayer pruned_lower = lower;
  if (reduction.kind == ChannelReduction::Kind::kMerge) {
    auto [w, b] = cluster_upper_filters(upper.weights, upper.bias, reduction.assignment);
    pruned_upper.weights = std::move(w);
    pruned_upper.bias = std::move(b);
    pruned_lower.weights = cluster_lower_channels(lower.weights, reduction.assignment);
  } else {
    auto [w, b] = keep_upper_filters(upper.weights, upper.bias, reduction.keep);
    pruned_upper.weights = std::move(w);
    pruned_upper.bias = std::move(b);
    pruned_lower.weights = keep_lower_channels(lower.weights, reduction.keep);
  }

  LayerPrunePlan plan;
  plan.upper_layer = upper.name;
  plan.lower_layer = lower.name;
  plan.target_channels = reduction.target_channels();
  if (reduction.kind == ChannelReduction::Kind::kMerge) plan.assignment = reduction.assignment;

  const Refit refit = reconstruct(reference, current, plan, pruned_upper, pruned_lower, calib, cfg.ridge, cfg.threads);
  pruned_lower.weights = refit.weights;
  pruned_lower.bias = refit.bias;

  ModelGraph next = current;
  next.layers[pair.upper] = pruned_upper;
  next.layers[pair.lower] = pruned_lower;

  PruneRecord record;
  record.upper_layer = upper.name;
  record.lower_layer = lower.name;
  record.c = c;
  record.c_prime = plan.target_channels;
  record.speed_up_ratio = static_cast<double>(c) / static_cast<double>(record.c_prime);
  record.cluster_sizes = reduction.group_sizes();
  record.recon_error_before = refit.error_before;
  record.recon_error_after = refit.error_after;
  const nn::Costs before = nn::count_costs(current), after = nn::count_costs(next);
  record.params_before = before.params;
  record.params_after = after.params;
  record.flops_before = before.flops;
  record.flops_after = after.flops;
  return {std::move(next), std::move(record)};
}

namespace {

std::pair<ModelGraph, PruneRecord> prune_step(const ModelGraph& reference, const ModelGraph& current,
                                              const std::string& lower, std::size_t c_prime,
                                              std::span<const Tensor> calib, const RunConfig& cfg) {
  const LayerPair pair = resolve_pair(current, lower);
  const std::size_t c = std::get<ConvLayer>(current.layers[pair.upper]).c_out();
  if (c_prime < 1 || c_prime > c) {
    fail(ErrorCode::kParameter, "target of " + std::to_string(c_prime) + " channels for '" + lower +
                                    "' is outside [1, " + std::to_string(c) + "]");
  }
  if (c_prime == c) {
    return apply_reduction(reference, current, pair, ChannelReduction::merge(ssc::identity_assignment(c)), calib,
                           cfg);
  }
  const ModelGraph& source = cfg.cluster_on_original ? reference : current;
  const std::size_t source_index = source.index_of(lower);
  const auto maps = capture_inputs(source, source_index, calib, cfg.threads);
  if (maps.front().dim(0) != c) {
    fail(ErrorCode::kShape, "clustering source has " + std::to_string(maps.front().dim(0)) +
                                " channels at '" + lower + "', expected " + std::to_string(c));
  }
  const auto clustering = ssc::cluster_feature_maps(maps, c_prime, cfg.clustering());
  auto result = apply_reduction(reference, current, pair, ChannelReduction::merge(clustering.assignment), calib, cfg);
  result.second.ssc = SscDiagnostics{clustering.expressiveness.lambda, clustering.expressiveness.iterations_run,
                                     clustering.expressiveness.final_objective};
  return result;
}

}  // namespace

std::pair<ModelGraph, PruneRecord> prune_layer_pair(const ModelGraph& model, const std::string& upper,
                                                    const std::string& lower, std::size_t c_prime,
                                                    std::span<const Tensor> calib, const RunConfig& cfg) {
  cfg.validate();
  if (calib.empty()) fail(ErrorCode::kInput, "prune_layer_pair: empty calibration set");
  nn::validate(model);
  const LayerPair pair = resolve_pair(model, lower);
  if (nn::layer_name(model.layers[pair.upper]) != upper) {
    fail(ErrorCode::kStructure, "conv '" + lower + "' is fed by '" + nn::layer_name(model.layers[pair.upper]) +
                                    "', not '" + upper + "'");
  }
  return prune_step(model, model, lower, c_prime, calib, cfg);
}

std::size_t channels_for_ratio(std::size_t c, double ratio) {
  if (!(ratio >= 1.0) || !std::isfinite(ratio)) fail(ErrorCode::kParameter, "speed-up ratio must be >= 1");
  const double target = std::nearbyint(static_cast<double>(c) / ratio);
  return std::max<std::size_t>(1, static_cast<std::size_t>(target));
}

std::pair<ModelGraph, PruneReport> prune_model(const ModelGraph& model, const PruneStrategy& strategy,
                                               std::span<const Tensor> calib, const RunConfig& cfg) {
  cfg.validate();
  nn::validate(model);
  PruneReport report;
  report.totals_before = nn::count_costs(model);
  if (strategy.empty()) {
    report.totals_after = report.totals_before;
    return {model, std::move(report)};
  }
  if (calib.empty()) fail(ErrorCode::kInput, "prune_model: empty calibration set");

  const bool has_batchnorm = std::any_of(model.layers.begin(), model.layers.end(), [](const nn::Layer& l) {
    return std::holds_alternative<nn::BatchNormLayer>(l);
  });
  const ModelGraph reference = has_batchnorm ? nn::fold_batchnorm(model) : model;

  struct Step {
    std::size_t lower_index;
    std::string lower;
    std::optional<double> ratio;
    std::optional<std::size_t> c_prime;
  };
  std::vector<Step> steps;
  std::set<std::string> seen;
  auto add_step = [&](const std::string& lower, std::optional<double> ratio, std::optional<std::size_t> c_prime) {
    if (ratio.has_value() == c_prime.has_value()) {
      fail(ErrorCode::kInput, "strategy entry for '" + lower + "' must set exactly one of ratio and c_prime");
    }
    if (ratio && !(*ratio >= 1.0)) fail(ErrorCode::kParameter, "strategy ratio for '" + lower + "' is below 1");
    if (c_prime && *c_prime < 1) fail(ErrorCode::kParameter, "strategy c_prime for '" + lower + "' is zero");
    if (!seen.insert(lower).second) fail(ErrorCode::kInput, "strategy lists '" + lower + "' more than once");
    (void)resolve_pair(reference, lower);
    steps.push_back({reference.index_of(lower), lower, ratio, c_prime});
  };
  for (const auto& t : strategy.layers) add_step(t.lower_layer, t.ratio, t.c_prime);
  for (const auto& t : strategy.blocks) {
    const auto it = std::find_if(reference.blocks.begin(), reference.blocks.end(),
                                 [&](const nn::BlockSpec& b) { return b.block_id == t.block_id; });
    if (it == reference.blocks.end()) fail(ErrorCode::kLookup, "unknown block '" + t.block_id + "'");
    const auto& names = it->conv_layer_names;
    for (std::size_t i = 0; i < it->prunable_prefix && i + 1 < names.size(); ++i) {
      add_step(names[i + 1], t.ratio, t.c_prime);
    }
  }
  std::sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) { return a.lower_index < b.lower_index; });

  ModelGraph current = reference;
  for (const auto& step : steps) {
    const LayerPair pair = resolve_pair(current, step.lower);
    const std::size_t c = std::get<ConvLayer>(current.layers[pair.upper]).c_out();
    const std::size_t c_prime = step.c_prime ? *step.c_prime : channels_for_ratio(c, *step.ratio);
    auto [next, record] = prune_step(reference, current, step.lower, c_prime, calib, cfg);
    current = std::move(next);
    report.records.push_back(std::move(record));
  }
  report.totals_after = nn::count_costs(current);
  return {std::move(current), std::move(report)};
}

}  // namespace scprune::pruner
