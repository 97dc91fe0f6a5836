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

#include "scprune/scprune.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "scprune/baselines.hpp"
#include "scprune/error.hpp"
#include "scprune/io.hpp"
#include "scprune/nn.hpp"
#include "scprune/pruner.hpp"

struct scp_model {
  scprune::nn::ModelGraph graph;
};

struct scp_tensor_list {
  std::vector<scprune::nn::Tensor> tensors;
};

namespace {

using scprune::ErrorCode;
namespace io = scprune::io;

thread_local std::string g_last_error;

scp_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShape: return SCP_ERR_SHAPE;
    case ErrorCode::kLookup: return SCP_ERR_LOOKUP;
    case ErrorCode::kStructure: return SCP_ERR_STRUCTURE;
    case ErrorCode::kParameter: return SCP_ERR_PARAMETER;
    case ErrorCode::kInput: return SCP_ERR_INPUT;
    case ErrorCode::kFormat: return SCP_ERR_FORMAT;
    case ErrorCode::kIo: return SCP_ERR_IO;
    case ErrorCode::kSingular: return SCP_ERR_SINGULAR;
    case ErrorCode::kConvergence: return SCP_ERR_CONVERGENCE;
    case ErrorCode::kDegenerate: return SCP_ERR_DEGENERATE;
  }
  return SCP_ERR_INTERNAL;
}

template <typename Fn>
scp_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return SCP_OK;
  } catch (const scprune::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return SCP_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (p == nullptr) scprune::fail(ErrorCode::kParameter, std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

scprune::RunConfig parse_config(const char* config_json) {
  if (config_json == nullptr) return {};
  return io::config_from_json(io::parse_json(config_json, "config"));
}


std::optional<scprune::baselines::EvalSet> load_eval(const scp_eval_options* eval) {
  if (eval == nullptr) return std::nullopt;
  require(eval->data_dir, "eval data_dir");
  require(eval->labels_path, "eval labels_path");
  if (eval->topk < 1) scprune::fail(ErrorCode::kParameter, "top-k must be at least 1");
  const auto data = io::load_dataset(eval->data_dir);
  const auto labels = io::load_labels(eval->labels_path);
  scprune::baselines::EvalSet set;
  set.labels = io::labels_for(data, labels);
  set.inputs = data.tensors;
  set.topk = eval->topk;
  return set;
}

}  // namespace

extern "C" {

const char* scp_version(void) { return scprune::kToolkitVersion; }

const char* scp_last_error(void) { return g_last_error.c_str(); }

const char* scp_status_name(scp_status status) {
  switch (status) {
    case SCP_OK: return "ok";
    case SCP_ERR_SHAPE: return "shape";
    case SCP_ERR_LOOKUP: return "lookup";
    case SCP_ERR_STRUCTURE: return "structure";
    case SCP_ERR_PARAMETER: return "parameter";
    case SCP_ERR_INPUT: return "input";
    case SCP_ERR_FORMAT: return "format";
    case SCP_ERR_IO: return "io";
    case SCP_ERR_SINGULAR: return "singular";
    case SCP_ERR_CONVERGENCE: return "convergence";
    case SCP_ERR_DEGENERATE: return "degenerate";
    case SCP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int scp_status_is_numerical(scp_status status) {
  return status == SCP_ERR_SINGULAR || status == SCP_ERR_CONVERGENCE || status == SCP_ERR_DEGENERATE;
}

void scp_string_free(char* s) { std::free(s); }

scp_status scp_model_load(const char* path, scp_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto model = std::make_unique<scp_model>();
    model->graph = io::load_model(path);
    *out = model.release();
  });
}

scp_status scp_model_save(const scp_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    io::save_model(model->graph, path);
  });
}

void scp_model_free(scp_model* model) { delete model; }

scp_status scp_model_costs(const scp_model* model, uint64_t* params, uint64_t* flops) {
  return guarded([&] {
    require(model, "model");
    const auto costs = scprune::nn::count_costs(model->graph);
    if (params) *params = costs.params;
    if (flops) *flops = costs.flops;
  });
}

scp_status scp_model_describe(const scp_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    *out_json = nullptr;
    io::Json doc;
    doc["input_shape"] = model->graph.input_shape;
    doc["layers"] = io::Json::array();
    for (const auto& layer : scprune::nn::layer_costs(model->graph)) {
      doc["layers"].push_back({{"name", layer.name},
                               {"kind", layer.kind},
                               {"output_shape", layer.output_shape},
                               {"params", layer.costs.params},
                               {"flops", layer.costs.flops}});
    }
    const auto totals = scprune::nn::count_costs(model->graph);
    doc["totals"] = {{"params", totals.params}, {"flops", totals.flops}};
    *out_json = copy_string(doc.dump());
  });
}

scp_status scp_tensors_load(const char* dir, size_t limit, uint64_t seed, scp_tensor_list** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = nullptr;
    auto list = std::make_unique<scp_tensor_list>();
    list->tensors = io::load_calibration(dir, limit, seed);
    *out = list.release();
  });
}

size_t scp_tensors_count(const scp_tensor_list* list) { return list ? list->tensors.size() : 0; }

void scp_tensors_free(scp_tensor_list* list) { delete list; }

scp_status scp_evaluate(const scp_model* model, const char* data_dir, const char* labels_path, size_t topk,
                        size_t threads, double* accuracy) {
  return guarded([&] {
    require(model, "model");
    require(accuracy, "accuracy");
    const scp_eval_options options{data_dir, labels_path, topk};
    const auto set = load_eval(&options);
    *accuracy = io::evaluate_topk(model->graph, set->inputs, set->labels, set->topk, threads);
  });
}

scp_status scp_prune(const scp_model* model, const scp_tensor_list* calib, const char* strategy_json,
                     const char* config_json, const scp_eval_options* eval, scp_model** out_model,
                     char** out_report_json) {
  return guarded([&] {
    require(model, "model");
    require(calib, "calib");
    require(strategy_json, "strategy_json");
    require(out_model, "out_model");
    require(out_report_json, "out_report_json");
    *out_model = nullptr;
    *out_report_json = nullptr;

    const auto cfg = parse_config(config_json);
    const auto strategy = io::strategy_from_json(io::parse_json(strategy_json, "strategy"));
    const auto eval_set = load_eval(eval);

    auto [pruned, report] = scprune::pruner::prune_model(model->graph, strategy, calib->tensors, cfg);
    if (eval_set) {
      report.accuracy_before =
          io::evaluate_topk(model->graph, eval_set->inputs, eval_set->labels, eval_set->topk, cfg.threads);
      report.accuracy_after =
          io::evaluate_topk(pruned, eval_set->inputs, eval_set->labels, eval_set->topk, cfg.threads);
    }
    const std::string text = io::dump_json(io::report_to_json(report, cfg, strategy));
    auto result = std::make_unique<scp_model>();
    result->graph = std::move(pruned);
    char* report_text = copy_string(text);
    *out_model = result.release();
    *out_report_json = report_text;
  });
}

scp_status scp_compare(const scp_model* model, const scp_tensor_list* calib, const char* lower_layer,
                       const double* ratios, size_t ratio_count, const char* const* selectors,
                       size_t selector_count, const char* config_json, const scp_eval_options* eval,
                       char** out_report_json) {
  return guarded([&] {
    require(model, "model");
    require(calib, "calib");
    require(lower_layer, "lower_layer");
    require(out_report_json, "out_report_json");
    *out_report_json = nullptr;
    if (ratio_count == 0) scprune::fail(ErrorCode::kParameter, "at least one ratio is required");
    if (selector_count == 0) scprune::fail(ErrorCode::kParameter, "at least one selector is required");
    require(ratios, "ratios");
    require(selectors, "selectors");

    const auto cfg = parse_config(config_json);
    std::vector<scprune::baselines::Selector> parsed;
    for (size_t i = 0; i < selector_count; ++i) {
      require(selectors[i], "selector name");
      parsed.push_back(scprune::baselines::parse_selector(selectors[i], cfg.seed));
    }
    const auto eval_set = load_eval(eval);
    const std::vector<double> ratio_list(ratios, ratios + ratio_count);
    const auto table = scprune::baselines::compare_selectors(model->graph, lower_layer, ratio_list, calib->tensors,
                                                              parsed, cfg, eval_set ? &*eval_set : nullptr);
    *out_report_json = copy_string(io::dump_json(io::comparison_to_json(table, cfg)));
  });
}

}  // extern "C"
