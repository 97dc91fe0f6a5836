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

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scprune/scprune.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

// Thrown for problems detected by the CLI itself; always exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Carries a library failure up to main with its status.
struct LibraryError : std::runtime_error {
  scp_status status;
  LibraryError(scp_status s, const std::string& message) : std::runtime_error(message), status(s) {}
};

void check(scp_status status) {
  if (status != SCP_OK) throw LibraryError(status, scp_last_error());
}

struct ModelDeleter {
  void operator()(scp_model* m) const { scp_model_free(m); }
};
struct TensorsDeleter {
  void operator()(scp_tensor_list* t) const { scp_tensors_free(t); }
};
struct StringDeleter {
  void operator()(char* s) const { scp_string_free(s); }
};
using ModelPtr = std::unique_ptr<scp_model, ModelDeleter>;
using TensorsPtr = std::unique_ptr<scp_tensor_list, TensorsDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

ModelPtr load_model(const std::string& path) {
  scp_model* raw = nullptr;
  check(scp_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

TensorsPtr load_tensors(const std::string& dir, std::size_t limit, std::uint64_t seed) {
  scp_tensor_list* raw = nullptr;
  check(scp_tensors_load(dir.c_str(), limit, seed, &raw));
  return TensorsPtr(raw);
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(std::string("cannot read ") + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << text;
    if (!out.flush()) throw UsageError("write failed for '" + path + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw UsageError("cannot move output into place at '" + path + "'");
}

void require_output_dir(const std::string& path) {
  const fs::path parent = fs::absolute(path).parent_path();
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) {
    throw UsageError("output directory '" + parent.string() + "' does not exist");
  }
}

// The run configuration: file contents (or defaults) with command-line
// overrides applied. The library validates the merged document.
std::string merged_config(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                          const std::optional<std::size_t>& threads) {
  Json doc = Json::object();
  if (!config_path.empty()) {
    try {
      doc = Json::parse(read_file(config_path, "config file"));
    } catch (const Json::parse_error& e) {
      throw LibraryError(SCP_ERR_FORMAT, "cannot parse config file '" + config_path + "': " + e.what());
    }
    if (!doc.is_object()) throw LibraryError(SCP_ERR_FORMAT, "config file must hold a JSON object");
  }
  if (seed) doc["seed"] = *seed;
  if (threads) doc["threads"] = *threads;
  return doc.dump();
}

std::uint64_t config_seed(const std::string& config_json) {
  const Json doc = Json::parse(config_json);
  return doc.contains("seed") && doc["seed"].is_number_unsigned() ? doc["seed"].get<std::uint64_t>() : 42;
}

struct EvalFlags {
  std::string data;
  std::string labels;
  std::size_t topk = 1;

  std::optional<scp_eval_options> options() const {
    if (data.empty() && labels.empty()) return std::nullopt;
    if (data.empty() || labels.empty()) throw UsageError("--eval-data and --labels must be given together");
    return scp_eval_options{data.c_str(), labels.c_str(), topk};
  }
};

void add_eval_flags(CLI::App* cmd, EvalFlags& flags) {
  cmd->add_option("--eval-data", flags.data, "Tensor directory for accuracy evaluation");
  cmd->add_option("--labels", flags.labels, "Labels JSON for --eval-data");
  cmd->add_option("--topk", flags.topk, "Top-k used for accuracy")->check(CLI::PositiveNumber);
}

struct PruneArgs {
  std::string model, calib, strategy, out, report, config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::size_t calib_limit = 0;
  EvalFlags eval;
};

int run_prune(const PruneArgs& a) {
  const std::string config = merged_config(a.config, a.seed, a.threads);
  const std::string strategy = read_file(a.strategy, "strategy file");
  require_output_dir(a.out);
  require_output_dir(a.report);
  const auto eval = a.eval.options();

  const ModelPtr model = load_model(a.model);
  const TensorsPtr calib = load_tensors(a.calib, a.calib_limit, config_seed(config));

  scp_model* pruned_raw = nullptr;
  char* report_raw = nullptr;
  check(scp_prune(model.get(), calib.get(), strategy.c_str(), config.c_str(), eval ? &*eval : nullptr, &pruned_raw,
                  &report_raw));
  const ModelPtr pruned(pruned_raw);
  const StringPtr report(report_raw);

  check(scp_model_save(pruned.get(), a.out.c_str()));
  write_file(a.report, report.get());
  return kExitOk;
}

int run_eval(const std::string& model_path, const std::string& data, const std::string& labels, std::size_t topk,
             std::size_t threads) {
  const ModelPtr model = load_model(model_path);
  double accuracy = 0.0;
  check(scp_evaluate(model.get(), data.c_str(), labels.c_str(), topk, threads, &accuracy));
  std::printf("%.4f\n", accuracy);
  return kExitOk;
}

std::string shape_text(const Json& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i].get<std::uint64_t>());
  }
  return s + "]";
}

int run_inspect(const std::string& model_path) {
  const ModelPtr model = load_model(model_path);
  char* raw = nullptr;
  check(scp_model_describe(model.get(), &raw));
  const StringPtr text(raw);
  const Json doc = Json::parse(text.get());

  std::printf("input %s\n", shape_text(doc["input_shape"]).c_str());
  std::printf("%-24s %-10s %-18s %14s %16s\n", "layer", "kind", "output", "params", "flops");
  for (const auto& layer : doc["layers"]) {
    std::printf("%-24s %-10s %-18s %14llu %16llu\n", layer["name"].get<std::string>().c_str(),
                layer["kind"].get<std::string>().c_str(), shape_text(layer["output_shape"]).c_str(),
                static_cast<unsigned long long>(layer["params"].get<std::uint64_t>()),
                static_cast<unsigned long long>(layer["flops"].get<std::uint64_t>()));
  }
  const auto params = doc["totals"]["params"].get<std::uint64_t>();
  const auto flops = doc["totals"]["flops"].get<std::uint64_t>();
  std::printf("total_params %llu (%.2fM)\n", static_cast<unsigned long long>(params), params / 1e6);
  std::printf("total_flops %llu (%.2fG)\n", static_cast<unsigned long long>(flops), flops / 1e9);
  return kExitOk;
}

struct CompareArgs {
  std::string model, calib, layer, report, config;
  std::vector<double> ratios;
  std::vector<std::string> selectors;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::size_t calib_limit = 0;
  EvalFlags eval;
};

int run_compare(const CompareArgs& a) {
  const std::string config = merged_config(a.config, a.seed, a.threads);
  require_output_dir(a.report);
  const auto eval = a.eval.options();

  const ModelPtr model = load_model(a.model);
  const TensorsPtr calib = load_tensors(a.calib, a.calib_limit, config_seed(config));

  std::vector<const char*> names;
  for (const auto& s : a.selectors) names.push_back(s.c_str());
  char* raw = nullptr;
  check(scp_compare(model.get(), calib.get(), a.layer.c_str(), a.ratios.data(), a.ratios.size(), names.data(),
                    names.size(), config.c_str(), eval ? &*eval : nullptr, &raw));
  const StringPtr report(raw);
  write_file(a.report, report.get());

  const Json doc = Json::parse(report.get());
  std::printf("%s -> %s\n", doc["upper_layer"].get<std::string>().c_str(),
              doc["lower_layer"].get<std::string>().c_str());
  std::printf("%-16s %6s %6s %12s %12s\n", "selector", "ratio", "c'", "err_before", "err_after");
  for (const auto& row : doc["rows"]) {
    std::printf("%-16s %6.2f %6llu %12.6f %12.6f\n", row["selector"].get<std::string>().c_str(),
                row["ratio"].get<double>(), static_cast<unsigned long long>(row["c_prime"].get<std::uint64_t>()),
                row["recon_error_before"].get<double>(), row["recon_error_after"].get<double>());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filter pruning for convolutional networks by subspace clustering of feature maps"};
  app.set_version_flag("--version", std::string("scprune ") + scp_version());
  app.require_subcommand(1);

  PruneArgs prune;
  auto* prune_cmd = app.add_subcommand("prune", "Prune a model according to a strategy file");
  prune_cmd->add_option("--model", prune.model, "Input model file")->required();
  prune_cmd->add_option("--calib", prune.calib, "Calibration tensor directory")->required();
  prune_cmd->add_option("--strategy", prune.strategy, "Strategy JSON file")->required();
  prune_cmd->add_option("--out", prune.out, "Pruned model output path")->required();
  prune_cmd->add_option("--report", prune.report, "Report JSON output path")->required();
  prune_cmd->add_option("--config", prune.config, "Run configuration JSON file");
  prune_cmd->add_option("--seed", prune.seed, "Seed (overrides the config file)");
  prune_cmd->add_option("--threads", prune.threads, "Worker threads (overrides the config file)")
      ->check(CLI::PositiveNumber);
  prune_cmd->add_option("--calib-limit", prune.calib_limit, "Use a seeded subsample of at most N calibration files");
  add_eval_flags(prune_cmd, prune.eval);

  std::string eval_model, eval_data, eval_labels;
  std::size_t eval_topk = 1;
  std::size_t eval_threads = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Top-k accuracy of a model on a labelled tensor directory");
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--data", eval_data, "Tensor directory")->required();
  eval_cmd->add_option("--labels", eval_labels, "Labels JSON file")->required();
  eval_cmd->add_option("--topk", eval_topk, "k for top-k accuracy")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--threads", eval_threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string inspect_model;
  auto* inspect_cmd = app.add_subcommand("inspect", "Per-layer shapes, parameters and FLOPs");
  inspect_cmd->add_option("--model", inspect_model, "Model file")->required();

  CompareArgs compare;
  auto* compare_cmd = app.add_subcommand("compare", "Compare channel selectors on one layer pair");
  compare_cmd->add_option("--model", compare.model, "Model file")->required();
  compare_cmd->add_option("--calib", compare.calib, "Calibration tensor directory")->required();
  compare_cmd->add_option("--layer", compare.layer, "Lower conv layer of the pair")->required();
  compare_cmd->add_option("--ratios", compare.ratios, "Comma-separated speed-up ratios")
      ->required()
      ->delimiter(',');
  compare_cmd->add_option("--selectors", compare.selectors, "Comma-separated selectors")
      ->required()
      ->delimiter(',');
  compare_cmd->add_option("--report", compare.report, "Comparison JSON output path")->required();
  compare_cmd->add_option("--config", compare.config, "Run configuration JSON file");
  compare_cmd->add_option("--seed", compare.seed, "Seed (overrides the config file)");
  compare_cmd->add_option("--threads", compare.threads, "Worker threads (overrides the config file)")
      ->check(CLI::PositiveNumber);
  compare_cmd->add_option("--calib-limit", compare.calib_limit, "Use a seeded subsample of at most N files");
  add_eval_flags(compare_cmd, compare.eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*prune_cmd) return run_prune(prune);
    if (*eval_cmd) return run_eval(eval_model, eval_data, eval_labels, eval_topk, eval_threads);
    if (*inspect_cmd) return run_inspect(inspect_model);
    if (*compare_cmd) return run_compare(compare);
  } catch (const LibraryError& e) {
    std::cerr << "error (" << scp_status_name(e.status) << "): " << e.what() << "\n";
    return scp_status_is_numerical(e.status) ? kExitNumerical : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
