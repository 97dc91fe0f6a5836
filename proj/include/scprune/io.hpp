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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scprune/baselines.hpp"
#include "scprune/config.hpp"
#include "scprune/nn.hpp"
#include "scprune/pruner.hpp"

#include <json.hpp>

namespace scprune::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Binary formats. All integers and floats are little-endian.
//
// Model file:
//   "SCPM" | u32 version (1) | u32 record count | u32 input rank | u32 dims...
//   then per record: u16 name length | UTF-8 name | u8 tag | payload
//     0 conv       u32 c_out, c_in, k_h, k_w, stride, padding | blob weights | blob bias
//     1 relu       (none)
//     2 maxpool    u32 kernel, stride
//     3 fc         u32 out, in | blob weights | blob bias
//     4 batchnorm  u32 channels | u32 epsilon (float32 bits) | blob gamma, beta, mean, var
//     5 block      u32 prunable_prefix | u32 conv count | (u16 length | UTF-8 conv name)...
//   A blob is u64 element count followed by that many float32 values; an
//   absent bias has count 0. Block records follow all layer records.
//
// Tensor file:
//   "SCTN" | u32 rank | u32 dims... | float32 data
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kModelFormatVersion = 1;

nn::ModelGraph load_model(const fs::path& path);
void save_model(const nn::ModelGraph& model, const fs::path& path);
std::vector<std::uint8_t> encode_model(const nn::ModelGraph& model);

nn::Tensor load_tensor(const fs::path& path);
void save_tensor(const nn::Tensor& tensor, const fs::path& path);

struct Dataset {
  std::vector<std::string> names;  // file names, lexicographic
  std::vector<nn::Tensor> tensors;
};

/// Every "*.sctn" file in `dir`, in lexicographic file-name order. All
/// tensors must share a shape.
Dataset load_dataset(const fs::path& dir);

/// load_dataset, then a seeded uniform subsample of `limit` files (order
/// kept) when there are more. limit 0 means no limit.
std::vector<nn::Tensor> load_calibration(const fs::path& dir, std::size_t limit, std::uint64_t seed);

/// JSON object mapping tensor file name to class index.
std::map<std::string, std::size_t> load_labels(const fs::path& path);

/// Fraction of inputs whose label is among the k largest outputs; ties go
/// to the lower class index.
double evaluate_topk(const nn::ModelGraph& model, std::span<const nn::Tensor> inputs,
                     std::span<const std::size_t> labels, std::size_t k, std::size_t threads = 1);

/// Labels for every file of a dataset, in dataset order. Missing labels throw kInput.
std::vector<std::size_t> labels_for(const Dataset& data, const std::map<std::string, std::size_t>& labels);

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

Json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const Json& doc);

Json strategy_to_json(const pruner::PruneStrategy& strategy);
pruner::PruneStrategy strategy_from_json(const Json& doc);

Json report_to_json(const pruner::PruneReport& report, const RunConfig& cfg,
                    const pruner::PruneStrategy& strategy);
pruner::PruneReport report_from_json(const Json& doc);

Json comparison_to_json(const baselines::ComparisonTable& table, const RunConfig& cfg);

/// Parses JSON text; syntax errors throw kFormat.
Json parse_json(const std::string& text, const std::string& what);
std::string read_text(const fs::path& path);
/// Deterministic pretty-printed text with a trailing newline.
std::string dump_json(const Json& doc);
void write_text(const fs::path& path, const std::string& text);

}  // namespace scprune::io
