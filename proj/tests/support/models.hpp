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
#include <string>
#include <vector>

#include "scprune/nn.hpp"
#include "scprune/util.hpp"

namespace scprune::testing {

nn::Tensor random_tensor(const nn::Shape& shape, Rng& rng, double scale = 1.0);
std::vector<nn::Tensor> random_inputs(const nn::Shape& shape, std::size_t count, std::uint64_t seed);

/// He-scaled random conv layer.
nn::ConvLayer random_conv(const std::string& name, std::size_t c_out, std::size_t c_in, std::size_t k, Rng& rng,
                          std::size_t stride = 1, std::size_t padding = 0, bool bias = true);
nn::FcLayer random_fc(const std::string& name, std::size_t out, std::size_t in, Rng& rng);

/// Standard 16-layer VGG for 224x224 RGB input. Weights are a constant fill
/// since only the architecture matters to cost accounting.
nn::ModelGraph vgg16();

/// conv1 -> conv2 -> pool -> conv3 -> conv4 -> pool -> fc on [3,16,16].
nn::ModelGraph toy_vgg(std::uint64_t seed);

/// Three convs on [3,12,12] where conv2's 16 filters are 8 distinct filters,
/// each duplicated with a 1e-3 perturbation. Pruning conv3 at 2x merges the
/// duplicates. Ends in a 4-way classifier.
nn::ModelGraph planted_redundancy(std::uint64_t seed);

/// Stem conv then two bottleneck residual blocks (1x1, 3x3, 1x1), optionally
/// with batch norm after every block conv, then a 4-way classifier.
nn::ModelGraph toy_resnet(std::uint64_t seed, bool batchnorm = false);

/// Single-conv model for hand-checked cost numbers.
nn::ModelGraph single_conv();

/// Class index of the largest output, lower index on ties.
std::size_t argmax(const nn::Tensor& t);

double max_abs_diff(const nn::Tensor& a, const nn::Tensor& b);

/// Writes tensors as 0000.sctn, 0001.sctn, ... into `dir` (created fresh).
void write_dataset(const std::filesystem::path& dir, const std::vector<nn::Tensor>& tensors);
/// Labels JSON for files written by write_dataset.
void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels);

/// Fresh scratch directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace scprune::testing
