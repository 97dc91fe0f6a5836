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

#include "scprune/ssc.hpp"

namespace scprune {

inline constexpr const char* kToolkitName = "scprune";
inline constexpr const char* kToolkitVersion = "1.0.0";

/// Solver and pipeline settings shared by every command. Echoed verbatim in
/// each report.
struct RunConfig {
  double alpha = 20.0;
  std::size_t ssc_max_iter = 500;
  double ssc_tol = 1e-6;
  double ridge = 1e-8;
  std::size_t max_rows = 4096;
  std::uint64_t seed = 42;
  std::size_t kmeans_restarts = 10;
  std::size_t threads = 1;
  // Cluster on activations of the original model instead of the partially
  // pruned one during whole-model pruning.
  bool cluster_on_original = false;

  /// Throws kParameter if any numeric field is out of range.
  void validate() const;

  ssc::SubspaceClusteringOptions clustering() const;

  bool operator==(const RunConfig&) const = default;
};

}  // namespace scprune
