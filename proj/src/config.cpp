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

#include "scprune/config.hpp"

#include <cmath>

#include "scprune/error.hpp"

namespace scprune {

void RunConfig::validate() const {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) fail(ErrorCode::kParameter, "config: alpha must be > 1");
  if (ssc_max_iter == 0) fail(ErrorCode::kParameter, "config: ssc_max_iter must be positive");
  if (!(ssc_tol > 0.0)) fail(ErrorCode::kParameter, "config: ssc_tol must be positive");
  if (!(ridge > 0.0) || !std::isfinite(ridge)) fail(ErrorCode::kParameter, "config: ridge must be positive");
  if (max_rows == 0) fail(ErrorCode::kParameter, "config: max_rows must be positive");
  if (kmeans_restarts == 0) fail(ErrorCode::kParameter, "config: kmeans_restarts must be positive");
  if (threads == 0) fail(ErrorCode::kParameter, "config: threads must be positive");
}

ssc::SubspaceClusteringOptions RunConfig::clustering() const {
  ssc::SubspaceClusteringOptions o;
  o.alpha = alpha;
  o.max_iter = ssc_max_iter;
  o.tol = ssc_tol;
  o.max_rows = max_rows;
  o.seed = seed;
  o.kmeans.restarts = kmeans_restarts;
  o.kmeans.threads = threads;
  return o;
}

}  // namespace scprune
