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

#include "scprune/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scprune/error.hpp"

namespace scprune {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kLookup: return "lookup error";
    case ErrorCode::kStructure: return "structure error";
    case ErrorCode::kParameter: return "parameter error";
    case ErrorCode::kInput: return "input error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kSingular: return "singularity error";
    case ErrorCode::kConvergence: return "convergence error";
    case ErrorCode::kDegenerate: return "degenerate-data error";
  }
  return "error";
}

bool is_numerical(ErrorCode code) {
  return code == ErrorCode::kSingular || code == ErrorCode::kConvergence ||
         code == ErrorCode::kDegenerate;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) fail(ErrorCode::kParameter, "Rng::index: empty range");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  // Reject the 2^64 mod n lowest draws so the remainder is exactly uniform.
  const std::uint64_t threshold = (0 - range) % range;
  std::uint64_t x = engine_();
  while (x < threshold) x = engine_();
  return static_cast<std::size_t>(x % range);
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t count) {
  if (count > n) fail(ErrorCode::kParameter, "sample_without_replacement: count exceeds population");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace scprune
