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
#include <random>
#include <vector>

namespace scprune {

/// Seeded random source with a platform-independent output sequence.
///
/// std::mt19937_64 is fully specified by the standard, but the standard
/// distributions are not, so the few draws we need are derived by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  /// Standard normal draw (Box-Muller, no caching).
  double normal();

  /// `count` distinct indices from [0, n), returned in ascending order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

 private:
  std::mt19937_64 engine_;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is split into
/// contiguous chunks; callers write results by index so the outcome does not
/// depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn);

}  // namespace scprune

#include "scprune/parallel_impl.hpp"
