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

#include <algorithm>
#include <limits>
#include <string>

#include "scprune/error.hpp"
#include "scprune/ssc.hpp"
#include "scprune/util.hpp"

namespace scprune::ssc {

using linalg::Matrix;

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct Run {
  std::vector<std::size_t> labels;
  double inertia = 0.0;
};

Matrix plus_plus_init(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows(), d = points.cols();
  Matrix centers(k, d);
  std::size_t first = rng.index(n);
  std::copy(points.row(first).begin(), points.row(first).end(), centers.row(0).begin());
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points.row(i), centers.row(0));

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : nearest) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      pick = n;
      std::size_t last_positive = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (nearest[i] <= 0.0) continue;
        last_positive = i;
        cumulative += nearest[i];
        if (cumulative > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last_positive;
    } else {
      pick = rng.index(n);
    }
    std::copy(points.row(pick).begin(), points.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centers.row(c)));
    }
  }
  return centers;
}

// Moves the point farthest from its centroid into each empty cluster, never
// emptying another cluster in the process.
void fill_empty_clusters(const Matrix& points, const Matrix& centers, std::vector<std::size_t>& labels,
                         std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t l : labels) ++counts[l];
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] > 0) continue;
    std::size_t best = labels.size();
    double best_dist = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (counts[labels[i]] <= 1) continue;
      const double dist = squared_distance(points.row(i), centers.row(labels[i]));
      if (dist > best_dist) {
        best_dist = dist;
        best = i;
      }
    }
    --counts[labels[best]];
    labels[best] = j;
    ++counts[j];
  }
}

Run lloyd(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iterations) {
  const std::size_t n = points.rows(), d = points.cols();
  Rng rng(seed);
  Matrix centers = plus_plus_init(points, k, rng);
  Run run;
  run.labels.assign(n, 0);
  std::vector<std::size_t> previous;
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iterations, 1); ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = squared_distance(points.row(i), centers.row(c));
        if (dist < best) {
          best = dist;
          run.labels[i] = c;
        }
      }
    }
    fill_empty_clusters(points, centers, run.labels, k);

    centers = Matrix(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = centers.row(run.labels[i]);
      auto src = points.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      ++counts[run.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
      for (double& v : centers.row(c)) v /= static_cast<double>(counts[c]);

    if (run.labels == previous) break;
    previous = run.labels;
  }
  for (std::size_t i = 0; i < n; ++i) run.inertia += squared_distance(points.row(i), centers.row(run.labels[i]));
  return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  const std::size_t n = points.rows();
  if (k < 1 || k > n) {
    fail(ErrorCode::kParameter, "kmeans: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
  std::vector<Run> runs(restarts);
  parallel_for(restarts, options.threads,
               [&](std::size_t r) { runs[r] = lloyd(points, k, seed + r, options.max_iterations); });

  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;

  KMeansResult out;
  out.assignment = canonicalize(runs[best].labels, k);
  out.inertia = runs[best].inertia;
  out.best_restart = best;
  return out;
}

}  // namespace scprune::ssc
