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
#include <span>
#include <vector>

#include "scprune/linalg.hpp"
#include "scprune/nn.hpp"

namespace scprune::ssc {

/// Self-expressive coefficients C with X ≈ X·C and a zero diagonal.
struct SelfExpressiveness {
  linalg::Matrix coeffs;
  double lambda = 0.0;
  std::size_t iterations_run = 0;
  double final_objective = 0.0;
  std::vector<double> objective_trace;  // objective after each iteration
};

/// Partition of channel indices into k non-empty clusters, labelled in order
/// of each cluster's smallest member.
struct ClusterAssignment {
  std::vector<std::size_t> labels;
  std::size_t k = 0;

  std::vector<std::vector<std::size_t>> members() const;
  std::vector<std::size_t> sizes() const;

  bool operator==(const ClusterAssignment&) const = default;
};

/// Relabels clusters by ascending smallest member index. Throws if a label
/// is out of range or a cluster is empty.
ClusterAssignment canonicalize(std::span<const std::size_t> labels, std::size_t k);

ClusterAssignment identity_assignment(std::size_t c);

/// Stacks [c,H,W] maps into an [N·H·W, c] matrix (one column per channel),
/// subsamples rows down to max_rows, then scales columns to unit norm.
linalg::Matrix build_data_matrix(std::span<const nn::Tensor> feature_maps, std::size_t max_rows,
                                 std::uint64_t seed);

/// Noise-tolerant sparse self-representation:
///   min_C ‖C‖₁ + (λ/2)‖X − X·C‖²_F  subject to diag(C) = 0,
/// with λ = alpha / μ and μ = min_j max_{i≠j} |x_iᵀx_j| over columns that
/// correlate with at least one other column. Solved by monotone FISTA with
/// backtracking on the Gram matrix, so the cost per iteration depends only on
/// the column count.
SelfExpressiveness solve_self_expressive(const linalg::Matrix& x, double alpha, std::size_t max_iter,
                                         double tol);

/// |C| + |Cᵀ|
linalg::Matrix affinity(const linalg::Matrix& coeffs);

/// I − D^{-1/2}·W·D^{-1/2}, with zero degrees treated as 1.
linalg::Matrix normalized_laplacian(const linalg::Matrix& w);

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 100;
  std::size_t threads = 1;
};

struct KMeansResult {
  ClusterAssignment assignment;
  double inertia = 0.0;
  std::size_t best_restart = 0;
};

/// k-means++ seeded Lloyd iterations on the rows of `points`. Restart r uses
/// seed + r; the lowest-inertia restart wins, ties going to the lower index.
KMeansResult kmeans(const linalg::Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Spectral embedding of the affinity of `c` followed by k-means on the
/// row-normalized eigenvectors of the k smallest Laplacian eigenvalues.
ClusterAssignment spectral_cluster(const SelfExpressiveness& c, std::size_t k, std::uint64_t seed,
                                   const KMeansOptions& options = {});

struct SubspaceClusteringOptions {
  double alpha = 20.0;
  std::size_t max_iter = 500;
  double tol = 1e-6;
  std::size_t max_rows = 4096;
  std::uint64_t seed = 42;
  KMeansOptions kmeans;
};

struct SubspaceClustering {
  ClusterAssignment assignment;
  SelfExpressiveness expressiveness;
};

/// Full pipeline: data matrix, self-expressive coefficients, spectral clustering.
SubspaceClustering cluster_feature_maps(std::span<const nn::Tensor> feature_maps, std::size_t k,
                                        const SubspaceClusteringOptions& options);

}  // namespace scprune::ssc
