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

#include "scprune/ssc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scprune/error.hpp"
#include "scprune/util.hpp"

namespace scprune::ssc {

using linalg::Matrix;

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

std::vector<std::size_t> ClusterAssignment::sizes() const {
  std::vector<std::size_t> out(k, 0);
  for (std::size_t label : labels) ++out[label];
  return out;
}

ClusterAssignment canonicalize(std::span<const std::size_t> labels, std::size_t k) {
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> remap(k, kUnset);
  std::size_t next = 0;
  ClusterAssignment out;
  out.k = k;
  out.labels.reserve(labels.size());
  for (std::size_t label : labels) {
    if (label >= k) fail(ErrorCode::kParameter, "cluster label " + std::to_string(label) + " out of range");
    if (remap[label] == kUnset) remap[label] = next++;
    out.labels.push_back(remap[label]);
  }
  if (next != k) {
    fail(ErrorCode::kParameter, "cluster assignment has " + std::to_string(k - next) + " empty cluster(s)");
  }
  return out;
}

ClusterAssignment identity_assignment(std::size_t c) {
  ClusterAssignment out;
  out.k = c;
  out.labels.resize(c);
  for (std::size_t i = 0; i < c; ++i) out.labels[i] = i;
  return out;
}

Matrix build_data_matrix(std::span<const nn::Tensor> feature_maps, std::size_t max_rows, std::uint64_t seed) {
  if (feature_maps.empty()) fail(ErrorCode::kInput, "build_data_matrix: no feature maps");
  const nn::Shape& shape = feature_maps.front().shape();
  if (shape.size() != 3) fail(ErrorCode::kShape, "build_data_matrix: feature maps must be [c,H,W]");
  for (const auto& t : feature_maps) {
    if (t.shape() != shape) {
      fail(ErrorCode::kShape, "build_data_matrix: shape " + nn::shape_string(t.shape()) + " differs from " +
                                  nn::shape_string(shape));
    }
  }
  const std::size_t c = shape[0];
  const std::size_t plane = shape[1] * shape[2];
  const std::size_t total = feature_maps.size() * plane;

  std::vector<std::size_t> rows;
  if (max_rows > 0 && total > max_rows) {
    Rng rng(seed);
    rows = rng.sample_without_replacement(total, max_rows);
  } else {
    rows.resize(total);
    for (std::size_t i = 0; i < total; ++i) rows[i] = i;
  }

  Matrix x(rows.size(), c);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const nn::Tensor& t = feature_maps[rows[r] / plane];
    const std::size_t pos = rows[r] % plane;
    for (std::size_t ch = 0; ch < c; ++ch) x(r, ch) = t[ch * plane + pos];
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    double norm = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) norm += x(r, ch) * x(r, ch);
    if (norm == 0.0) continue;
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < x.rows(); ++r) x(r, ch) /= norm;
  }
  return x;
}

namespace {

double l1_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += std::abs(v);
  return s;
}

double inner(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) s += da[i] * db[i];
  return s;
}

// Largest eigenvalue of a PSD matrix, by power iteration. Only a starting
// point for the backtracking line search, so accuracy is not critical.
double power_iteration(const Matrix& g) {
  const std::size_t n = g.rows();
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n))), w(n);
  double estimate = 0.0;
  for (int it = 0; it < 50; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g(i, j) * v[j];
      w[i] = s;
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    estimate = norm;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
  }
  return estimate;
}

}  // namespace

SelfExpressiveness solve_self_expressive(const Matrix& x, double alpha, std::size_t max_iter, double tol) {
  const std::size_t c = x.cols();
  if (c < 2) fail(ErrorCode::kParameter, "solve_self_expressive: need at least 2 columns");
  if (!(alpha > 1.0)) fail(ErrorCode::kParameter, "solve_self_expressive: alpha must exceed 1");
  if (max_iter == 0) fail(ErrorCode::kParameter, "solve_self_expressive: max_iter must be positive");

  const Matrix g = linalg::matmul_at_b(x, x);

  double mu = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c; ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < c; ++i)
      if (i != j) best = std::max(best, std::abs(g(i, j)));
    if (best > 0.0) mu = std::min(mu, best);
  }
  if (!std::isfinite(mu)) {
    fail(ErrorCode::kDegenerate, "solve_self_expressive: all columns are mutually orthogonal (mu = 0)");
  }

  SelfExpressiveness out;
  out.lambda = alpha / mu;
  const double lambda = out.lambda;
  const double trace_g = linalg::trace(g);

  // f(C) = (λ/2)‖X − XC‖² expressed through G = XᵀX and GC.
  auto smooth = [&](const Matrix& coeffs, const Matrix& gc) {
    return 0.5 * lambda * (trace_g - 2.0 * inner(coeffs, g) + inner(coeffs, gc));
  };

  double step_l = std::max(lambda * power_iteration(g), 1e-12);

  Matrix current(c, c);
  double obj_current = smooth(current, current);
  Matrix y = current;
  double t = 1.0;

  Matrix grad(c, c), z(c, c), diff(c, c);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const Matrix gy = linalg::matmul(g, y);
    const double f_y = smooth(y, gy);
    for (std::size_t i = 0; i < c * c; ++i) grad.data()[i] = lambda * (gy.data()[i] - g.data()[i]);

    Matrix gz;
    double f_z = 0.0;
    for (int attempt = 0;; ++attempt) {
      const double shrink = 1.0 / step_l;
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j)
          z(i, j) = i == j ? 0.0 : linalg::soft_threshold(y(i, j) - grad(i, j) / step_l, shrink);
      gz = linalg::matmul(g, z);
      f_z = smooth(z, gz);
      for (std::size_t i = 0; i < c * c; ++i) diff.data()[i] = z.data()[i] - y.data()[i];
      const double model = f_y + inner(grad, diff) + 0.5 * step_l * inner(diff, diff);
      if (f_z <= model + 1e-12 * std::abs(f_y) || attempt >= 60) break;
      step_l *= 2.0;
    }

    const double obj_z = l1_norm(z) + f_z;
    const double change = std::abs(obj_current - obj_z) / std::max(obj_current, 1e-300);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Matrix previous = current;
    if (obj_z <= obj_current) {
      current = z;
      obj_current = obj_z;
    }
    // Monotone FISTA extrapolation.
    for (std::size_t i = 0; i < c * c; ++i) {
      const double xi = current.data()[i];
      y.data()[i] = xi + (t / t_next) * (z.data()[i] - xi) + ((t - 1.0) / t_next) * (xi - previous.data()[i]);
    }
    t = t_next;
    out.objective_trace.push_back(obj_current);
    out.iterations_run = iter + 1;
    if (change < tol) break;
  }

  out.coeffs = std::move(current);
  out.final_objective = obj_current;
  return out;
}

Matrix affinity(const Matrix& coeffs) {
  if (coeffs.rows() != coeffs.cols()) fail(ErrorCode::kShape, "affinity: coefficients must be square");
  const std::size_t n = coeffs.rows();
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = std::abs(coeffs(i, j)) + std::abs(coeffs(j, i));
  return w;
}

Matrix normalized_laplacian(const Matrix& w) {
  if (w.rows() != w.cols()) fail(ErrorCode::kShape, "normalized_laplacian: affinity must be square");
  const std::size_t n = w.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += w(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(d > 0.0 ? d : 1.0);
  }
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      l(i, j) = (i == j ? 1.0 : 0.0) - inv_sqrt[i] * w(i, j) * inv_sqrt[j];
  return l;
}

ClusterAssignment spectral_cluster(const SelfExpressiveness& c, std::size_t k, std::uint64_t seed,
                                   const KMeansOptions& options) {
  const std::size_t n = c.coeffs.rows();
  if (k < 1 || k > n) {
    fail(ErrorCode::kParameter, "spectral_cluster: k = " + std::to_string(k) + " outside [1, " +
                                    std::to_string(n) + "]");
  }
  const auto eig = linalg::sym_eigen(normalized_laplacian(affinity(c.coeffs)));

  Matrix embedding(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < k; ++j) norm += eig.eigenvectors(i, j) * eig.eigenvectors(i, j);
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < k; ++j) embedding(i, j) = norm > 0.0 ? eig.eigenvectors(i, j) / norm : 0.0;
  }
  return kmeans(embedding, k, seed, options).assignment;
}

SubspaceClustering cluster_feature_maps(std::span<const nn::Tensor> feature_maps, std::size_t k,
                                        const SubspaceClusteringOptions& options) {
  const Matrix x = build_data_matrix(feature_maps, options.max_rows, options.seed);
  SubspaceClustering out;
  out.expressiveness = solve_self_expressive(x, options.alpha, options.max_iter, options.tol);
  out.assignment = spectral_cluster(out.expressiveness, k, options.seed, options.kmeans);
  return out;
}

}  // namespace scprune::ssc
