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

#include "scprune/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scprune/error.hpp"

namespace scprune::linalg {

namespace {

constexpr int kMaxJacobiSweeps = 100;
constexpr double kJacobiThreshold = 1e-12;

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::kShape, "Matrix: " + std::to_string(data_.size()) + " values for shape " +
                                std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) fail(ErrorCode::kInput, "Matrix: non-finite entry");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::kShape, "matmul: " + dims(a) + " times " + dims(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::kShape, "matmul_at_b: " + dims(a) + "ᵀ times " + dims(b));
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto arow = a.row(r);
    auto brow = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ai = arow[i];
      if (ai == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += ai * brow[j];
    }
  }
  return out;
}

EigenDecomposition sym_eigen(const Matrix& input) {
  if (input.rows() != input.cols()) fail(ErrorCode::kShape, "sym_eigen: non-square " + dims(input));
  const std::size_t n = input.rows();

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  Matrix v = Matrix::identity(n);

  auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  const double threshold = kJacobiThreshold * std::max(1.0, frobenius_norm(a));

  bool converged = off_diagonal() <= threshold;
  for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_diagonal() <= threshold;
  }
  if (!converged) {
    fail(ErrorCode::kConvergence, "sym_eigen: Jacobi did not converge in " +
                                      std::to_string(kMaxJacobiSweeps) + " sweeps");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.eigenvalues[j] = a(src, src);
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) norm += v(k, src) * v(k, src);
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, j) = v(k, src) / norm;
  }
  return out;
}

Matrix solve_normal_equations(const Matrix& gram, const Matrix& rhs, double ridge) {
  if (gram.rows() != gram.cols()) fail(ErrorCode::kShape, "normal equations: non-square " + dims(gram));
  if (rhs.rows() != gram.rows()) {
    fail(ErrorCode::kShape, "normal equations: rhs " + dims(rhs) + " for system " + dims(gram));
  }
  if (!(ridge >= 0.0)) fail(ErrorCode::kParameter, "normal equations: ridge must be nonnegative");
  const std::size_t n = gram.rows();

  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(gram(i, i)));
  // Without regularization, a pivot lost in rounding noise means a rank-deficient gram.
  const double pivot_floor =
      ridge > 0.0 ? 0.0 : static_cast<double>(std::max<std::size_t>(n, 1)) * 1e-14 * max_diag;

  // Lower-triangular Cholesky factor.
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = gram(j, j) + ridge;
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > pivot_floor)) {
      fail(ErrorCode::kSingular, "normal equations: matrix is singular at pivot " + std::to_string(j) +
                                     " (ridge " + std::to_string(ridge) + ")");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = gram(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }

  Matrix x = rhs;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
      x(ii, c) = s / l(ii, ii);
    }
  }
  return x;
}

Matrix ridge_least_squares(const Matrix& a, const Matrix& b, double ridge) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::kShape, "ridge_least_squares: A " + dims(a) + " vs B " + dims(b));
  }
  return solve_normal_equations(matmul_at_b(a, a), matmul_at_b(a, b), ridge);
}

double soft_threshold(double x, double t) {
  const double m = std::abs(x) - t;
  if (m <= 0.0) return 0.0;
  return x < 0.0 ? -m : m;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

double trace(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) s += m(i, i);
  return s;
}

}  // namespace scprune::linalg
