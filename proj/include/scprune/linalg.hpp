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
#include <span>
#include <vector>

namespace scprune::linalg {

/// Dense row-major float64 matrix. Entries are checked finite whenever the
/// matrix is built from caller-supplied data.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column j pairs with eigenvalues[j]
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// aᵀ·b without materializing the transpose.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations. The input
/// is symmetrized as (A+Aᵀ)/2 first.
EigenDecomposition sym_eigen(const Matrix& a);

/// Solves (gram + ridge·I)·X = rhs by Cholesky. gram must be symmetric.
/// Throws kSingular when the system is not numerically positive definite.
Matrix solve_normal_equations(const Matrix& gram, const Matrix& rhs, double ridge);

/// argmin_X ‖A·X − B‖²_F + ridge·‖X‖²_F via the normal equations.
Matrix ridge_least_squares(const Matrix& a, const Matrix& b, double ridge);

/// Proximal operator of t·|x|.
double soft_threshold(double x, double t);

double frobenius_norm(const Matrix& m);
double trace(const Matrix& m);

}  // namespace scprune::linalg
