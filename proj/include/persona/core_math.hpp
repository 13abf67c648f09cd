// Copyright 2026 The persona-steer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace persona {

// Activation-space vector. Always 64-bit internally even when the on-disk
// payload is f32.
using Vector = std::vector<double>;

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  Vector row_vector(std::size_t r) const {
    auto s = row(r);
    return {s.begin(), s.end()};
  }
  Vector col_vector(std::size_t c) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline constexpr double kNormEpsilon = 1e-30;
inline constexpr double kRankTolerance = 1e-10;

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> v);
// Throws DegenerateDirectionError when the norm is at or below kNormEpsilon.
Vector normalize(std::span<const double> v);
double cosine_distance(std::span<const double> u, std::span<const double> v);

// axpy-style helpers used across modules.
void add_scaled(std::span<double> y, double alpha, std::span<const double> x);
Vector mean_rows(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_transposed(const Matrix& a, const Matrix& b);  // a * b^T

// Thin SVD of an (r x c) matrix: a = U diag(s) V^T with s descending.
struct Svd {
  Matrix u;   // r x p
  Vector s;   // p
  Matrix vt;  // p x c
};
Svd thin_svd(const Matrix& a);

struct LeastSquaresFit {
  Matrix coefficients;    // n x m
  Matrix reconstruction;  // n x d
  double mse = 0.0;
};

// Projects every row of x onto span(rows of basis). Singular values below
// kRankTolerance * sigma_max are dropped (pseudoinverse).
LeastSquaresFit least_squares_project(const Matrix& x, const Matrix& basis);

// Mean of squared entries of (a - b), compensated.
double mean_squared_difference(const Matrix& a, const Matrix& b);

}  // namespace persona
