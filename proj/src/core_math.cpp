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

#include "persona/core_math.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "persona/errors.hpp"

namespace persona {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

Matrix from_eigen(const RowMajor& e) {
  Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  std::copy(e.data(), e.data() + e.size(), m.data().begin());
  return m;
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length " + std::to_string(a) +
                         " vs " + std::to_string(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix storage does not match shape");
  }
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require_same_length(rows[r].size(), m.cols(), "from_rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Vector Matrix::col_vector(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

double dot(std::span<const double> u, std::span<const double> v) {
  require_same_length(u.size(), v.size(), "dot");
  CompensatedSum acc;
  for (std::size_t i = 0; i < u.size(); ++i) acc.add(u[i] * v[i]);
  return acc.value();
}

double norm(std::span<const double> v) {
  // Scaled by the max magnitude first.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  CompensatedSum acc;
  for (double x : v) {
    const double y = x / scale;
    acc.add(y * y);
  }
  return scale * std::sqrt(acc.value());
}

Vector normalize(std::span<const double> v) {
  const double n = norm(v);
  if (!(n > kNormEpsilon)) {
    throw DegenerateDirectionError("cannot normalize vector with norm " + std::to_string(n));
  }
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  require_same_length(u.size(), v.size(), "cosine_distance");
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > kNormEpsilon) || !(nv > kNormEpsilon)) {
    throw DegenerateDirectionError("cosine distance of zero-norm vector");
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < u.size(); ++i) acc.add((u[i] / nu) * (v[i] / nv));
  const double cos = std::clamp(acc.value(), -1.0, 1.0);
  return 1.0 - cos;
}

void add_scaled(std::span<double> y, double alpha, std::span<const double> x) {
  require_same_length(y.size(), x.size(), "add_scaled");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

Vector mean_rows(const Matrix& m) {
  Vector out(m.cols(), 0.0);
  if (m.rows() == 0) return out;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    CompensatedSum acc;
    for (std::size_t r = 0; r < m.rows(); ++r) acc.add(m(r, c));
    out[c] = acc.value() / static_cast<double>(m.rows());
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_same_length(a.cols(), b.rows(), "matmul");
  RowMajor r = view(a) * view(b);
  return from_eigen(r);
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  require_same_length(a.cols(), b.cols(), "matmul_transposed");
  RowMajor r = view(a) * view(b).transpose();
  return from_eigen(r);
}

Svd thin_svd(const Matrix& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(view(a)),
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  Svd out;
  out.u = from_eigen(svd.matrixU());
  const auto& s = svd.singularValues();
  out.s.assign(s.data(), s.data() + s.size());
  out.vt = from_eigen(svd.matrixV().transpose());
  return out;
}

LeastSquaresFit least_squares_project(const Matrix& x, const Matrix& basis) {
  if (basis.rows() == 0) throw DimensionError("least_squares_project: empty basis");
  require_same_length(x.cols(), basis.cols(), "least_squares_project");

  // basis = U S V^T; span(rows) = span(V_r). pinv(basis) = V_r S_r^-1 U_r^T.
  const Svd svd = thin_svd(basis);
  const double smax = svd.s.empty() ? 0.0 : svd.s.front();
  std::size_t rank = 0;
  while (rank < svd.s.size() && svd.s[rank] > kRankTolerance * smax) ++rank;

  const std::size_t n = x.rows();
  const std::size_t m = basis.rows();
  const std::size_t d = x.cols();

  // Coordinates of each row in the retained right-singular basis.
  Matrix coords(n, rank);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < rank; ++k) coords(i, k) = dot(x.row(i), svd.vt.row(k));

  LeastSquaresFit fit;
  fit.reconstruction = Matrix(n, d);
  fit.coefficients = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < rank; ++k) {
      add_scaled(fit.reconstruction.row(i), coords(i, k), svd.vt.row(k));
      const double scaled = coords(i, k) / svd.s[k];
      for (std::size_t j = 0; j < m; ++j) fit.coefficients(i, j) += scaled * svd.u(j, k);
    }
  }
  fit.mse = mean_squared_difference(x, fit.reconstruction);
  return fit;
}

double mean_squared_difference(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("mean_squared_difference: shape mismatch");
  }
  if (a.empty()) return 0.0;
  CompensatedSum acc;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double e = da[i] - db[i];
    acc.add(e * e);
  }
  return acc.value() / static_cast<double>(da.size());
}

}  // namespace persona
