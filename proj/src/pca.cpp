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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "persona/errors.hpp"
#include "persona/persona_space.hpp"
#include "persona/rng.hpp"

namespace persona {

Standardization standardize(const Matrix& x) {
  if (x.rows() < 2) throw ConfigError("standardize needs at least two rows");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Standardization s;
  s.mean = mean_rows(x);
  s.stddev.assign(d, 0.0);
  s.z = Matrix(n, d);
  for (std::size_t c = 0; c < d; ++c) {
    CompensatedSum acc;
    for (std::size_t r = 0; r < n; ++r) {
      const double e = x(r, c) - s.mean[c];
      acc.add(e * e);
    }
    const double sd = std::sqrt(acc.value() / static_cast<double>(n));
    if (sd <= 1e-12 * std::max(1.0, std::abs(s.mean[c]))) continue;
    s.stddev[c] = sd;
    for (std::size_t r = 0; r < n; ++r) s.z(r, c) = (x(r, c) - s.mean[c]) / sd;
  }
  return s;
}

// ---- PCA ---------------------------------------------------------------------

Vector PcaModel::explained_variance_ratio() const {
  Vector out(explained_variance.size(), 0.0);
  if (total_variance <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = explained_variance[i] / total_variance;
  return out;
}

Vector PcaModel::transform(std::span<const double> x) const {
  Vector centred(x.begin(), x.end());
  add_scaled(centred, -1.0, mean);
  Vector out(k());
  for (std::size_t i = 0; i < k(); ++i) out[i] = dot(centred, components.row(i));
  return out;
}

Matrix PcaModel::transform(const Matrix& x) const {
  Matrix out(x.rows(), k());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const Vector t = transform(x.row(r));
    std::copy(t.begin(), t.end(), out.row(r).begin());
  }
  return out;
}

Matrix PcaModel::reconstruct(const Matrix& coords) const {
  Matrix out(coords.rows(), mean.size());
  for (std::size_t r = 0; r < coords.rows(); ++r) {
    std::copy(mean.begin(), mean.end(), out.row(r).begin());
    for (std::size_t i = 0; i < k(); ++i) add_scaled(out.row(r), coords(r, i), components.row(i));
  }
  return out;
}

namespace {

Matrix centred(const Matrix& z, const Vector& mean) {
  Matrix c = z;
  for (std::size_t r = 0; r < c.rows(); ++r) add_scaled(c.row(r), -1.0, mean);
  return c;
}

void fix_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

}  // namespace

PcaModel pca_fit(const Matrix& z, std::size_t k) {
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();
  if (n < 2 || k < 1 || k > std::min(n - 1, d)) {
    throw ConfigError("pca_fit: k=" + std::to_string(k) + " outside [1, min(n-1, d)] for n=" +
                      std::to_string(n) + ", d=" + std::to_string(d));
  }
  PcaModel model;
  model.mean = mean_rows(z);
  const Matrix c = centred(z, model.mean);
  const Svd svd = thin_svd(c);

  model.components = Matrix(k, d);
  model.explained_variance.resize(k);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < k; ++i) {
    std::copy(svd.vt.row(i).begin(), svd.vt.row(i).end(), model.components.row(i).begin());
    fix_sign(model.components.row(i));
    model.explained_variance[i] = svd.s[i] * svd.s[i] / denom;
  }
  CompensatedSum total;
  for (double x : c.data()) total.add(x * x);
  model.total_variance = total.value() / denom;
  return model;
}

std::vector<ErrorCurvePoint> pca_error_curve(const Matrix& z) {
  const std::size_t n = z.rows();
  if (n < 2) throw ConfigError("pca_error_curve needs at least two rows");
  const std::size_t d = z.cols();
  const std::size_t kmax = std::min(n - 1, d);
  Matrix residual = centred(z, mean_rows(z));
  const Svd svd = thin_svd(residual);
  const Matrix zero(n, d);
  const double mse0 = mean_squared_difference(residual, zero);

  std::vector<ErrorCurvePoint> curve;
  curve.push_back({0, mse0 > 0.0 ? 1.0 : 0.0});
  for (std::size_t k = 1; k <= kmax; ++k) {
    const auto v = svd.vt.row(k - 1);
    for (std::size_t r = 0; r < n; ++r) add_scaled(residual.row(r), -dot(residual.row(r), v), v);
    const double mse = mean_squared_difference(residual, zero);
    curve.push_back({k, mse0 > 0.0 ? mse / mse0 : 0.0});
  }
  return curve;
}

// ---- greedy ------------------------------------------------------------------

namespace {

// Residuals of every row against a growing orthonormal basis.
class ResidualTracker {
 public:
  explicit ResidualTracker(const Matrix& z) : z_(z), residual_(z) {
    CompensatedSum acc;
    for (double x : z.data()) acc.add(x * x);
    energy_ = acc.value();
    row_norms_.resize(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) row_norms_[r] = norm(z.row(r));
  }

  double mse() const {
    return energy_ / static_cast<double>(z_.rows() * z_.cols());
  }

  // Unit residual direction of row `c`, or nullopt when c already lies in the
  // span (rank exhausted for this candidate).
  std::optional<Vector> new_direction(std::size_t c) const {
    Vector u = residual_.row_vector(c);
    // Second Gram-Schmidt pass against the basis for numerical hygiene.
    for (const auto& q : basis_) add_scaled(u, -dot(u, q), q);
    const double nu = norm(u);
    if (!(nu > kRankTolerance * row_norms_[c]) || !(nu > kNormEpsilon)) return std::nullopt;
    for (double& x : u) x /= nu;
    return u;
  }

  double gain(const Vector& q) const {
    CompensatedSum acc;
    for (std::size_t r = 0; r < residual_.rows(); ++r) {
      const double p = dot(residual_.row(r), q);
      acc.add(p * p);
    }
    return acc.value();
  }

  void add(const Vector& q) {
    const double g = gain(q);
    for (std::size_t r = 0; r < residual_.rows(); ++r) {
      add_scaled(residual_.row(r), -dot(residual_.row(r), q), q);
    }
    basis_.push_back(q);
    energy_ = std::max(0.0, energy_ - g);
  }

 private:
  const Matrix& z_;
  Matrix residual_;
  std::vector<Vector> basis_;
  Vector row_norms_;
  double energy_ = 0.0;
};

}  // namespace

std::vector<double> prefix_errors(const Matrix& z, std::span<const std::size_t> order,
                                  std::size_t m) {
  if (m > order.size()) throw ConfigError("prefix longer than order");
  ResidualTracker tracker(z);
  std::vector<double> out;
  for (std::size_t t = 0; t < m; ++t) {
    if (auto q = tracker.new_direction(order[t])) tracker.add(*q);
    out.push_back(tracker.mse());
  }
  return out;
}

GreedyReport greedy_basis_selection(const Matrix& z, std::size_t m) {
  const std::size_t n = z.rows();
  if (m < 1 || m > n) {
    throw ConfigError("greedy basis size " + std::to_string(m) + " outside [1, " +
                      std::to_string(n) + "]");
  }
  ResidualTracker tracker(z);
  std::vector<bool> used(n, false);
  GreedyReport report;
  for (std::size_t t = 0; t < m; ++t) {
    std::size_t best = n;
    double best_gain = -1.0;
    std::optional<Vector> best_dir;
    for (std::size_t c = 0; c < n; ++c) {
      if (used[c]) continue;
      auto q = tracker.new_direction(c);
      const double g = q ? tracker.gain(*q) : 0.0;
      if (g > best_gain) {
        best_gain = g;
        best = c;
        best_dir = std::move(q);
      }
    }
    used[best] = true;
    if (best_dir) tracker.add(*best_dir);
    report.ranked.push_back(best);
    report.errors.push_back(tracker.mse());
  }
  return report;
}

BaselineReport random_baseline(const Matrix& z, std::size_t m, std::size_t trials,
                               std::uint64_t seed) {
  const std::size_t n = z.rows();
  if (trials < 1) throw ConfigError("random baseline needs at least one trial");
  if (m < 1 || m > n) throw ConfigError("baseline basis size out of range");
  BaselineReport report;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::substream(seed, t);
    rng.shuffle(order);
    report.per_trial.push_back(prefix_errors(z, order, m));
  }
  report.per_size.resize(m);
  for (std::size_t s = 0; s < m; ++s) {
    CompensatedSum acc;
    BaselineSize& out = report.per_size[s];
    out.min = out.max = report.per_trial.front()[s];
    for (const auto& trial : report.per_trial) {
      acc.add(trial[s]);
      out.min = std::min(out.min, trial[s]);
      out.max = std::max(out.max, trial[s]);
    }
    out.mean = acc.value() / static_cast<double>(trials);
  }
  return report;
}

}  // namespace persona
