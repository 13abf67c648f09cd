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

// Property-test generators and independent oracles shared by the tests.

#include <gmpxx.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "persona/core_math.hpp"
#include "persona/rng.hpp"
#include "persona/toy_model.hpp"

namespace testing {

using persona::Matrix;
using persona::Vector;

// ---- generators ---------------------------------------------------------

struct Gen {
  persona::Rng rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }
  double scalar(double lo, double hi) { return rng.uniform(lo, hi); }

  Vector vector(std::size_t d, double scale = 1.0) {
    Vector v(d);
    for (double& x : v) x = scale * rng.normal();
    return v;
  }

  // Mixed magnitudes so cancellation paths get exercised.
  Vector wide_vector(std::size_t d) {
    Vector v(d);
    for (double& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-3.0, 3.0));
    return v;
  }

  Vector unit(std::size_t d) {
    for (;;) {
      Vector v = vector(d);
      if (persona::norm(v) > 1e-3) return persona::normalize(v);
    }
  }

  Matrix matrix(std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& x : m.data()) x = scale * rng.normal();
    return m;
  }
};

// ---- exact arithmetic ---------------------------------------------------

inline mpq_class exact(double x) {
  mpq_class q;
  mpq_set_d(q.get_mpq_t(), x);
  return q;
}

inline mpq_class exact_dot(std::span<const double> u, std::span<const double> v) {
  mpq_class acc = 0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += exact(u[i]) * exact(v[i]);
  return acc;
}

inline double abs_diff(const mpq_class& exact_value, double approx) {
  mpq_class d = exact_value - exact(approx);
  return std::abs(d.get_d());
}

// ---- scalar reference forward pass --------------------------------------
//
// Written with plain loops straight from the model definition; shares only
// the weights with the production forward.

inline Matrix reference_logits(const persona::ToyModel& m, const std::vector<int>& tokens) {
  const auto& c = m.config();
  const std::size_t n = tokens.size(), d = c.d_model, hd = d / c.n_heads;
  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t i = 0; i < d; ++i)
      x[p][i] = m.token_embedding()(i, tokens[p]) + m.positional_embedding()(i, p);

  auto rms = [&](const std::vector<double>& v) {
    double s = 0;
    for (double e : v) s += e * e;
    const double k = 1.0 / std::sqrt(s / d + persona::kRmsNormEpsilon);
    std::vector<double> out(v);
    for (double& e : out) e *= k;
    return out;
  };
  auto apply = [](const Matrix& w, const std::vector<double>& v) {
    std::vector<double> out(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t k = 0; k < w.cols(); ++k) out[r] += w(r, k) * v[k];
    return out;
  };
  auto gelu = [](double v) {
    return 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) * (v + 0.044715 * v * v * v)));
  };

  for (const auto& layer : m.layers()) {
    std::vector<std::vector<double>> q(n), k(n), v(n);
    for (std::size_t p = 0; p < n; ++p) {
      const auto h = rms(x[p]);
      q[p] = apply(layer.wq, h);
      k[p] = apply(layer.wk, h);
      v[p] = apply(layer.wv, h);
    }
    std::vector<std::vector<double>> mixed(n, std::vector<double>(d, 0.0));
    for (std::size_t head = 0; head < c.n_heads; ++head) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(i + 1);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          double acc = 0;
          for (std::size_t e = 0; e < hd; ++e) acc += q[i][head * hd + e] * k[j][head * hd + e];
          s[j] = acc / std::sqrt(static_cast<double>(hd));
          mx = std::max(mx, s[j]);
        }
        double z = 0;
        for (double& e : s) z += (e = std::exp(e - mx));
        for (std::size_t j = 0; j <= i; ++j)
          for (std::size_t e = 0; e < hd; ++e) mixed[i][head * hd + e] += s[j] / z * v[j][head * hd + e];
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      const auto a = apply(layer.wo, mixed[p]);
      for (std::size_t i = 0; i < d; ++i) x[p][i] += a[i];
    }
    for (std::size_t p = 0; p < n; ++p) {
      auto up = apply(layer.w_up, rms(x[p]));
      for (double& e : up) e = gelu(e);
      const auto down = apply(layer.w_down, up);
      for (std::size_t i = 0; i < d; ++i) x[p][i] += down[i];
    }
  }
  Matrix logits(n, c.vocab_size);
  for (std::size_t p = 0; p < n; ++p) {
    const auto h = rms(x[p]);
    const auto l = apply(m.unembedding(), h);
    for (std::size_t t = 0; t < c.vocab_size; ++t) logits(p, t) = l[t];
  }
  return logits;
}

// ---- clustering oracles -------------------------------------------------

// Exhaustive optimum of the k = 2 objective over all bipartitions.
inline double brute_force_two_means(const Matrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    if (mask & 1u) continue;  // fix row 0 in group 0; each split once
    double total = 0;
    for (int g = 0; g < 2; ++g) {
      std::vector<double> c(d, 0.0);
      std::size_t count = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (((mask >> r) & 1u) != static_cast<std::uint32_t>(g)) continue;
        ++count;
        for (std::size_t j = 0; j < d; ++j) c[j] += x(r, j);
      }
      for (double& e : c) e /= static_cast<double>(count);
      for (std::size_t r = 0; r < n; ++r) {
        if (((mask >> r) & 1u) != static_cast<std::uint32_t>(g)) continue;
        for (std::size_t j = 0; j < d; ++j) total += (x(r, j) - c[j]) * (x(r, j) - c[j]);
      }
    }
    best = std::min(best, total);
  }
  return best;
}

// Pair-counting definition of the adjusted Rand index.
inline double pair_counting_ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
      pairs += 1;
    }
  }
  const double expected = in_a * in_b / pairs;
  const double max_index = 0.5 * (in_a + in_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

// Mean squared residual of projecting every row onto one row's direction.
inline double singleton_mse(const Matrix& z, std::size_t basis) {
  const auto b = z.row(basis);
  double bb = 0;
  for (double e : b) bb += e * e;
  double total = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const auto x = z.row(r);
    double xb = 0;
    for (std::size_t j = 0; j < z.cols(); ++j) xb += x[j] * b[j];
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double res = x[j] - (bb > 0 ? xb / bb : 0.0) * b[j];
      total += res * res;
    }
  }
  return total / static_cast<double>(z.rows() * z.cols());
}

inline double plain_cosine_distance(std::span<const double> u, std::span<const double> v) {
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  return 1.0 - uv / std::sqrt(uu * vv);
}

// ---- files --------------------------------------------------------------

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("persona-test-" + name + "-" +
                                                      std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
