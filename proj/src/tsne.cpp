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
#include <limits>

#include "persona/errors.hpp"
#include "persona/persona_space.hpp"
#include "persona/rng.hpp"

namespace persona {

namespace {

Matrix squared_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double e = x(i, c) - x(j, c);
        s += e * e;
      }
      d(i, j) = d(j, i) = s;
    }
  }
  return d;
}

// Entropy (nats) of row i's conditional distribution at precision beta;
// fills `row`. Distances are shifted by their row minimum.
double row_entropy(const Matrix& d2, std::size_t i, double beta, std::vector<double>& row) {
  const std::size_t n = d2.rows();
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) dmin = std::min(dmin, d2(i, j));
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = j == i ? 0.0 : std::exp(-beta * (d2(i, j) - dmin));
    total += row[j];
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] /= total;
    weighted += row[j] * (d2(i, j) - dmin);
  }
  return std::log(total) + beta * weighted;
}

}  // namespace

ConditionalAffinities conditional_affinities(const Matrix& x, double perplexity) {
  const std::size_t n = x.rows();
  if (n < 3) throw ConfigError("t-SNE affinities need at least three points");
  if (!(perplexity >= 1.0) || !(perplexity <= static_cast<double>(n - 1))) {
    throw ConfigError("perplexity " + std::to_string(perplexity) + " infeasible for n=" +
                      std::to_string(n));
  }
  const Matrix d2 = squared_distances(x);
  const double target = std::log(perplexity);
  ConditionalAffinities out;
  out.p = Matrix(n, n);
  out.beta.assign(n, 1.0);
  out.achieved_perplexity.assign(n, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double h = row_entropy(d2, i, beta, row);
    for (int it = 0; it < 2000 && std::abs(h - target) > kPerplexityEntropyTolerance; ++it) {
      // Entropy decreases as beta grows.
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      if (hi - lo <= std::numeric_limits<double>::epsilon() * beta) break;
      h = row_entropy(d2, i, beta, row);
    }
    out.beta[i] = beta;
    out.achieved_perplexity[i] = std::exp(h);
    std::copy(row.begin(), row.end(), out.p.row(i).begin());
  }
  return out;
}

Matrix joint_affinities(const ConditionalAffinities& c) {
  const std::size_t n = c.p.rows();
  Matrix p(n, n);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) = (c.p(i, j) + c.p(j, i)) / denom;
  return p;
}

namespace {

// Student-t kernel numerators and their off-diagonal sum.
double kernel(const Matrix& y, Matrix& num) {
  const std::size_t n = y.rows();
  num = Matrix(n, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) {
        const double e = y(i, c) - y(j, c);
        s += e * e;
      }
      num(i, j) = num(j, i) = 1.0 / (1.0 + s);
      total += 2.0 * num(i, j);
    }
  }
  return total;
}

void gradient_into(const Matrix& p, const Matrix& y, double exaggeration, Matrix& grad) {
  const std::size_t n = y.rows();
  Matrix num;
  const double total = kernel(y, num);
  grad = Matrix(n, y.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = num(i, j) / total;
      const double mult = 4.0 * (exaggeration * p(i, j) - q) * num(i, j);
      for (std::size_t c = 0; c < y.cols(); ++c) grad(i, c) += mult * (y(i, c) - y(j, c));
    }
  }
}

}  // namespace

double tsne_cost(const Matrix& p, const Matrix& y) {
  Matrix num;
  const double total = kernel(y, num);
  CompensatedSum acc;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      acc.add(p(i, j) * std::log(p(i, j) / (num(i, j) / total)));
    }
  }
  return acc.value();
}

Matrix tsne_gradient(const Matrix& p, const Matrix& y) {
  Matrix g;
  gradient_into(p, y, 1.0, g);
  return g;
}

std::string to_string(LayoutMethod m) {
  switch (m) {
    case LayoutMethod::kPca2:
      return "pca2";
    case LayoutMethod::kPca3:
      return "pca3";
    case LayoutMethod::kTsne2:
      return "tsne2";
  }
  return {};
}

LayoutMethod layout_method_from_string(std::string_view s) {
  if (s == "pca2") return LayoutMethod::kPca2;
  if (s == "pca3" || s == "pca") return LayoutMethod::kPca3;
  if (s == "tsne2" || s == "tsne") return LayoutMethod::kTsne2;
  throw ConfigError("unknown layout method '" + std::string(s) + "'");
}

EmbeddingLayout tsne(const Matrix& z, const TsneParams& params) {
  const std::size_t n = z.rows();
  const double nd = static_cast<double>(n);
  if (!(params.perplexity >= 3.0) || !(params.perplexity < nd / 3.0)) {
    throw ConfigError("t-SNE perplexity " + std::to_string(params.perplexity) +
                      " must satisfy 3 <= perplexity < n/3 (n=" + std::to_string(n) + ")");
  }
  const Matrix p = joint_affinities(conditional_affinities(z, params.perplexity));

  Rng rng(params.seed);
  Matrix y(n, 2);
  for (double& v : y.data()) v = rng.normal(0.0, 1e-4);
  Matrix velocity(n, 2);
  Matrix gains(n, 2, 1.0);
  Matrix grad;

  for (std::size_t it = 0; it < params.iterations; ++it) {
    const double exaggeration =
        it < params.exaggeration_iterations ? params.early_exaggeration : 1.0;
    const double momentum =
        it < params.momentum_switch_iteration ? params.initial_momentum : params.final_momentum;
    gradient_into(p, y, exaggeration, grad);
    for (std::size_t i = 0; i < y.data().size(); ++i) {
      double& g = gains.data()[i];
      const double gr = grad.data()[i];
      double& v = velocity.data()[i];
      g = (std::signbit(gr) != std::signbit(v)) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      v = momentum * v - params.learning_rate * g * gr;
      y.data()[i] += v;
    }
    const Vector mu = mean_rows(y);
    for (std::size_t r = 0; r < n; ++r) add_scaled(y.row(r), -1.0, mu);
  }

  EmbeddingLayout layout;
  layout.method = LayoutMethod::kTsne2;
  layout.coords = std::move(y);
  layout.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) layout.rows[i] = i;
  layout.final_cost = tsne_cost(p, layout.coords);
  return layout;
}

}  // namespace persona
