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
#include <map>

#include "persona/errors.hpp"
#include "persona/persona_space.hpp"
#include "persona/rng.hpp"

namespace persona {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    s += e * e;
  }
  return s;
}

Matrix plus_plus_seeds(const Matrix& z, std::size_t k, Rng& rng) {
  const std::size_t n = z.rows();
  Matrix centroids(k, z.cols());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy(z.row(first).begin(), z.row(first).end(), centroids.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t r = 0; r < n; ++r) d2[r] = squared_distance(z.row(r), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double x : d2) total += x;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double running = 0.0;
      pick = n - 1;
      for (std::size_t r = 0; r < n; ++r) {
        running += d2[r];
        if (running > target && d2[r] > 0.0) {
          pick = r;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    std::copy(z.row(pick).begin(), z.row(pick).end(), centroids.row(c).begin());
    for (std::size_t r = 0; r < n; ++r) {
      d2[r] = std::min(d2[r], squared_distance(z.row(r), centroids.row(c)));
    }
  }
  return centroids;
}

int nearest(std::span<const double> x, const Matrix& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

void update_centroids(const Matrix& z, std::span<const int> assign, Matrix& centroids) {
  const std::size_t k = centroids.rows();
  const std::size_t d = z.cols();
  std::vector<std::size_t> counts(k, 0);
  std::vector<std::vector<CompensatedSum>> sums(k, std::vector<CompensatedSum>(d));
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const auto c = static_cast<std::size_t>(assign[r]);
    ++counts[c];
    for (std::size_t i = 0; i < d; ++i) sums[c][i].add(z(r, i));
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t i = 0; i < d; ++i) {
      centroids(c, i) = sums[c][i].value() / static_cast<double>(counts[c]);
    }
  }
}

// Moves each empty cluster's centroid to the point currently farthest from
// its own centroid. Returns true if anything changed.
bool repair_empty(const Matrix& z, std::vector<int>& assign, Matrix& centroids) {
  const std::size_t k = centroids.rows();
  std::vector<std::size_t> counts(k, 0);
  for (int a : assign) ++counts[static_cast<std::size_t>(a)];
  bool changed = false;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      if (counts[static_cast<std::size_t>(assign[r])] <= 1) continue;
      const double d = squared_distance(z.row(r), centroids.row(static_cast<std::size_t>(assign[r])));
      if (d > far_d) {
        far_d = d;
        far = r;
      }
    }
    if (far_d < 0.0) continue;
    --counts[static_cast<std::size_t>(assign[far])];
    assign[far] = static_cast<int>(c);
    counts[c] = 1;
    changed = true;
  }
  if (changed) update_centroids(z, assign, centroids);
  return changed;
}

ClusterModel lloyd(const Matrix& z, Matrix centroids, std::size_t max_iterations) {
  const std::size_t n = z.rows();
  ClusterModel m;
  m.k = centroids.rows();
  m.assignments.assign(n, -1);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t r = 0; r < n; ++r) {
      const int c = nearest(z.row(r), centroids);
      if (c != m.assignments[r]) {
        m.assignments[r] = c;
        changed = true;
      }
    }
    m.iterations = it + 1;
    if (!changed) {
      m.converged = true;
      break;
    }
    update_centroids(z, m.assignments, centroids);
    repair_empty(z, m.assignments, centroids);
    m.objective_trace.push_back(kmeans_objective(z, centroids, m.assignments));
  }
  m.centroids = std::move(centroids);
  m.objective = kmeans_objective(z, m.centroids, m.assignments);
  return m;
}

}  // namespace

double kmeans_objective(const Matrix& z, const Matrix& centroids, std::span<const int> assignments) {
  CompensatedSum acc;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const auto c = static_cast<std::size_t>(assignments[r]);
    for (std::size_t i = 0; i < z.cols(); ++i) {
      const double e = z(r, i) - centroids(c, i);
      acc.add(e * e);
    }
  }
  return acc.value();
}

ClusterModel kmeans(const Matrix& z, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iterations) {
  if (k < 1) throw ConfigError("k must be positive");
  if (k > z.rows()) {
    throw ConfigError("k=" + std::to_string(k) + " exceeds number of points " +
                      std::to_string(z.rows()));
  }
  if (restarts < 1) throw ConfigError("restarts must be positive");
  std::optional<ClusterModel> best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = Rng::substream(seed, r);
    ClusterModel m = lloyd(z, plus_plus_seeds(z, k, rng), max_iterations);
    if (!best || m.objective < best->objective) best = std::move(m);
  }
  return *best;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DimensionError("label vectors differ in length");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, v] : table) index += pairs(v);
  for (const auto& [_, v] : rows) sum_rows += pairs(v);
  for (const auto& [_, v] : cols) sum_cols += pairs(v);
  const double total = pairs(n);
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace persona
