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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "persona/activation_io.hpp"
#include "persona/core_math.hpp"

namespace persona {

// ---- standardisation -------------------------------------------------------

struct Standardization {
  Matrix z;
  Vector mean;
  Vector stddev;  // population std; 0 marks a constant dimension
};

// Per-dimension zero mean / unit (population) variance. Constant dimensions
// map to zero. Requires at least two rows.
Standardization standardize(const Matrix& x);

// ---- PCA ---------------------------------------------------------------------

struct PcaModel {
  Vector mean;
  Matrix components;  // k x d, orthonormal rows, decreasing variance
  Vector explained_variance;
  double total_variance = 0.0;  // sum over all directions, same normalisation

  std::size_t k() const noexcept { return components.rows(); }
  Vector explained_variance_ratio() const;
  Vector transform(std::span<const double> x) const;
  Matrix transform(const Matrix& x) const;
  Matrix reconstruct(const Matrix& coords) const;
};

// Top-k right singular directions of the centred data, each flipped so its
// largest-magnitude entry is positive. Requires 1 <= k <= min(n-1, d).
PcaModel pca_fit(const Matrix& z, std::size_t k);

struct ErrorCurvePoint {
  std::size_t k;
  double relative_error;  // mse_k / mse_0
};

// k = 0 .. min(n-1, d); mse_0 is the mean-only reconstruction error.
std::vector<ErrorCurvePoint> pca_error_curve(const Matrix& z);

// ---- greedy basis selection --------------------------------------------------

struct BaselineSize {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct GreedyReport {
  std::vector<std::size_t> ranked;  // row indices in pick order
  std::vector<double> errors;       // mse after each pick
  std::vector<BaselineSize> baseline;
};

// MSE of reconstructing every row of z from span(rows in `order`), for each
// prefix length 1..m.
std::vector<double> prefix_errors(const Matrix& z, std::span<const std::size_t> order,
                                  std::size_t m);

// Each step adds the row whose inclusion minimises the MSE of projecting
// every row onto the basis span. Ties go to the lower row index.
GreedyReport greedy_basis_selection(const Matrix& z, std::size_t m);

struct BaselineReport {
  std::vector<BaselineSize> per_size;          // sizes 1..m
  std::vector<std::vector<double>> per_trial;  // trial -> errors
};

// Seeded random permutations; trial t uses Rng::substream(seed, t).
BaselineReport random_baseline(const Matrix& z, std::size_t m, std::size_t trials,
                               std::uint64_t seed);

// ---- k-means -----------------------------------------------------------------

struct ClusterModel {
  std::size_t k = 0;
  Matrix centroids;
  std::vector<int> assignments;  // per row
  double objective = 0.0;        // sum of squared distances
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // best restart, per Lloyd iteration
};

inline constexpr std::size_t kKmeansMaxIterations = 500;

// Lloyd iterations from k-means++ seeds, best objective over `restarts`.
ClusterModel kmeans(const Matrix& z, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iterations = kKmeansMaxIterations);

double kmeans_objective(const Matrix& z, const Matrix& centroids, std::span<const int> assignments);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// ---- t-SNE -------------------------------------------------------------------

struct TsneParams {
  double perplexity = 12.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iteration = 250;
};

struct ConditionalAffinities {
  Matrix p;  // row i is P(j | i); zero diagonal
  Vector beta;
  Vector achieved_perplexity;
};

inline constexpr double kPerplexityEntropyTolerance = 1e-10;

// Per-row binary search over the Gaussian precision to hit `perplexity`.
ConditionalAffinities conditional_affinities(const Matrix& x, double perplexity);
// (P + P^T) / 2n.
Matrix joint_affinities(const ConditionalAffinities& c);

double tsne_cost(const Matrix& p, const Matrix& y);
Matrix tsne_gradient(const Matrix& p, const Matrix& y);

enum class LayoutMethod { kPca2, kPca3, kTsne2 };
std::string to_string(LayoutMethod m);
LayoutMethod layout_method_from_string(std::string_view s);

struct EmbeddingLayout {
  LayoutMethod method = LayoutMethod::kPca2;
  Matrix coords;                  // n x 2 or n x 3
  std::vector<std::size_t> rows;  // source row for each coordinate row
  double final_cost = 0.0;        // t-SNE only
};

// Exact t-SNE. Requires 3 <= perplexity < n/3.
EmbeddingLayout tsne(const Matrix& z, const TsneParams& params);

EmbeddingLayout pca_layout(const Matrix& z, std::size_t dims);

// Seeded subsample (without replacement) of row indices, returned sorted.
std::vector<std::size_t> subsample_rows(std::size_t n, std::size_t count, std::uint64_t seed);
Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);

// ---- trait / PC ranking ------------------------------------------------------

struct RankedTrait {
  std::size_t index;
  double distance;
};

struct ComponentRanking {
  std::size_t component;
  std::vector<RankedTrait> ascending;  // every trait
  std::vector<RankedTrait> top;        // closest top_n
  std::vector<RankedTrait> bottom;     // farthest top_n, farthest first
  double combined_distance = 0.0;      // sum of the three smallest distances
};

// Cosine distance between each row of z and each component, in the original
// standardised space.
std::vector<ComponentRanking> trait_pc_ranking(const Matrix& z, const PcaModel& pca,
                                               std::size_t top_n = 10);

// ---- cluster proximity -------------------------------------------------------

struct ProximityParams {
  LayoutMethod method = LayoutMethod::kPca3;
  std::size_t top_n = 5;
  TsneParams tsne;
};

struct ProximityResult {
  EmbeddingLayout layout;
  Vector centroid;
  std::vector<RankedTrait> ranked;  // non-members, ascending Euclidean distance
};

ProximityResult cluster_proximity(const Matrix& z, std::span<const std::size_t> members,
                                  const ProximityParams& params);

// ---- activation-delta heatmap ----------------------------------------------

struct Heatmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t group_size = 0;
  Matrix cells;  // height x width, max-normalised to [0, 1]
  double max_mean_abs_delta = 0.0;
};

Heatmap delta_heatmap(const ActivationSet& persona, const ActivationSet& baseline,
                      std::size_t height, std::size_t width);

}  // namespace persona
