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

EmbeddingLayout pca_layout(const Matrix& z, std::size_t dims) {
  if (dims != 2 && dims != 3) throw ConfigError("PCA layouts are 2D or 3D");
  const std::size_t k = std::min({dims, z.rows() - 1, z.cols()});
  const PcaModel pca = pca_fit(z, k);
  EmbeddingLayout layout;
  layout.method = dims == 2 ? LayoutMethod::kPca2 : LayoutMethod::kPca3;
  layout.coords = Matrix(z.rows(), dims);
  const Matrix t = pca.transform(z);
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < k; ++c) layout.coords(r, c) = t(r, c);
  layout.rows.resize(z.rows());
  std::iota(layout.rows.begin(), layout.rows.end(), std::size_t{0});
  return layout;
}

std::vector<std::size_t> subsample_rows(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (count >= n) return idx;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

std::vector<ComponentRanking> trait_pc_ranking(const Matrix& z, const PcaModel& pca,
                                               std::size_t top_n) {
  if (z.cols() != pca.components.cols()) {
    throw DimensionError("ranking: trait dimension does not match PCA components");
  }
  std::vector<ComponentRanking> out;
  for (std::size_t k = 0; k < pca.k(); ++k) {
    ComponentRanking rank;
    rank.component = k;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      rank.ascending.push_back({r, cosine_distance(z.row(r), pca.components.row(k))});
    }
    std::stable_sort(rank.ascending.begin(), rank.ascending.end(),
                     [](const RankedTrait& a, const RankedTrait& b) { return a.distance < b.distance; });
    const std::size_t take = std::min(top_n, rank.ascending.size());
    rank.top.assign(rank.ascending.begin(), rank.ascending.begin() + static_cast<std::ptrdiff_t>(take));
    rank.bottom.assign(rank.ascending.rbegin(), rank.ascending.rbegin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t i = 0; i < std::min<std::size_t>(3, rank.ascending.size()); ++i) {
      rank.combined_distance += rank.ascending[i].distance;
    }
    out.push_back(std::move(rank));
  }
  return out;
}

ProximityResult cluster_proximity(const Matrix& z, std::span<const std::size_t> members,
                                  const ProximityParams& params) {
  if (members.empty()) throw ConfigError("cluster must have at least one member");
  std::vector<bool> is_member(z.rows(), false);
  for (std::size_t m : members) {
    if (m >= z.rows()) throw MissingDataError("row " + std::to_string(m));
    is_member[m] = true;
  }
  ProximityResult result;
  switch (params.method) {
    case LayoutMethod::kPca2:
      result.layout = pca_layout(z, 2);
      break;
    case LayoutMethod::kPca3:
      result.layout = pca_layout(z, 3);
      break;
    case LayoutMethod::kTsne2:
      result.layout = tsne(z, params.tsne);
      break;
  }
  const Matrix& coords = result.layout.coords;
  result.centroid.assign(coords.cols(), 0.0);
  for (std::size_t m : members) add_scaled(result.centroid, 1.0, coords.row(m));
  for (double& c : result.centroid) c /= static_cast<double>(members.size());

  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (is_member[r]) continue;
    Vector diff = coords.row_vector(r);
    add_scaled(diff, -1.0, result.centroid);
    result.ranked.push_back({r, norm(diff)});
  }
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const RankedTrait& a, const RankedTrait& b) { return a.distance < b.distance; });
  if (result.ranked.size() > params.top_n) result.ranked.resize(params.top_n);
  return result;
}

Heatmap delta_heatmap(const ActivationSet& persona, const ActivationSet& baseline,
                      std::size_t height, std::size_t width) {
  const std::size_t d = persona.d_model();
  if (baseline.d_model() != d) throw DimensionError("heatmap sets differ in d_model");
  if (height == 0 || width == 0 || height * width > d) {
    throw ConfigError("heatmap grid " + std::to_string(height) + "x" + std::to_string(width) +
                      " does not fit d_model " + std::to_string(d));
  }
  const Vector a = mean_rows(persona.rows());
  const Vector b = mean_rows(baseline.rows());
  Heatmap h;
  h.height = height;
  h.width = width;
  const std::size_t cells = height * width;
  h.group_size = (d + cells - 1) / cells;
  h.cells = Matrix(height, width);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t lo = cell * h.group_size;
    const std::size_t hi = std::min(lo + h.group_size, d);
    if (lo >= hi) continue;
    CompensatedSum acc;
    for (std::size_t i = lo; i < hi; ++i) acc.add(std::abs(a[i] - b[i]));
    h.cells.data()[cell] = acc.value() / static_cast<double>(hi - lo);
  }
  for (double v : h.cells.data()) h.max_mean_abs_delta = std::max(h.max_mean_abs_delta, v);
  if (h.max_mean_abs_delta > 0.0) {
    for (double& v : h.cells.data()) v /= h.max_mean_abs_delta;
  }
  return h;
}

}  // namespace persona
