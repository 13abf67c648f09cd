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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "persona/designer.hpp"
#include "persona/errors.hpp"
#include "persona/reports.hpp"
#include "persona/service.hpp"
#include "support.hpp"

using namespace persona;
using nlohmann::json;
using testing::Gen;

namespace {

DirectionLibrary small_library(std::size_t traits = 40, std::size_t d = 32, std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.d_model = d;
  spec.n_traits = traits;
  spec.n_prompts_per_trait = 4;
  spec.n_clusters = 4;
  spec.seed = seed;
  spec.layer_index = 2;
  return synthetic_library(spec, DirectionMethod::kDiffOfMeans);
}

ActivationSet set_of(const std::vector<Vector>& rows) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back("p" + std::to_string(i));
  return ActivationSet(0, ActivationLabel::neutral(), ids, Matrix::from_rows(rows));
}

}  // namespace

TEST_CASE("ranking: hand example") {
  PcaModel pca;
  pca.components = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix z = Matrix::from_rows({{1, 0}, {1, 1}, {0, 1}, {-1, 0}});
  const auto r = trait_pc_ranking(z, pca, 3);
  REQUIRE(r.size() == 2);
  const auto& pc1 = r[0];
  CHECK(pc1.top[0].index == 0);
  CHECK(pc1.top[1].index == 1);
  CHECK(pc1.top[2].index == 2);
  CHECK(pc1.bottom[0].index == 3);
  CHECK(pc1.bottom[0].distance == doctest::Approx(2.0));
  CHECK(pc1.top[1].distance == doctest::Approx(1 - 1 / std::sqrt(2.0)));
  CHECK(pc1.combined_distance == doctest::Approx(2 - 1 / std::sqrt(2.0)));
}

TEST_CASE("ranking matches a plain cosine scan") {
  const auto lib = small_library();
  const auto space = fit_persona_space(lib);
  const auto& z = space.standardization.z;
  const auto ranks = trait_pc_ranking(z, space.pca, 10);
  for (const auto& r : ranks) {
    REQUIRE(r.ascending.size() == lib.size());
    for (std::size_t i = 0; i < r.ascending.size(); ++i) {
      const auto& t = r.ascending[i];
      CHECK(t.distance >= 0.0);
      CHECK(t.distance <= 2.0);
      CHECK(std::abs(t.distance - testing::plain_cosine_distance(
                                      z.row(t.index), space.pca.components.row(r.component))) < 1e-12);
      if (i) CHECK(r.ascending[i - 1].distance <= t.distance);
    }
    CHECK(r.bottom.front().index == r.ascending.back().index);
  }
}

TEST_CASE("proximity") {
  Gen g(50);
  Matrix z = g.matrix(12, 5);
  for (std::size_t j = 0; j < 5; ++j) z(7, j) = z(2, j);
  ProximityParams p;
  p.method = LayoutMethod::kPca3;
  p.top_n = 20;
  const std::vector<std::size_t> members{2};
  const auto res = cluster_proximity(z, members, p);
  REQUIRE(res.ranked.size() == 11);
  CHECK(res.ranked[0].index == 7);
  CHECK(res.ranked[0].distance < 1e-12);
  for (std::size_t i = 1; i < res.ranked.size(); ++i)
    CHECK(res.ranked[i - 1].distance <= res.ranked[i].distance);

  std::vector<std::size_t> all(12);
  for (std::size_t i = 0; i < 12; ++i) all[i] = i;
  CHECK(cluster_proximity(z, all, p).ranked.empty());
  p.top_n = 3;
  CHECK(cluster_proximity(z, members, p).ranked.size() == 3);
  CHECK_THROWS_AS(cluster_proximity(z, std::vector<std::size_t>{}, p), ConfigError);
}

TEST_CASE("delta heatmap") {
  const auto base = set_of({{0, 0, 0, 0}, {2, 2, 2, 2}});
  auto h = delta_heatmap(base, base, 2, 2);
  CHECK(h.max_mean_abs_delta == 0.0);
  for (double v : h.cells.data()) CHECK(v == 0.0);

  const auto shifted = set_of({{0, 0, 3, 0}, {2, 2, 5, 2}});
  h = delta_heatmap(shifted, base, 2, 2);
  CHECK(h.max_mean_abs_delta == doctest::Approx(3.0));
  CHECK(h.cells == Matrix::from_rows({{0, 0}, {1, 0}}));

  // Grouped cells average |delta| over consecutive dimensions.
  const auto pair = set_of({{4, 0, 1, 1}});
  h = delta_heatmap(pair, set_of({{0, 0, 0, 0}}), 1, 2);
  CHECK(h.group_size == 2);
  CHECK(h.cells(0, 0) == doctest::Approx(1.0));
  CHECK(h.cells(0, 1) == doctest::Approx(0.5));

  Gen g(51);
  std::vector<Vector> a(3), b(3);
  for (auto& v : a) v = g.vector(4096);
  for (auto& v : b) v = g.vector(4096);
  const auto big = delta_heatmap(set_of(a), set_of(b), 64, 64);
  CHECK(big.group_size == 1);
  CHECK(big.cells.rows() == 64);
  const auto swapped = delta_heatmap(set_of(b), set_of(a), 64, 64);
  CHECK(swapped.cells == big.cells);
  double mx = 0;
  for (double v : big.cells.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    mx = std::max(mx, v);
  }
  CHECK(mx == 1.0);

  CHECK_THROWS_AS(delta_heatmap(base, base, 3, 2), ConfigError);
  CHECK_THROWS_AS(delta_heatmap(base, base, 0, 2), ConfigError);
  CHECK_THROWS_AS(delta_heatmap(base, set_of({{1, 2}}), 1, 1), DimensionError);

  const auto pgm = heatmap_pgm(delta_heatmap(shifted, base, 2, 2));
  CHECK(pgm.rfind("P5\n", 0) == 0);
  CHECK(static_cast<unsigned char>(pgm[pgm.size() - 2]) == 255);
}

TEST_CASE("analysis reports") {
  const auto lib = small_library();
  CHECK_THROWS_AS(run_analysis("kmeans", lib, json::object()), ConfigError);
  CHECK_THROWS_AS(run_analysis("tsne", lib, json::object()), ConfigError);
  CHECK_THROWS_AS(run_analysis("greedy", lib, json::object()), ConfigError);
  CHECK_THROWS_AS(run_analysis("umap", lib, json::object()), ConfigError);

  const auto km = run_analysis("kmeans", lib, {{"seed", 3}, {"k", 4}});
  CHECK(km == run_analysis("kmeans", lib, {{"seed", 3}, {"k", 4}}));
  std::set<std::string> seen;
  for (const auto& c : km["clusters"])
    for (const auto& m : c["members"]) CHECK(seen.insert(m.get<std::string>()).second);
  CHECK(seen.size() == lib.size());
  CHECK(km["n_traits"] == lib.size());

  const auto pca = run_analysis("pca", lib, json::object());
  const auto csv = report_csv("pca", pca);
  CHECK(csv.rfind("trait,pc1,pc2,pc3\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(lib.size() + 1));
  CHECK(report_svg("pca", pca).find("<svg") != std::string::npos);

  const auto greedy = run_analysis("greedy", lib, {{"seed", 7}, {"m", 5}, {"trials", 10}});
  CHECK(greedy["steps"].size() == 5);
  CHECK(report_svg("greedy", greedy).empty());
  for (const auto& s : greedy["steps"])
    CHECK(s["error"].get<double>() <= s["baseline_mean"].get<double>() + 1e-12);

  const auto prox = run_analysis("proximity", lib,
                                 {{"seed", 2}, {"cluster_of", lib.at(0).trait_name}, {"k", 4}, {"top_n", 100}});
  CHECK(prox["cluster"].size() + prox["ranked"].size() == lib.size());
  CHECK_THROWS_AS(run_analysis("kmeans", lib, {{"seed", -1}}), ConfigError);
  CHECK_THROWS_AS(run_analysis("proximity", lib, {{"members", {"nobody"}}}), MissingDataError);

  const auto dir = testing::temp_dir("reports");
  const auto files = write_report_files("pca", pca, dir);
  CHECK(files.size() == 3);
  std::ifstream in(dir / "pca.json");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == report_text(pca));
  std::filesystem::remove_all(dir);

  const DirectionLibrary one({lib.at(0)});
  CHECK_THROWS_AS(run_analysis("pca", one, json::object()), StateError);
}

TEST_CASE("custom persona from components") {
  const auto lib = small_library();
  const auto space = fit_persona_space(lib);
  const auto ranks = trait_pc_ranking(space.standardization.z, space.pca, 5);
  for (double w : {1.0, 2.0}) {
    const auto p = design_persona(space, lib, {{0, w}}, std::nullopt);
    for (std::size_t i = 0; i < p.standardized_direction.size(); ++i)
      CHECK(std::abs(p.standardized_direction[i] - space.pca.components(0, i)) < 1e-12);
    CHECK(std::abs(norm(p.direction.r_hat) - 1.0) < 1e-12);
    REQUIRE(p.nearest.size() == 5);
    CHECK(p.nearest[0].trait == lib.at(ranks[0].top[0].index).trait_name);
    CHECK(p.direction.layer_index == lib.layer_index());
  }
  // Activation direction is the std-rescaled standardised one.
  const auto p = design_persona(space, lib, {{1, 0.5}, {3, -2.0}}, 3.5);
  CHECK(p.direction.mu_t == 3.5);
  Vector scaled(p.standardized_direction.size());
  for (std::size_t i = 0; i < scaled.size(); ++i)
    scaled[i] = p.standardized_direction[i] * space.standardization.stddev[i];
  CHECK(cosine_distance(scaled, p.direction.r_hat) < 1e-12);

  // Nearest traits agree with a brute-force scan.
  std::vector<std::pair<double, std::size_t>> scan;
  for (std::size_t t = 0; t < lib.size(); ++t)
    scan.push_back({testing::plain_cosine_distance(space.standardization.z.row(t),
                                                   p.standardized_direction), t});
  std::stable_sort(scan.begin(), scan.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < p.nearest.size(); ++i) {
    CHECK(p.nearest[i].trait == lib.at(scan[i].second).trait_name);
    CHECK(std::abs(p.nearest[i].distance - scan[i].first) < 1e-12);
  }

  // Default target is the library median.
  std::vector<double> mus;
  for (const auto& d : lib.directions()) mus.push_back(d.mu_t);
  std::sort(mus.begin(), mus.end());
  const double median = 0.5 * (mus[mus.size() / 2 - 1] + mus[mus.size() / 2]);
  CHECK(design_persona(space, lib, {{0, 1}}, std::nullopt).direction.mu_t == doctest::Approx(median));

  CHECK_THROWS_AS(design_persona(space, lib, {}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(design_persona(space, lib, {{0, 0.0}}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(design_persona(space, lib, {{space.pca.k(), 1.0}}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(design_persona(space, lib, {{0, std::nan("")}}, std::nullopt), ConfigError);
}

TEST_CASE("a trait's own component coordinates recover it") {
  const auto lib = small_library();
  const auto space = fit_persona_space(lib);
  for (std::size_t t : {std::size_t{0}, std::size_t{13}, lib.size() - 1}) {
    const Vector coords = space.pca.transform(space.standardization.z.row(t));
    std::map<std::size_t, double> weights;
    // transform() centres by the PCA mean, which is zero for standardised data.
    for (std::size_t k = 0; k < coords.size(); ++k) weights[k] = coords[k];
    const auto p = design_persona(space, lib, weights, std::nullopt, 1);
    CHECK(p.nearest[0].trait == lib.at(t).trait_name);
    CHECK(p.nearest[0].distance < 1e-6);
  }
}

TEST_CASE("composite persona") {
  const auto lib = small_library();
  const auto space = fit_persona_space(lib);
  const auto& t = lib.at(4);
  const auto single = composite_persona(space, lib, {t.trait_name}, std::nullopt);
  CHECK(cosine_distance(single.direction.r_hat, t.r_hat) < 1e-12);
  CHECK(single.direction.mu_t == doctest::Approx(t.mu_t));
  CHECK(single.nearest[0].trait == t.trait_name);

  const auto& u = lib.at(9);
  const auto pair = composite_persona(space, lib, {t.trait_name, u.trait_name}, 2.0);
  Vector sum = t.r_hat;
  add_scaled(sum, 1.0, u.r_hat);
  CHECK(cosine_distance(pair.direction.r_hat, sum) < 1e-12);
  CHECK(pair.direction.mu_t == 2.0);
  CHECK(designed_persona_json(pair).contains("traits"));

  CHECK_THROWS_AS(composite_persona(space, lib, {"missing"}, std::nullopt), MissingDataError);
  CHECK_THROWS_AS(composite_persona(space, lib, {}, std::nullopt), ConfigError);
}
