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

#include "persona/direction.hpp"
#include "persona/errors.hpp"
#include "persona/service.hpp"
#include "support.hpp"

using namespace persona;
using testing::Gen;
namespace fs = std::filesystem;

namespace {

ActivationSet make_set(ActivationLabel label, const std::vector<Vector>& rows,
                       std::vector<std::string> ids = {}) {
  if (ids.empty())
    for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back("p" + std::to_string(i));
  return ActivationSet(0, std::move(label), std::move(ids), Matrix::from_rows(rows));
}

std::pair<ActivationSet, ActivationSet> random_pair(Gen& g, std::size_t n, std::size_t d) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("q" + std::to_string(i));
  return {ActivationSet(1, ActivationLabel::trait("t"), ids, g.matrix(n, d, 2.0)),
          ActivationSet(1, ActivationLabel::neutral(), ids, g.matrix(n, d, 2.0))};
}

}  // namespace

TEST_CASE("diff of means: hand example") {
  const auto trait = make_set(ActivationLabel::trait("x"), {{1, 0}, {3, 0}});
  const auto neutral = make_set(ActivationLabel::neutral(), {{0, 0}, {0, 2}});
  const auto d = diff_of_means(trait, neutral);
  CHECK(d.r_raw[0] == doctest::Approx(2.0));
  CHECK(d.r_raw[1] == doctest::Approx(-1.0));
  CHECK(d.r_hat[0] == doctest::Approx(2 / std::sqrt(5.0)));
  CHECK(d.r_hat[1] == doctest::Approx(-1 / std::sqrt(5.0)));
  CHECK(d.mu_t == doctest::Approx(4 / std::sqrt(5.0)).epsilon(1e-14));
  CHECK(d.n_t == 2);
  CHECK(d.n_n == 2);
  CHECK(d.trait_name == "x");
  CHECK(d.method == DirectionMethod::kDiffOfMeans);
  CHECK_THROWS_AS(diff_of_means(trait, make_set(ActivationLabel::neutral(), {{1, 0}, {3, 0}})),
                  DegenerateDirectionError);
}

TEST_CASE("paired mean difference: hand example and pairing") {
  const auto trait = make_set(ActivationLabel::trait("x"), {{2, 0}, {0, 4}});
  const auto neutral = make_set(ActivationLabel::neutral(), {{1, 0}, {0, 2}});
  const auto d = paired_mean_diff(trait, neutral);
  CHECK(d.r_raw == Vector{0.5, 1.0});
  CHECK(d.method == DirectionMethod::kPairedMeanDiff);

  const auto shuffled = make_set(ActivationLabel::neutral(), {{0, 2}, {1, 0}}, {"p1", "p0"});
  CHECK_THROWS_AS(paired_mean_diff(trait, shuffled), PairingError);
  const auto shorter = make_set(ActivationLabel::neutral(), {{0, 2}});
  CHECK_THROWS_AS(paired_mean_diff(trait, shorter), PairingError);
  CHECK_NOTHROW(diff_of_means(trait, shorter));
}

TEST_CASE("mismatched sets are rejected") {
  const auto a = make_set(ActivationLabel::trait("x"), {{1, 0}});
  const auto b = make_set(ActivationLabel::neutral(), {{1, 0, 0}});
  CHECK_THROWS_AS(diff_of_means(a, b), DimensionError);
  const ActivationSet other_layer(5, ActivationLabel::neutral(), {"p0"}, Matrix::from_rows({{0, 1}}));
  CHECK_THROWS(diff_of_means(a, other_layer));
}

TEST_CASE("both estimators agree on paired sets") {
  Gen g(41);
  for (int trial = 0; trial < 300; ++trial) {
    auto [t, n] = random_pair(g, g.size(1, 20), g.size(1, 24));
    const auto a = diff_of_means(t, n), b = paired_mean_diff(t, n);
    for (std::size_t i = 0; i < a.r_raw.size(); ++i) CHECK(std::abs(a.r_raw[i] - b.r_raw[i]) < 1e-12);
  }
}

TEST_CASE("scale equivariance and permutation invariance") {
  Gen g(42);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = g.size(2, 10), d = g.size(2, 12);
    auto [t, ne] = random_pair(g, n, d);
    const double c = std::exp(g.scalar(-3, 3));
    Matrix ts = t.rows(), ns = ne.rows();
    for (double& x : ts.data()) x *= c;
    for (double& x : ns.data()) x *= c;
    const ActivationSet t2(1, t.label(), t.prompt_ids(), ts), n2(1, ne.label(), ne.prompt_ids(), ns);
    const auto a = diff_of_means(t, ne), b = diff_of_means(t2, n2);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(std::abs(b.r_raw[i] - c * a.r_raw[i]) < 1e-10 * std::max(1.0, c));
      CHECK(std::abs(b.r_hat[i] - a.r_hat[i]) < 1e-10);
    }
    CHECK(std::abs(b.mu_t - c * a.mu_t) < 1e-10 * std::max(1.0, c));

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    g.rng.shuffle(perm);
    Matrix tp(n, d);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) tp(i, j) = t.rows()(perm[i], j);
      ids[i] = t.prompt_ids()[perm[i]];
    }
    const auto p = diff_of_means(ActivationSet(1, t.label(), ids, tp), ne);
    for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(p.r_raw[i] - a.r_raw[i]) < 1e-12);
  }
}

TEST_CASE("synthetic recovery at desk scale") {
  const SyntheticSpec spec = demo_synthetic_spec();
  const auto data = generate_synthetic(spec);
  const auto lib = extract_all(synthetic_lexicon(data.ground_truth), data.trait_sets,
                               data.neutral_set, DirectionMethod::kDiffOfMeans);
  REQUIRE(lib.size() == spec.n_traits);
  for (std::size_t t = 0; t < lib.size(); ++t) {
    CHECK(cosine_distance(lib.at(t).r_hat, data.ground_truth.planted_directions[t]) < 0.05);
    CHECK(lib.at(t).mu_t > 0.0);
    CHECK(lib.at(t).d_model() == 64);
    CHECK(lib.at(t).layer_index == spec.layer_index);
  }
}

TEST_CASE("extract_all from a dump directory") {
  SyntheticSpec spec;
  spec.d_model = 8;
  spec.n_traits = 12;
  spec.n_prompts_per_trait = 4;
  spec.n_clusters = 3;
  spec.seed = 7;
  spec.trait_names = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"};
  const auto dir = testing::temp_dir("extract");
  write_synthetic(generate_synthetic(spec), dir);
  const auto lex = load_lexicon(dir / "lexicon.json");
  const auto lib = extract_all(lex, dir, DirectionMethod::kPairedMeanDiff);
  CHECK(lib.size() == 12);
  CHECK(lib.names() == spec.trait_names);
  CHECK(lib.d_model() == 8);

  fs::remove(dir / "f.actv");
  try {
    extract_all(lex, dir, DirectionMethod::kDiffOfMeans);
    FAIL("expected MissingDataError");
  } catch (const MissingDataError& e) {
    CHECK(e.trait() == "f");
    CHECK(std::string(e.what()).find("'f'") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("library persistence") {
  SyntheticSpec spec;
  spec.d_model = 16;
  spec.n_traits = 5;
  spec.n_prompts_per_trait = 3;
  spec.n_clusters = 2;
  spec.seed = 11;
  const auto data = generate_synthetic(spec);
  const auto lib = extract_all(synthetic_lexicon(data.ground_truth), data.trait_sets,
                               data.neutral_set, DirectionMethod::kDiffOfMeans);
  const auto dir = testing::temp_dir("library");
  save_library(lib, dir / "lib.dir");
  CHECK(fs::exists(dir / "lib.dir" / kLibraryFileName));
  const auto back = load_library(dir / "lib.dir");
  REQUIRE(back.size() == lib.size());
  CHECK(back.names() == lib.names());
  CHECK(back.content_hash() == lib.content_hash());
  for (std::size_t t = 0; t < lib.size(); ++t) {
    CHECK(back.at(t).mu_t == lib.at(t).mu_t);
    CHECK(std::abs(norm(back.at(t).r_hat) - 1.0) < 1e-12);
    CHECK(cosine_distance(back.at(t).r_hat, lib.at(t).r_hat) < 1e-12);
    for (std::size_t i = 0; i < 16; ++i)
      CHECK(back.at(t).r_raw[i] == static_cast<double>(static_cast<float>(lib.at(t).r_raw[i])));
  }
  CHECK_THROWS_AS(lib.at("nope"), MissingDataError);

  auto dup = lib.directions();
  dup.push_back(dup.front());
  CHECK_THROWS_AS(DirectionLibrary{dup}, FormatError);

  auto bytes = encode_library(lib);
  bytes[1] = 'Q';
  CHECK_THROWS_AS(decode_library(bytes), FormatError);
  fs::remove_all(dir);
}
