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
#include <json.hpp>

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "persona/persona.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("persona-capi-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json take(char* s) {
  REQUIRE(s != nullptr);
  json j = json::parse(s);
  persona_string_free(s);
  return j;
}

constexpr const char* kSpec =
    R"({"d_model": 16, "n_traits": 6, "n_prompts_per_trait": 4, "n_clusters": 2,
        "noise_sigma": 0.05, "seed": 3, "layer_index": 2,
        "trait_names": ["a", "b", "c", "d", "e", "f"]})";

}  // namespace

TEST_CASE("status names and exit codes") {
  CHECK(std::string(persona_status_name(PERSONA_OK)) == "ok");
  CHECK(persona_exit_code(PERSONA_OK) == 0);
  CHECK(persona_exit_code(PERSONA_ERR_CONFIG) == 2);
  CHECK(persona_exit_code(PERSONA_ERR_MODE) == 2);
  CHECK(persona_exit_code(PERSONA_ERR_MISSING_DATA) == 3);
  CHECK(persona_exit_code(PERSONA_ERR_FORMAT) == 3);
  CHECK(persona_exit_code(PERSONA_ERR_NOT_UNIT) == 4);
  CHECK(persona_exit_code(PERSONA_ERR_INTERNAL) == 1);
  for (int s : {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 99})
    CHECK(std::strlen(persona_status_name(static_cast<persona_status>(s))) > 0);
}

TEST_CASE("null arguments and bad JSON are reported, not crashed on") {
  persona_library* lib = nullptr;
  CHECK(persona_library_load(nullptr, &lib) == PERSONA_ERR_INPUT);
  CHECK(std::strlen(persona_last_error()) > 0);
  CHECK(persona_generate_synthetic("{not json", "/tmp") == PERSONA_ERR_CONFIG);
  CHECK(persona_generate_synthetic(R"({"d_model": 8})", "/tmp") == PERSONA_ERR_CONFIG);
  CHECK(std::string(persona_last_error()).find("seed") != std::string::npos);
  CHECK(persona_library_load("/nonexistent/dir", &lib) == PERSONA_ERR_IO);
  CHECK(lib == nullptr);
  persona_library_free(nullptr);
  persona_model_free(nullptr);
  persona_server_free(nullptr);
}

TEST_CASE("generate, extract, analyse and reload") {
  const auto dir = scratch("pipeline");
  REQUIRE(persona_generate_synthetic(kSpec, (dir / "dumps").c_str()) == PERSONA_OK);
  persona_library* lib = nullptr;
  REQUIRE(persona_library_extract((dir / "dumps").c_str(), nullptr, "diff_of_means", &lib) ==
          PERSONA_OK);
  CHECK(persona_library_size(lib) == 6);
  CHECK(persona_library_d_model(lib) == 16);
  const char* name = nullptr;
  REQUIRE(persona_library_trait_name(lib, 2, &name) == PERSONA_OK);
  CHECK(std::string(name) == "c");
  CHECK(persona_library_trait_name(lib, 6, &name) == PERSONA_ERR_INPUT);

  std::vector<double> r(16);
  double mu = 0;
  REQUIRE(persona_library_direction(lib, "c", r.data(), r.size(), &mu) == PERSONA_OK);
  double n2 = 0;
  for (double v : r) n2 += v * v;
  CHECK(std::abs(n2 - 1.0) < 1e-12);
  CHECK(mu > 0);
  CHECK(persona_library_direction(lib, "zz", r.data(), r.size(), &mu) == PERSONA_ERR_MISSING_DATA);
  CHECK(persona_library_direction(lib, "c", r.data(), 3, &mu) == PERSONA_ERR_DIMENSION);

  char* report = nullptr;
  CHECK(persona_analyze(lib, "kmeans", "{}", nullptr, &report) == PERSONA_ERR_CONFIG);
  REQUIRE(persona_analyze(lib, "kmeans", R"({"seed": 1, "k": 2})", (dir / "out").c_str(), &report) ==
          PERSONA_OK);
  const json km = take(report);
  CHECK(km["clusters"].size() == 2);
  CHECK(fs::exists(dir / "out" / "kmeans.json"));
  CHECK(fs::exists(dir / "out" / "kmeans.csv"));

  REQUIRE(persona_library_save(lib, (dir / "lib").c_str()) == PERSONA_OK);
  persona_library* back = nullptr;
  REQUIRE(persona_library_load((dir / "lib").c_str(), &back) == PERSONA_OK);
  CHECK(persona_library_size(back) == 6);
  std::vector<double> r2(16);
  persona_library_direction(back, "c", r2.data(), r2.size(), nullptr);
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(r2[i] - r[i]) < 1e-6);

  fs::remove(dir / "dumps" / "d.actv");
  persona_library* broken = nullptr;
  CHECK(persona_library_extract((dir / "dumps").c_str(), nullptr, "diff_of_means", &broken) ==
        PERSONA_ERR_MISSING_DATA);
  CHECK(std::string(persona_last_error()).find("'d'") != std::string::npos);
  CHECK(persona_library_extract((dir / "dumps").c_str(), nullptr, "median", &broken) ==
        PERSONA_ERR_CONFIG);

  persona_library_free(back);
  persona_library_free(lib);
  fs::remove_all(dir);
}

TEST_CASE("models and steering") {
  const auto dir = scratch("steer");
  REQUIRE(persona_generate_synthetic(kSpec, (dir / "dumps").c_str()) == PERSONA_OK);
  persona_library* lib = nullptr;
  REQUIRE(persona_library_extract((dir / "dumps").c_str(), nullptr, "diff_of_means", &lib) ==
          PERSONA_OK);
  persona_model* model = nullptr;
  CHECK(persona_model_create(R"({"d_model": 16, "n_heads": 3, "seed": 1})", &model) ==
        PERSONA_ERR_CONFIG);
  REQUIRE(persona_model_create(R"({"d_model": 16, "n_layers": 3, "n_heads": 2, "d_mlp": 32,
                                   "max_seq": 64, "seed": 5})",
                               &model) == PERSONA_OK);
  REQUIRE(persona_model_save(model, (dir / "m.toym").c_str()) == PERSONA_OK);
  persona_model* loaded = nullptr;
  REQUIRE(persona_model_load((dir / "m.toym").c_str(), &loaded) == PERSONA_OK);

  double mu = 0;
  persona_library_direction(lib, "b", nullptr, 0, &mu);
  char* out = nullptr;
  REQUIRE(persona_steer(loaded, lib,
                        R"({"trait": "b", "mode": "induce", "alpha": 1.35, "layer": 2,
                            "prompt": "hi", "max_new_tokens": 5})",
                        &out) == PERSONA_OK);
  const json t = take(out);
  CHECK(t["continuation_tokens"].size() == 5);
  CHECK(t["target_projection"].get<double>() == doctest::Approx(1.35 * mu));
  CHECK(t["max_abs_deviation"].get<double>() < 1e-8);
  CHECK(t["alpha_warning"] == false);

  CHECK(persona_steer(loaded, lib, R"({"trait": "b", "mode": "boost"})", &out) == PERSONA_ERR_CONFIG);
  CHECK(persona_steer(loaded, lib, R"({"trait": "q"})", &out) == PERSONA_ERR_MISSING_DATA);
  CHECK(persona_steer(loaded, lib, R"({"trait": "b", "layer": 9})", &out) == PERSONA_ERR_CONFIG);

  persona_model* wide = nullptr;
  REQUIRE(persona_model_create(R"({"seed": 1})", &wide) == PERSONA_OK);
  CHECK(persona_steer(wide, lib, R"({"trait": "b"})", &out) == PERSONA_ERR_DIMENSION);

  persona_model_free(wide);
  persona_model_free(loaded);
  persona_model_free(model);
  persona_library_free(lib);
  fs::remove_all(dir);
}

TEST_CASE("heatmap") {
  char* report = nullptr;
  const std::string golden = PERSONA_GOLDEN_DIR;
  const auto dir = scratch("heatmap");
  REQUIRE(persona_heatmap((golden + "/minimal_1x2.actv").c_str(),
                          (golden + "/minimal_1x2.actv").c_str(), 1, 2,
                          (dir / "h.pgm").c_str(), &report) == PERSONA_OK);
  const json h = take(report);
  CHECK(h["max_mean_abs_delta"] == 0.0);
  CHECK(fs::exists(dir / "h.pgm"));
  CHECK(persona_heatmap((golden + "/minimal_1x2.actv").c_str(),
                        (golden + "/neutral_2x3.actv").c_str(), 1, 2, nullptr, &report) ==
        PERSONA_ERR_DIMENSION);
  fs::remove_all(dir);
}

TEST_CASE("server lifecycle") {
  persona_server* server = nullptr;
  REQUIRE(persona_server_create(nullptr, nullptr, R"({"analytics_seed": 7, "model": {"seed": 2}})",
                                &server) == PERSONA_OK);
  int port = 0;
  REQUIRE(persona_server_start(server, "127.0.0.1", 0, &port) == PERSONA_OK);
  CHECK(port > 0);
  persona_server_stop(server);
  persona_server_free(server);
}
