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

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "persona/direction.hpp"
#include "persona/reports.hpp"
#include "persona/service.hpp"
#include "support.hpp"

using namespace persona;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int exit_code;
  std::string output;
};

// Runs the CLI with stderr folded into the captured output.
Run cli(const std::string& args) {
  const std::string cmd = std::string(PERSONA_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const std::vector<std::pair<std::string, std::string>> kAnalyses = {
    {"pca", ""},
    {"kmeans", ""},
    {"tsne", ""},
    {"greedy", ""},
    {"ranking", ""},
    {"proximity", R"( --params '{"cluster_of": "humble"}')"},
};

}  // namespace

TEST_CASE("full pipeline on the default synthetic spec") {
  const auto w = testing::temp_dir("cli");
  const auto start = std::chrono::steady_clock::now();

  auto r = cli("gen-synthetic --spec " + q(fs::path(PERSONA_DATA_DIR) / "default_synthetic.json") +
               " --out " + q(w / "dumps"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(w / "dumps" / "neutral.actv"));
  CHECK(fs::exists(w / "dumps" / "humble.actv"));

  r = cli("extract --dumps " + q(w / "dumps") + " --out " + q(w / "lib"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const auto lib = load_library(w / "lib");
  CHECK(lib.size() == 179);

  for (const auto& [kind, extra] : kAnalyses) {
    r = cli("analyze " + kind + " --lib " + q(w / "lib") + " --seed 7 --out " + q(w / "reports") +
            extra);
    CHECK_MESSAGE(r.exit_code == 0, (kind + ": " + r.output));
    CHECK(fs::exists(w / "reports" / (kind + ".json")));
    CHECK(fs::exists(w / "reports" / (kind + ".csv")));
  }
  for (const char* svg : {"pca.svg", "tsne.svg", "proximity.svg"}) CHECK(fs::exists(w / "reports" / svg));

  r = cli("heatmap --persona " + q(w / "dumps" / "humble.actv") + " --baseline " +
          q(w / "dumps" / "neutral.actv") + " --grid 8x8 --out " + q(w / "h.pgm") + " --report " +
          q(w / "h.json"));
  CHECK_MESSAGE(r.exit_code == 0, r.output);
  CHECK(slurp(w / "h.pgm").rfind("P5\n8 8\n255\n", 0) == 0);

  r = cli("steer --lib " + q(w / "lib") +
          " --trait humble --mode induce --alpha 1.35 --model-seed 3 --prompt 'Hello there'"
          " --max-new 6 --out " + q(w / "steer.json"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const json t = json::parse(slurp(w / "steer.json"));
  const double target = 1.35 * lib.at("humble").mu_t;
  CHECK(std::abs(t["target_projection"].get<double>() - target) < 1e-12);
  CHECK(t["continuation_tokens"].size() == 6);
  REQUIRE_FALSE(t["trace"].empty());
  for (const auto& s : t["trace"]) CHECK(std::abs(s["after"].get<double>() - target) < 1e-8);

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);

  // The service serves the same bytes the CLI wrote.
  ServiceConfig cfg;
  cfg.analytics_seed = 7;
  SteeringService svc(lib, ToyModel::init(cfg.model), cfg);
  for (const auto& [kind, extra] : kAnalyses) {
    json params = json::object();
    if (kind == "proximity") params["cluster_of"] = "humble";
    CHECK_MESSAGE(report_text(svc.analytics(kind, params)) == slurp(w / "reports" / (kind + ".json")),
                  kind);
  }
  fs::remove_all(w);
}

TEST_CASE("missing dumps and usage errors") {
  const auto w = testing::temp_dir("cli-errors");
  auto r = cli("gen-synthetic --seed 4 --d-model 8 --traits 5 --prompts 3 --clusters 2 --out " +
               q(w / "dumps"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  fs::remove(w / "dumps" / "synthetic_002.actv");
  r = cli("extract --dumps " + q(w / "dumps") + " --out " + q(w / "lib"));
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("synthetic_002") != std::string::npos);

  CHECK(cli("").exit_code == 2);
  CHECK(cli("frobnicate").exit_code == 2);
  CHECK(cli("extract --out x").exit_code == 2);
  CHECK(cli("gen-synthetic --d-model 8 --out " + q(w / "noseed")).exit_code == 2);

  r = cli("gen-synthetic --seed 4 --d-model 8 --traits 5 --prompts 3 --clusters 2 --out " +
          q(w / "dumps2"));
  REQUIRE(r.exit_code == 0);
  REQUIRE(cli("extract --dumps " + q(w / "dumps2") + " --out " + q(w / "lib")).exit_code == 0);
  r = cli("analyze kmeans --lib " + q(w / "lib"));
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("seed") != std::string::npos);
  CHECK(cli("analyze pca --lib " + q(w / "lib")).exit_code == 0);
  CHECK(cli("steer --lib " + q(w / "lib") + " --trait synthetic_000").exit_code == 2);
  CHECK(cli("steer --lib " + q(w / "lib") + " --trait nobody --model-seed 1").exit_code == 3);
  CHECK(cli("steer --lib " + q(w / "lib") + " --trait synthetic_000 --model-seed 1").exit_code == 4);
  CHECK(cli("init-model --seed 2 --out " + q(w / "m.toym")).exit_code == 0);
  CHECK(cli("init-model --out " + q(w / "m2.toym")).exit_code == 2);

  // Out-of-band alpha only warns.
  std::ofstream(w / "spec.json") << R"({"d_model": 64, "n_traits": 4, "n_prompts_per_trait": 3,
                                       "n_clusters": 2, "seed": 1, "layer_index": 4})";
  REQUIRE(cli("gen-synthetic --spec " + q(w / "spec.json") + " --out " + q(w / "d64")).exit_code == 0);
  REQUIRE(cli("extract --dumps " + q(w / "d64") + " --out " + q(w / "lib64")).exit_code == 0);
  r = cli("steer --lib " + q(w / "lib64") + " --trait synthetic_001 --alpha 5 --model-seed 1 --max-new 2");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("warning") != std::string::npos);

  // --workdir resolves relative paths.
  r = cli("--workdir " + q(w) + " analyze pca --lib lib64 --out rel");
  CHECK_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(w / "rel" / "pca.json"));
  fs::remove_all(w);
}
