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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "persona/direction.hpp"
#include "persona/persona_space.hpp"

namespace persona {

// Standardised library plus a PCA fitted with every available component.
struct PersonaSpace {
  std::vector<std::string> names;
  Standardization standardization;
  PcaModel pca;
};

PersonaSpace fit_persona_space(const DirectionLibrary& lib);

// Analysis kinds: "pca", "kmeans", "tsne", "greedy", "ranking", "proximity".
// Missing seeds are a ConfigError for every kind that consumes randomness.
nlohmann::json run_analysis(std::string_view kind, const DirectionLibrary& lib,
                            const nlohmann::json& params);

bool is_analysis_kind(std::string_view kind);

// Canonical serialisation shared by the CLI and the service cache.
std::string report_text(const nlohmann::json& report);
std::string report_csv(std::string_view kind, const nlohmann::json& report);
// Empty when the kind has no layout.
std::string report_svg(std::string_view kind, const nlohmann::json& report);

// Writes <kind>.json, <kind>.csv and, for layouts, <kind>.svg.
std::vector<std::filesystem::path> write_report_files(std::string_view kind,
                                                      const nlohmann::json& report,
                                                      const std::filesystem::path& out_dir);

nlohmann::json heatmap_report(const Heatmap& h);
// Binary 8-bit PGM (P5).
std::string heatmap_pgm(const Heatmap& h);

struct ScatterPoint {
  std::string label;
  double x;
  double y;
  int group;  // colour index; negative for none
  bool highlight = false;
};
std::string scatter_svg(const std::vector<ScatterPoint>& points, std::string_view title);

}  // namespace persona
