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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "persona/direction.hpp"
#include "persona/reports.hpp"

namespace persona {

struct NearestTrait {
  std::string trait;
  double distance;  // cosine distance in standardised space
};

struct DesignedPersona {
  std::string id;
  std::map<std::size_t, double> weights;  // component -> weight; custom personas
  std::vector<std::string> traits;        // composite personas
  Vector standardized_direction;          // unit, standardised space
  PersonaDirection direction;             // unit r_hat in activation space
  std::vector<NearestTrait> nearest;
};

// normalize(sum_k w_k PC_k). Zero weight vectors and unknown components are
// a ConfigError. The steering direction rescales by the per-dimension std
// back into activation space; mu_t defaults to the library median.
DesignedPersona design_persona(const PersonaSpace& space, const DirectionLibrary& lib,
                               const std::map<std::size_t, double>& weights,
                               std::optional<double> target_projection, std::size_t top_n = 5);

// Normalised sum of the listed traits' directions; mu_t defaults to their
// mean.
DesignedPersona composite_persona(const PersonaSpace& space, const DirectionLibrary& lib,
                                  const std::vector<std::string>& traits,
                                  std::optional<double> target_projection, std::size_t top_n = 5);

std::vector<NearestTrait> nearest_traits(const PersonaSpace& space, std::span<const double> v,
                                         std::size_t top_n);

nlohmann::json designed_persona_json(const DesignedPersona& p);

}  // namespace persona
