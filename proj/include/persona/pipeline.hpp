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

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "persona/direction.hpp"
#include "persona/steering.hpp"
#include "persona/toy_model.hpp"

namespace persona {

struct ProjectionSample {
  std::size_t forward = 0;  // index of the forward pass within a generation
  std::size_t layer = 0;
  std::size_t position = 0;
  double before = 0.0;  // projection onto r_hat entering the hook
  double after = 0.0;
};

using ProjectionLog = std::vector<ProjectionSample>;

// Wraps `inner` (may be empty) and logs projections onto r_hat at `layers`.
ResidualHook tracing_hook(ResidualHook inner, Vector r_hat, std::set<std::size_t> layers,
                          std::shared_ptr<ProjectionLog> sink);

// Keeps the last position of each (forward, layer) pair.
ProjectionLog last_position_samples(const ProjectionLog& log);

struct SteerRequest {
  std::string trait;
  SteeringMode mode = SteeringMode::kInduce;
  double alpha = 1.35;
  // Defaults to the direction's layer, or n_layers / 2 when that is out of
  // range for the model.
  std::optional<std::size_t> layer;
  std::string prompt;
  std::size_t max_new_tokens = 16;
};

SteerRequest steer_request_from_json(const nlohmann::json& j);

std::size_t default_hook_layer(const ToyModelConfig& config);

// Builds a SteeringConfig for one direction; checks the direction fits the
// model and the layer is in range.
SteeringConfig make_steering_config(const ToyModel& model, const PersonaDirection& direction,
                                    SteeringMode mode, double alpha,
                                    std::optional<std::size_t> layer);

struct SteerOutcome {
  SteeringConfig config;
  std::vector<int> prompt_tokens;
  Generation generation;
  ProjectionLog trace;  // last position of each forward pass
  double target_projection = 0.0;
  double max_abs_deviation = 0.0;  // |after - target| over every hooked position
};

// Greedy generation under steering. Orthogonalisation runs on a copy of the
// model and traces every layer without modifying the stream.
SteerOutcome run_steer(const ToyModel& model, const PersonaDirection& direction,
                       const SteerRequest& request);

nlohmann::json steer_outcome_json(const SteerOutcome& outcome);

}  // namespace persona
