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

#include "persona/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "persona/errors.hpp"

namespace persona {

using nlohmann::json;

ResidualHook tracing_hook(ResidualHook inner, Vector r_hat, std::set<std::size_t> layers,
                          std::shared_ptr<ProjectionLog> sink) {
  if (layers.empty()) throw ConfigError("tracing needs at least one layer");
  const std::size_t first = *layers.begin();
  auto forwards = std::make_shared<std::size_t>(0);
  return [inner = std::move(inner), r_hat = std::move(r_hat), layers = std::move(layers), sink,
          first, forwards](std::size_t layer, std::size_t pos, std::span<double> resid) {
    const bool traced = layers.contains(layer);
    if (traced && layer == first && pos == 0 && !sink->empty()) ++*forwards;
    const double before = traced ? dot(resid, r_hat) : 0.0;
    if (inner) inner(layer, pos, resid);
    if (traced) sink->push_back({*forwards, layer, pos, before, dot(resid, r_hat)});
  };
}

ProjectionLog last_position_samples(const ProjectionLog& log) {
  std::map<std::pair<std::size_t, std::size_t>, ProjectionSample> last;
  for (const auto& s : log) {
    auto [it, inserted] = last.try_emplace({s.forward, s.layer}, s);
    if (!inserted && s.position >= it->second.position) it->second = s;
  }
  ProjectionLog out;
  for (const auto& [key, s] : last) out.push_back(s);
  return out;
}

SteerRequest steer_request_from_json(const json& j) {
  SteerRequest r;
  try {
    r.trait = j.at("trait").get<std::string>();
    if (j.contains("mode")) r.mode = steering_mode_from_string(j.at("mode").get<std::string>());
    r.alpha = j.value("alpha", r.alpha);
    if (j.contains("layer") && !j.at("layer").is_null()) r.layer = j.at("layer").get<std::size_t>();
    r.prompt = j.value("prompt", std::string{});
    r.max_new_tokens = j.value("max_new_tokens", r.max_new_tokens);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("steer request: ") + e.what());
  }
  return r;
}

std::size_t default_hook_layer(const ToyModelConfig& config) { return config.n_layers / 2; }

SteeringConfig make_steering_config(const ToyModel& model, const PersonaDirection& direction,
                                    SteeringMode mode, double alpha,
                                    std::optional<std::size_t> layer) {
  if (direction.d_model() != model.config().d_model) {
    throw DimensionError("direction has d_model " + std::to_string(direction.d_model()) +
                         ", model has " + std::to_string(model.config().d_model));
  }
  const std::size_t fallback = direction.layer_index <= model.config().n_layers
                                   ? direction.layer_index
                                   : default_hook_layer(model.config());
  const std::size_t l = layer.value_or(fallback);
  if (l > model.config().n_layers) {
    throw ConfigError("layer " + std::to_string(l) + " outside [0, " +
                      std::to_string(model.config().n_layers) + "]");
  }
  SteeringConfig config;
  config.mode = mode;
  config.alpha = alpha;
  config.direction = direction;
  config.layers = {l};
  config.validate();
  return config;
}

SteerOutcome run_steer(const ToyModel& model, const PersonaDirection& direction,
                       const SteerRequest& request) {
  SteerOutcome out;
  out.config = make_steering_config(model, direction, request.mode, request.alpha, request.layer);
  const auto& cfg = model.config();
  out.prompt_tokens = encode_bytes(request.prompt.empty() ? std::string(" ") : request.prompt,
                                   cfg.vocab_size);
  if (out.prompt_tokens.size() + request.max_new_tokens > cfg.max_seq) {
    throw InputError("prompt plus continuation exceeds max_seq " + std::to_string(cfg.max_seq));
  }
  auto log = std::make_shared<ProjectionLog>();
  const auto& r_hat = direction.r_hat;
  if (request.mode == SteeringMode::kOrthogonalizeWeights) {
    ToyModel edited = model;
    orthogonalize_all(edited, r_hat);
    std::set<std::size_t> all;
    for (std::size_t l = 0; l <= cfg.n_layers; ++l) all.insert(l);
    out.generation =
        edited.generate(out.prompt_tokens, request.max_new_tokens, tracing_hook({}, r_hat, all, log));
    out.target_projection = 0.0;
  } else {
    out.generation = model.generate(out.prompt_tokens, request.max_new_tokens,
                                    tracing_hook(make_hook(out.config), r_hat, out.config.layers, log));
    out.target_projection =
        request.mode == SteeringMode::kInduce ? request.alpha * direction.mu_t : 0.0;
  }
  for (const auto& s : *log) {
    out.max_abs_deviation = std::max(out.max_abs_deviation, std::abs(s.after - out.target_projection));
  }
  out.trace = last_position_samples(*log);
  return out;
}

json steer_outcome_json(const SteerOutcome& o) {
  json trace = json::array();
  for (const auto& s : o.trace) {
    trace.push_back({{"step", s.forward}, {"layer", s.layer}, {"position", s.position},
                     {"before", s.before}, {"after", s.after}});
  }
  json layers = json::array();
  for (std::size_t l : o.config.layers) layers.push_back(l);
  return {{"trait", o.config.direction.trait_name},
          {"mode", to_string(o.config.mode)},
          {"alpha", o.config.alpha},
          {"alpha_warning", o.config.alpha_warning()},
          {"layers", layers},
          {"mu_t", o.config.direction.mu_t},
          {"target_projection", o.target_projection},
          {"prompt_tokens", o.prompt_tokens},
          {"continuation_tokens", o.generation.tokens},
          {"continuation_text", decode_tokens(o.generation.tokens)},
          {"max_abs_deviation", o.max_abs_deviation},
          {"trace", trace}};
}

}  // namespace persona
