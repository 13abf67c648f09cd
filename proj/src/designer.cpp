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

#include "persona/designer.hpp"

#include <algorithm>
#include <cmath>

#include "persona/errors.hpp"

namespace persona {

using nlohmann::json;

namespace {

double median_mu(const DirectionLibrary& lib) {
  std::vector<double> mu;
  for (const auto& d : lib.directions()) mu.push_back(d.mu_t);
  if (mu.empty()) throw StateError("library is empty");
  std::sort(mu.begin(), mu.end());
  const std::size_t n = mu.size();
  return n % 2 ? mu[n / 2] : 0.5 * (mu[n / 2 - 1] + mu[n / 2]);
}

PersonaDirection steering_direction(std::string name, Vector r, double mu_t,
                                    const DirectionLibrary& lib) {
  PersonaDirection d;
  d.trait_name = std::move(name);
  d.layer_index = lib.layer_index();
  d.r_hat = normalize(r);
  d.r_raw = std::move(r);
  d.mu_t = mu_t;
  return d;
}

}  // namespace

std::vector<NearestTrait> nearest_traits(const PersonaSpace& space, std::span<const double> v,
                                         std::size_t top_n) {
  const Matrix& z = space.standardization.z;
  std::vector<RankedTrait> all;
  for (std::size_t r = 0; r < z.rows(); ++r) all.push_back({r, cosine_distance(z.row(r), v)});
  std::stable_sort(all.begin(), all.end(),
                   [](const RankedTrait& a, const RankedTrait& b) { return a.distance < b.distance; });
  std::vector<NearestTrait> out;
  for (std::size_t i = 0; i < std::min(top_n, all.size()); ++i) {
    out.push_back({space.names[all[i].index], all[i].distance});
  }
  return out;
}

DesignedPersona design_persona(const PersonaSpace& space, const DirectionLibrary& lib,
                               const std::map<std::size_t, double>& weights,
                               std::optional<double> target_projection, std::size_t top_n) {
  const Matrix& pcs = space.pca.components;
  Vector v(pcs.cols(), 0.0);
  for (const auto& [k, w] : weights) {
    if (k >= pcs.rows()) {
      throw ConfigError("component " + std::to_string(k) + " outside the " +
                        std::to_string(pcs.rows()) + " fitted components");
    }
    if (!std::isfinite(w)) throw ConfigError("weights must be finite");
    add_scaled(v, w, pcs.row(k));
  }
  if (norm(v) <= kNormEpsilon) throw ConfigError("persona weights are all zero");
  DesignedPersona p;
  p.weights = weights;
  p.standardized_direction = normalize(v);

  Vector act(v.size());
  const Vector& sd = space.standardization.stddev;
  for (std::size_t i = 0; i < v.size(); ++i) act[i] = p.standardized_direction[i] * sd[i];
  if (norm(act) <= kNormEpsilon) throw DegenerateDirectionError("persona lies on constant dimensions");
  p.direction = steering_direction("custom", std::move(act),
                                   target_projection.value_or(median_mu(lib)), lib);
  p.nearest = nearest_traits(space, p.standardized_direction, top_n);
  return p;
}

DesignedPersona composite_persona(const PersonaSpace& space, const DirectionLibrary& lib,
                                  const std::vector<std::string>& traits,
                                  std::optional<double> target_projection, std::size_t top_n) {
  if (traits.empty()) throw ConfigError("composite persona needs at least one trait");
  const Matrix& z = space.standardization.z;
  Vector zs(z.cols(), 0.0), r(lib.d_model(), 0.0);
  double mu = 0.0;
  for (const auto& name : traits) {
    const auto idx = lib.index_of(name);
    if (!idx) throw MissingDataError(name);
    add_scaled(zs, 1.0, z.row(*idx));
    add_scaled(r, 1.0, lib.at(*idx).r_hat);
    mu += lib.at(*idx).mu_t;
  }
  DesignedPersona p;
  p.traits = traits;
  p.standardized_direction = normalize(zs);
  p.direction = steering_direction("composite", std::move(r),
                                   target_projection.value_or(mu / traits.size()), lib);
  p.nearest = nearest_traits(space, p.standardized_direction, top_n);
  return p;
}

json designed_persona_json(const DesignedPersona& p) {
  json weights = json::object();
  for (const auto& [k, w] : p.weights) weights[std::to_string(k)] = w;
  json nearest = json::array();
  for (const auto& n : p.nearest) nearest.push_back({{"trait", n.trait}, {"distance", n.distance}});
  json out = {{"id", p.id},
              {"standardized_direction", p.standardized_direction},
              {"direction", p.direction.r_hat},
              {"layer", p.direction.layer_index},
              {"target_projection", p.direction.mu_t},
              {"nearest_traits", nearest}};
  if (!p.weights.empty()) out["weights"] = weights;
  if (!p.traits.empty()) out["traits"] = p.traits;
  return out;
}

}  // namespace persona
