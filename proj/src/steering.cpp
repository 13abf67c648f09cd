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

#include "persona/steering.hpp"

#include <cmath>

#include "persona/errors.hpp"

namespace persona {

std::string to_string(SteeringMode m) {
  switch (m) {
    case SteeringMode::kInduce:
      return "induce";
    case SteeringMode::kAblate:
      return "ablate";
    case SteeringMode::kOrthogonalizeWeights:
      return "orthogonalize";
  }
  return {};
}

SteeringMode steering_mode_from_string(std::string_view s) {
  if (s == "induce") return SteeringMode::kInduce;
  if (s == "ablate") return SteeringMode::kAblate;
  if (s == "orthogonalize" || s == "orthogonalize_weights") {
    return SteeringMode::kOrthogonalizeWeights;
  }
  throw ConfigError("unknown steering mode '" + std::string(s) + "'");
}

bool alpha_in_effective_band(double alpha) noexcept {
  return alpha >= kAlphaBandLow && alpha <= kAlphaBandHigh;
}

void SteeringConfig::validate() const {
  if (mode == SteeringMode::kInduce && !std::isfinite(alpha)) {
    throw ConfigError("alpha must be finite");
  }
  if (mode != SteeringMode::kOrthogonalizeWeights && layers.empty()) {
    throw ConfigError("hook steering needs at least one layer");
  }
  if (direction.r_hat.empty()) throw ConfigError("steering direction is empty");
}

namespace {

void require_unit(std::span<const double> r_hat) {
  const double n = norm(r_hat);
  if (std::abs(n - 1.0) > kUnitTolerance) {
    throw NotUnitError("direction norm " + std::to_string(n) + " is not 1");
  }
}

void require_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionError("vector length " + std::to_string(a) + " vs direction length " +
                         std::to_string(b));
  }
}

}  // namespace

void ablate_in_place(std::span<double> c, std::span<const double> r_hat) {
  require_length(c.size(), r_hat.size());
  require_unit(r_hat);
  add_scaled(c, -dot(r_hat, c), r_hat);
}

Vector ablate(std::span<const double> c, std::span<const double> r_hat) {
  Vector out(c.begin(), c.end());
  ablate_in_place(out, r_hat);
  return out;
}

void orthogonalize_in_place(Matrix& w, std::span<const double> r_hat) {
  if (w.rows() != r_hat.size()) {
    throw DimensionError("writer has " + std::to_string(w.rows()) +
                         " residual-side rows, direction has length " +
                         std::to_string(r_hat.size()));
  }
  require_unit(r_hat);
  // r_hat^T W, one entry per input column.
  Vector proj(w.cols());
  std::vector<CompensatedSum> acc(w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) acc[c].add(r_hat[r] * row[c]);
  }
  for (std::size_t c = 0; c < w.cols(); ++c) proj[c] = acc[c].value();
  for (std::size_t r = 0; r < w.rows(); ++r) add_scaled(w.row(r), -r_hat[r], proj);
}

Matrix orthogonalize(const Matrix& w, std::span<const double> r_hat) {
  Matrix out = w;
  orthogonalize_in_place(out, r_hat);
  return out;
}

void orthogonalize_all(ToyModel& model, std::span<const double> r_hat) {
  for (auto& writer : model.writer_matrices()) orthogonalize_in_place(writer.matrix.get(), r_hat);
}

void induce_in_place(std::span<double> a, std::span<const double> r_hat, double target) {
  require_length(a.size(), r_hat.size());
  require_unit(r_hat);
  add_scaled(a, target - dot(a, r_hat), r_hat);
}

Vector induce(std::span<const double> a, const PersonaDirection& dir, double alpha) {
  Vector out(a.begin(), a.end());
  induce_in_place(out, dir.r_hat, alpha * dir.mu_t);
  return out;
}

ResidualHook make_hook(const SteeringConfig& config) {
  if (config.mode == SteeringMode::kOrthogonalizeWeights) {
    throw ModeError("weight orthogonalisation is applied with orthogonalize_all, not a hook");
  }
  config.validate();
  require_unit(config.direction.r_hat);
  const auto layers = config.layers;
  const Vector r_hat = config.direction.r_hat;
  const double target = config.mode == SteeringMode::kInduce
                            ? config.alpha * config.direction.mu_t
                            : 0.0;
  return [layers, r_hat, target](std::size_t layer, std::size_t, std::span<double> resid) {
    if (!layers.contains(layer)) return;
    add_scaled(resid, target - dot(resid, r_hat), r_hat);
  };
}

ResidualHook compose_hooks(std::vector<ResidualHook> hooks) {
  return [hooks = std::move(hooks)](std::size_t layer, std::size_t pos, std::span<double> resid) {
    for (const auto& h : hooks) {
      if (h) h(layer, pos, resid);
    }
  };
}

}  // namespace persona
