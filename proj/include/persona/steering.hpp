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

#include <set>
#include <span>
#include <string>
#include <vector>

#include "persona/core_math.hpp"
#include "persona/direction.hpp"
#include "persona/toy_model.hpp"

namespace persona {

enum class SteeringMode { kInduce, kAblate, kOrthogonalizeWeights };

std::string to_string(SteeringMode m);
SteeringMode steering_mode_from_string(std::string_view s);

// Reported alpha band for coherent induction. Values outside only warn.
inline constexpr double kAlphaBandLow = 1.3;
inline constexpr double kAlphaBandHigh = 1.4;
inline constexpr double kUnitTolerance = 1e-9;

bool alpha_in_effective_band(double alpha) noexcept;

struct SteeringConfig {
  SteeringMode mode = SteeringMode::kInduce;
  double alpha = 1.35;  // induce only
  PersonaDirection direction;
  // Hook layers; ignored for weight orthogonalisation, which covers every
  // writer.
  std::set<std::size_t> layers;

  // Throws ConfigError for non-finite alpha or an empty layer set in hook
  // modes.
  void validate() const;
  bool alpha_warning() const noexcept {
    return mode == SteeringMode::kInduce && !alpha_in_effective_band(alpha);
  }
};

// c - (r_hat . c) r_hat. Throws NotUnitError when |r_hat| deviates from 1 by
// more than kUnitTolerance.
Vector ablate(std::span<const double> c, std::span<const double> r_hat);
void ablate_in_place(std::span<double> c, std::span<const double> r_hat);

// (I - r_hat r_hat^T) W for a (d_model x d_in) writer.
Matrix orthogonalize(const Matrix& w, std::span<const double> r_hat);
void orthogonalize_in_place(Matrix& w, std::span<const double> r_hat);

// Projects every residual writer of the model.
void orthogonalize_all(ToyModel& model, std::span<const double> r_hat);

// a - (a . r_hat) r_hat + alpha mu_t r_hat, using the direction's unit vector.
Vector induce(std::span<const double> a, const PersonaDirection& dir, double alpha);
void induce_in_place(std::span<double> a, std::span<const double> r_hat, double target);

// Hook for ToyModel::forward/generate. Throws ModeError for weight mode.
ResidualHook make_hook(const SteeringConfig& config);

// Applies hooks left to right; later hooks see earlier output.
ResidualHook compose_hooks(std::vector<ResidualHook> hooks);

}  // namespace persona
