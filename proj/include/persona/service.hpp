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
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "persona/activation_io.hpp"
#include "persona/direction.hpp"
#include "persona/toy_model.hpp"

namespace persona {

struct ServiceConfig {
  ToyModelConfig model;
  std::uint64_t analytics_seed = 0;  // k-means behind the trait cluster ids
  std::filesystem::path workdir = ".";
  std::size_t default_max_new_tokens = 24;
  std::size_t worker_threads = 32;
};

ServiceConfig service_config_from_json(const nlohmann::json& j);

// Desk-scale synthetic setup over the bundled lexicon: d_model 64, 20
// clusters, 16 prompts per trait, sigma 0.05, seed 7.
SyntheticSpec demo_synthetic_spec();
DirectionLibrary synthetic_library(const SyntheticSpec& spec, DirectionMethod method);

// Transport-independent service state. Every method is thread-safe; the
// library is an immutable snapshot swapped on reload.
class SteeringService {
 public:
  SteeringService(DirectionLibrary lib, ToyModel model, ServiceConfig config);
  ~SteeringService();
  SteeringService(const SteeringService&) = delete;
  SteeringService& operator=(const SteeringService&) = delete;

  const ServiceConfig& config() const noexcept;
  nlohmann::json health() const;
  nlohmann::json traits() const;
  nlohmann::json direction(std::string_view trait) const;
  // Analysis kinds plus "heatmap" (dump paths relative to the workdir).
  // A missing seed defaults to the configured analytics seed. Results are
  // cached by library hash, kind and canonical parameters.
  nlohmann::json analytics(std::string_view kind, const nlohmann::json& params);
  nlohmann::json custom_persona(const nlohmann::json& body);
  nlohmann::json composite_persona(const nlohmann::json& body);

  nlohmann::json create_session(const nlohmann::json& body);
  nlohmann::json session(std::string_view id) const;
  // Throws before any output for unknown sessions or malformed bodies.
  void check_message(std::string_view id, const nlohmann::json& body) const;
  // One chat turn. `on_chunk` receives decoded text as tokens are chosen; the
  // exchange is appended to the history once the turn completes.
  nlohmann::json post_message(std::string_view id, const nlohmann::json& body,
                              const std::function<void(std::string_view)>& on_chunk = {});
  nlohmann::json debug_captures(std::string_view id) const;
  bool session_alpha_warning(std::string_view id) const;

  nlohmann::json reload(const nlohmann::json& body);
  void reload(DirectionLibrary lib);

  std::size_t analytics_cache_size() const;
  std::size_t analytics_computations() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// HTTP status and {code, message} body for an exception.
std::pair<int, nlohmann::json> error_response(const std::exception& e);

class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<SteeringService> service);
  ~HttpServer();

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace persona
