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

#include "persona/service.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <thread>

#include "persona/designer.hpp"
#include "persona/errors.hpp"
#include "persona/pipeline.hpp"
#include "persona/reports.hpp"

namespace persona {

namespace fs = std::filesystem;
using nlohmann::json;

ServiceConfig service_config_from_json(const json& j) {
  ServiceConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("service config must be a JSON object");
  try {
    if (j.contains("model")) c.model = config_from_json(j.at("model"));
    c.analytics_seed = j.value("analytics_seed", c.analytics_seed);
    if (j.contains("workdir")) c.workdir = j.at("workdir").get<std::string>();
    c.default_max_new_tokens = j.value("default_max_new_tokens", c.default_max_new_tokens);
    c.worker_threads = j.value("worker_threads", c.worker_threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("service config: ") + e.what());
  }
  if (c.worker_threads == 0) throw ConfigError("worker_threads must be positive");
  return c;
}

SyntheticSpec demo_synthetic_spec() {
  SyntheticSpec s;
  s.d_model = 64;
  s.n_traits = bundled_lexicon().size();
  s.n_prompts_per_trait = 16;
  s.n_clusters = 20;
  s.noise_sigma = 0.05;
  s.seed = 7;
  s.layer_index = 4;
  s.trait_names = bundled_lexicon().names();
  return s;
}

DirectionLibrary synthetic_library(const SyntheticSpec& spec, DirectionMethod method) {
  const SyntheticData data = generate_synthetic(spec);
  return extract_all(synthetic_lexicon(data.ground_truth), data.trait_sets, data.neutral_set,
                     method);
}

namespace {

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Snapshot {
  DirectionLibrary lib;
  std::optional<PersonaSpace> space;  // absent below two traits
  std::vector<int> clusters;

  const PersonaSpace& fitted() const {
    if (!space) throw StateError("no PCA fitted: the library needs at least two traits");
    return *space;
  }
  std::string hash;
};

std::shared_ptr<const Snapshot> make_snapshot(DirectionLibrary lib, std::uint64_t seed) {
  auto s = std::make_shared<Snapshot>();
  if (lib.size() >= 2) {
    s->space = fit_persona_space(lib);
    const std::size_t k = std::min<std::size_t>(20, lib.size());
    s->clusters = kmeans(s->space->standardization.z, k, seed, 16).assignments;
  } else {
    s->clusters.assign(lib.size(), 0);
  }
  s->hash = hex16(lib.content_hash());
  s->lib = std::move(lib);
  return s;
}

struct Message {
  std::string role;
  std::string text;
};

struct Session {
  std::string id;
  std::optional<SteeringConfig> steering;
  std::optional<ToyModel> edited;  // orthogonalised copy
  double target = 0.0;
  mutable std::mutex mu;
  std::vector<Message> history;
  ProjectionLog last_trace;
  double last_max_deviation = 0.0;
};

template <typename T>
T field(const json& body, const char* key, T fallback) {
  try {
    return body.value(key, fallback);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void require_object(const json& body) {
  if (!body.is_object()) throw ConfigError("request body must be a JSON object");
}

// Dump paths for heatmaps must stay inside the workdir.
fs::path resolve_in(const fs::path& root, const std::string& rel) {
  const fs::path p = fs::path(rel).lexically_normal();
  if (rel.empty() || p.is_absolute() || (!p.empty() && *p.begin() == "..")) {
    throw ConfigError("path '" + rel + "' must be relative to the service workdir");
  }
  return root / p;
}

}  // namespace

struct SteeringService::Impl {
  ToyModel model;
  ServiceConfig config;

  mutable std::mutex snapshot_mu;
  std::shared_ptr<const Snapshot> snapshot;

  mutable std::mutex cache_mu;
  std::map<std::string, json> cache;
  std::atomic<std::size_t> computations{0};

  mutable std::shared_mutex personas_mu;
  std::map<std::string, DesignedPersona> personas;
  std::atomic<std::uint64_t> next_persona{1};

  mutable std::shared_mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>, std::less<>> sessions;
  std::atomic<std::uint64_t> next_session{1};

  std::shared_ptr<const Snapshot> current() const {
    std::lock_guard lock(snapshot_mu);
    return snapshot;
  }

  std::shared_ptr<Session> find_session(std::string_view id) const {
    std::shared_lock lock(sessions_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw NotFoundError("session", std::string(id));
    return it->second;
  }

  json store_persona(DesignedPersona p) {
    p.id = "persona-" + std::to_string(next_persona++);
    json out = designed_persona_json(p);
    std::unique_lock lock(personas_mu);
    personas.emplace(p.id, std::move(p));
    return out;
  }
};

SteeringService::SteeringService(DirectionLibrary lib, ToyModel model, ServiceConfig config)
    : impl_(std::make_unique<Impl>()) {
  if (lib.d_model() != model.config().d_model) {
    throw DimensionError("library d_model " + std::to_string(lib.d_model()) +
                         " does not match model d_model " +
                         std::to_string(model.config().d_model));
  }
  impl_->model = std::move(model);
  impl_->config = std::move(config);
  impl_->snapshot = make_snapshot(std::move(lib), impl_->config.analytics_seed);
}

SteeringService::~SteeringService() = default;

const ServiceConfig& SteeringService::config() const noexcept { return impl_->config; }

json SteeringService::health() const {
  const auto snap = impl_->current();
  std::shared_lock lock(impl_->sessions_mu);
  return {{"status", "ok"},
          {"library_hash", snap->hash},
          {"n_traits", snap->lib.size()},
          {"d_model", snap->lib.d_model()},
          {"sessions", impl_->sessions.size()}};
}

json SteeringService::traits() const {
  const auto snap = impl_->current();
  const auto& bundled = bundled_lexicon();
  json list = json::array();
  for (std::size_t i = 0; i < snap->lib.size(); ++i) {
    const auto& name = snap->lib.at(i).trait_name;
    json t = {{"name", name}, {"cluster", snap->clusters[i]}};
    if (auto idx = bundled.index_of(name)) {
      t["trait_system_prompt"] = bundled.traits[*idx].trait_system_prompt;
    }
    list.push_back(std::move(t));
  }
  return {{"count", snap->lib.size()}, {"library_hash", snap->hash}, {"traits", list}};
}

json SteeringService::direction(std::string_view trait) const {
  const auto snap = impl_->current();
  const PersonaDirection& d = snap->lib.at(trait);
  return {{"trait", d.trait_name}, {"layer", d.layer_index}, {"d_model", d.d_model()},
          {"n_t", d.n_t},          {"n_n", d.n_n},           {"mu_t", d.mu_t},
          {"method", to_string(d.method)}, {"raw_norm", norm(d.r_raw)}, {"r_hat", d.r_hat}};
}

json SteeringService::analytics(std::string_view kind, const json& params_in) {
  json params = params_in.is_null() ? json::object() : params_in;
  require_object(params);
  if (kind != "heatmap" && !params.contains("seed")) params["seed"] = impl_->config.analytics_seed;
  if (kind != "heatmap" && !is_analysis_kind(kind)) {
    throw NotFoundError("analysis", std::string(kind));
  }
  const auto snap = impl_->current();
  const std::string key = snap->hash + "/" + std::string(kind) + "/" + params.dump();
  {
    std::lock_guard lock(impl_->cache_mu);
    if (auto it = impl_->cache.find(key); it != impl_->cache.end()) return it->second;
  }
  json report;
  if (kind == "heatmap") {
    const fs::path& root = impl_->config.workdir;
    const auto persona = read_dump(resolve_in(root, field(params, "persona", std::string{})));
    const auto baseline = read_dump(resolve_in(root, field(params, "baseline", std::string{})));
    const Heatmap h = delta_heatmap(persona, baseline, field(params, "height", std::size_t{8}),
                                    field(params, "width", std::size_t{8}));
    report = heatmap_report(h);
  } else {
    report = run_analysis(kind, snap->lib, params);
  }
  ++impl_->computations;
  std::lock_guard lock(impl_->cache_mu);
  return impl_->cache.try_emplace(key, std::move(report)).first->second;
}

json SteeringService::custom_persona(const json& body) {
  require_object(body);
  if (!body.contains("weights") || !body["weights"].is_object()) {
    throw ConfigError("'weights' must map component indices to numbers");
  }
  std::map<std::size_t, double> weights;
  for (const auto& [k, v] : body["weights"].items()) {
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(k, &used);
      if (used != k.size()) throw std::invalid_argument(k);
    } catch (const std::exception&) {
      throw ConfigError("component key '" + k + "' is not an index");
    }
    if (!v.is_number()) throw ConfigError("weight for component " + k + " is not a number");
    weights[idx] = v.get<double>();
  }
  std::optional<double> target;
  if (body.contains("target_projection")) target = field(body, "target_projection", 0.0);
  const auto snap = impl_->current();
  return impl_->store_persona(design_persona(snap->fitted(), snap->lib, weights, target,
                                             field(body, "top_n", std::size_t{5})));
}

json SteeringService::composite_persona(const json& body) {
  require_object(body);
  const auto traits = field(body, "traits", std::vector<std::string>{});
  std::optional<double> target;
  if (body.contains("target_projection")) target = field(body, "target_projection", 0.0);
  const auto snap = impl_->current();
  return impl_->store_persona(persona::composite_persona(snap->fitted(), snap->lib, traits, target,
                                                         field(body, "top_n", std::size_t{5})));
}

json SteeringService::create_session(const json& body_in) {
  const json body = body_in.is_null() ? json::object() : body_in;
  require_object(body);
  auto s = std::make_shared<Session>();
  const std::string mode_name = field(body, "mode", std::string("induce"));
  const double alpha = field(body, "alpha", 1.35);
  std::optional<std::size_t> layer;
  if (body.contains("layer") && !body["layer"].is_null()) layer = field(body, "layer", std::size_t{0});

  std::optional<PersonaDirection> dir;
  if (body.contains("trait")) {
    const auto snap = impl_->current();
    dir = snap->lib.at(field(body, "trait", std::string{}));
  } else if (body.contains("persona")) {
    const std::string pid = field(body, "persona", std::string{});
    std::shared_lock lock(impl_->personas_mu);
    auto it = impl_->personas.find(pid);
    if (it == impl_->personas.end()) throw NotFoundError("persona", pid);
    dir = it->second.direction;
  }
  if (!dir && mode_name != "none") throw ConfigError("session needs 'trait' or 'persona' unless mode is 'none'");
  json steering = nullptr;
  if (dir && mode_name != "none") {
    const SteeringMode mode = steering_mode_from_string(mode_name);
    s->steering = make_steering_config(impl_->model, *dir, mode, alpha, layer);
    if (mode == SteeringMode::kOrthogonalizeWeights) {
      s->edited = impl_->model;
      orthogonalize_all(*s->edited, dir->r_hat);
    }
    s->target = mode == SteeringMode::kInduce ? alpha * dir->mu_t : 0.0;
    json layers = json::array();
    for (auto l : s->steering->layers) layers.push_back(l);
    steering = {{"source", dir->trait_name}, {"mode", to_string(mode)}, {"alpha", alpha},
                {"layers", layers},           {"target_projection", s->target}};
  }
  s->id = "s-" + hex16(impl_->next_session++ * 0x9e3779b97f4a7c15ULL);
  const bool warn = s->steering && s->steering->alpha_warning();
  json out = {{"session_id", s->id}, {"steering", steering}, {"alpha_warning", warn}};
  if (warn) {
    out["warning"] = "alpha outside the coherent band [" + std::to_string(kAlphaBandLow).substr(0, 3) +
                     ", " + std::to_string(kAlphaBandHigh).substr(0, 3) + "]";
  }
  std::unique_lock lock(impl_->sessions_mu);
  impl_->sessions.emplace(s->id, std::move(s));
  return out;
}

json SteeringService::session(std::string_view id) const {
  const auto s = impl_->find_session(id);
  std::lock_guard lock(s->mu);
  json history = json::array();
  for (const auto& m : s->history) history.push_back({{"role", m.role}, {"text", m.text}});
  return {{"session_id", s->id}, {"history", history}};
}

bool SteeringService::session_alpha_warning(std::string_view id) const {
  const auto s = impl_->find_session(id);
  return s->steering && s->steering->alpha_warning();
}

void SteeringService::check_message(std::string_view id, const json& body) const {
  impl_->find_session(id);
  require_object(body);
  if (!body.contains("text") || !body["text"].is_string()) throw ConfigError("'text' is required");
  const auto max_new = field(body, "max_new_tokens", impl_->config.default_max_new_tokens);
  if (max_new == 0 || max_new >= impl_->model.config().max_seq) {
    throw ConfigError("max_new_tokens must be in [1, max_seq)");
  }
}

json SteeringService::post_message(std::string_view id, const json& body,
                                   const std::function<void(std::string_view)>& on_chunk) {
  check_message(id, body);
  const auto s = impl_->find_session(id);
  const std::string text = body["text"].get<std::string>();
  const std::size_t max_new = field(body, "max_new_tokens", impl_->config.default_max_new_tokens);
  const auto& cfg = impl_->model.config();

  std::lock_guard lock(s->mu);
  std::string transcript;
  for (const auto& m : s->history) transcript += (m.role == "user" ? "User: " : "Model: ") + m.text + "\n";
  transcript += "User: " + text + "\nModel:";
  std::vector<int> prompt = encode_bytes(transcript, cfg.vocab_size);
  const std::size_t room = cfg.max_seq - max_new;
  if (prompt.size() > room) prompt.erase(prompt.begin(), prompt.end() - static_cast<std::ptrdiff_t>(room));

  auto log = std::make_shared<ProjectionLog>();
  auto emit = [&](int token) {
    if (on_chunk) on_chunk(decode_tokens(std::span<const int>(&token, 1)));
  };
  Generation gen;
  if (!s->steering) {
    gen = impl_->model.generate(prompt, max_new, {}, {}, emit);
  } else {
    const auto& r_hat = s->steering->direction.r_hat;
    if (s->edited) {
      std::set<std::size_t> all;
      for (std::size_t l = 0; l <= cfg.n_layers; ++l) all.insert(l);
      gen = s->edited->generate(prompt, max_new, tracing_hook({}, r_hat, all, log), {}, emit);
    } else {
      gen = impl_->model.generate(
          prompt, max_new, tracing_hook(make_hook(*s->steering), r_hat, s->steering->layers, log),
          {}, emit);
    }
  }
  double dev = 0.0;
  for (const auto& p : *log) dev = std::max(dev, std::abs(p.after - s->target));
  const std::string reply = decode_tokens(gen.tokens);
  s->history.push_back({"user", text});
  s->history.push_back({"model", reply});
  s->last_trace = last_position_samples(*log);
  s->last_max_deviation = dev;
  return {{"session_id", s->id},
          {"reply", reply},
          {"tokens", gen.tokens},
          {"alpha_warning", s->steering && s->steering->alpha_warning()}};
}

json SteeringService::debug_captures(std::string_view id) const {
  const auto s = impl_->find_session(id);
  std::lock_guard lock(s->mu);
  json samples = json::array();
  for (const auto& p : s->last_trace) {
    samples.push_back({{"step", p.forward}, {"layer", p.layer}, {"position", p.position},
                       {"before", p.before}, {"after", p.after}});
  }
  json out = {{"session_id", s->id}, {"samples", samples}, {"max_abs_deviation", s->last_max_deviation}};
  if (s->steering) {
    out["mode"] = to_string(s->steering->mode);
    out["target_projection"] = s->target;
  } else {
    out["mode"] = "none";
  }
  return out;
}

void SteeringService::reload(DirectionLibrary lib) {
  if (lib.d_model() != impl_->model.config().d_model) {
    throw DimensionError("library d_model " + std::to_string(lib.d_model()) +
                         " does not match the model");
  }
  auto snap = make_snapshot(std::move(lib), impl_->config.analytics_seed);
  std::lock_guard lock(impl_->snapshot_mu);
  impl_->snapshot = std::move(snap);
}

json SteeringService::reload(const json& body) {
  require_object(body);
  reload(load_library(resolve_in(impl_->config.workdir, field(body, "path", std::string{}))));
  const auto snap = impl_->current();
  return {{"library_hash", snap->hash}, {"n_traits", snap->lib.size()}};
}

std::size_t SteeringService::analytics_cache_size() const {
  std::lock_guard lock(impl_->cache_mu);
  return impl_->cache.size();
}

std::size_t SteeringService::analytics_computations() const { return impl_->computations; }

std::pair<int, json> error_response(const std::exception& e) {
  auto body = [&](const char* code) { return json{{"code", code}, {"message", e.what()}}; };
  if (const auto* nf = dynamic_cast<const NotFoundError*>(&e)) {
    return {404, json{{"code", nf->resource() + "_not_found"}, {"message", e.what()}}};
  }
  if (dynamic_cast<const json::exception*>(&e)) return {400, body("invalid_json")};
  const auto* err = dynamic_cast<const Error*>(&e);
  if (!err) return {500, body("internal")};
  switch (err->code()) {
    case ErrorCode::kMissingData:
      return {404, body("trait_not_found")};
    case ErrorCode::kConfig:
    case ErrorCode::kInput:
      return {400, body("invalid_request")};
    case ErrorCode::kMode:
      return {400, body("invalid_mode")};
    case ErrorCode::kFormat:
      return {422, body("format_error")};
    case ErrorCode::kPairing:
      return {422, body("pairing_error")};
    case ErrorCode::kState:
      return {409, body("invalid_state")};
    case ErrorCode::kDimension:
      return {422, body("dimension_mismatch")};
    case ErrorCode::kDegenerateDirection:
      return {422, body("degenerate_direction")};
    case ErrorCode::kNotUnit:
      return {422, body("not_unit")};
    case ErrorCode::kIo:
      return {500, body("io_error")};
    case ErrorCode::kNotFound:
      return {404, body("not_found")};
  }
  return {500, body("internal")};
}

// ---- HTTP ------------------------------------------------------------------

struct HttpServer::Impl {
  std::shared_ptr<SteeringService> service;
  httplib::Server server;
  std::thread thread;
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("request body is not JSON: ") + e.what());
  }
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const std::exception& e) {
      auto [status, body] = error_response(e);
      send_json(res, status, body);
    }
  };
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<SteeringService> service)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  auto svc = impl_->service;
  auto& s = impl_->server;
  using Req = httplib::Request;
  using Res = httplib::Response;

  s.Get("/v1/health", guarded([svc](const Req&, Res& res) { send_json(res, 200, svc->health()); }));
  s.Get("/v1/traits", guarded([svc](const Req&, Res& res) { send_json(res, 200, svc->traits()); }));
  s.Get(R"(/v1/directions/([^/]+))", guarded([svc](const Req& req, Res& res) {
          send_json(res, 200, svc->direction(req.matches[1].str()));
        }));
  // Same bytes as the CLI's report files.
  s.Post(R"(/v1/analytics/([a-z]+))", guarded([svc](const Req& req, Res& res) {
           res.set_content(report_text(svc->analytics(req.matches[1].str(), parse_body(req))),
                           "application/json");
         }));
  s.Post("/v1/personas/custom", guarded([svc](const Req& req, Res& res) {
           send_json(res, 201, svc->custom_persona(parse_body(req)));
         }));
  s.Post("/v1/personas/composite", guarded([svc](const Req& req, Res& res) {
           send_json(res, 201, svc->composite_persona(parse_body(req)));
         }));
  s.Post("/v1/sessions", guarded([svc](const Req& req, Res& res) {
           send_json(res, 201, svc->create_session(parse_body(req)));
         }));
  s.Get(R"(/v1/sessions/([^/]+))", guarded([svc](const Req& req, Res& res) {
          send_json(res, 200, svc->session(req.matches[1].str()));
        }));
  s.Get(R"(/v1/sessions/([^/]+)/debug/captures)", guarded([svc](const Req& req, Res& res) {
          send_json(res, 200, svc->debug_captures(req.matches[1].str()));
        }));
  s.Post(R"(/v1/sessions/([^/]+)/messages)", guarded([svc](const Req& req, Res& res) {
           const std::string id = req.matches[1].str();
           const json body = parse_body(req);
           svc->check_message(id, body);
           if (svc->session_alpha_warning(id)) res.set_header("X-Persona-Warning", "alpha-out-of-band");
           res.set_chunked_content_provider(
               "text/plain; charset=utf-8", [svc, id, body](std::size_t, httplib::DataSink& sink) {
                 try {
                   svc->post_message(id, body, [&](std::string_view chunk) {
                     sink.write(chunk.data(), chunk.size());
                   });
                 } catch (const std::exception&) {
                   return false;
                 }
                 sink.done();
                 return true;
               });
         }));
  s.Post("/v1/library/reload", guarded([svc](const Req& req, Res& res) {
           send_json(res, 200, svc->reload(parse_body(req)));
         }));

  const std::size_t threads = svc->config().worker_threads;
  s.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  s.set_error_handler([](const Req&, Res& res) {
    if (res.body.empty()) {
      send_json(res, res.status, {{"code", res.status == 404 ? "route_not_found" : "http_error"},
                                  {"message", "HTTP " + std::to_string(res.status)}});
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::stop() {
  impl_->server.stop();
  wait();
}

}  // namespace persona
