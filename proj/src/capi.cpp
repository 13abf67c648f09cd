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

#include "persona/persona.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "persona/direction.hpp"
#include "persona/errors.hpp"
#include "persona/pipeline.hpp"
#include "persona/reports.hpp"
#include "persona/service.hpp"
#include "persona/toy_model.hpp"

struct persona_library {
  persona::DirectionLibrary lib;
};

struct persona_model {
  persona::ToyModel model;
};

struct persona_server {
  std::shared_ptr<persona::SteeringService> service;
  std::unique_ptr<persona::HttpServer> http;
};

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

template <typename F>
persona_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PERSONA_OK;
  } catch (const persona::Error& e) {
    g_last_error = e.what();
    return static_cast<persona_status>(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return PERSONA_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PERSONA_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw persona::InputError(std::string(what) + " is NULL");
}

json parse_json(const char* text) {
  if (!text || !*text) return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw persona::ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* persona_last_error(void) { return g_last_error.c_str(); }

const char* persona_status_name(persona_status status) {
  switch (status) {
    case PERSONA_OK: return "ok";
    case PERSONA_ERR_DIMENSION: return "dimension_mismatch";
    case PERSONA_ERR_DEGENERATE_DIRECTION: return "degenerate_direction";
    case PERSONA_ERR_NOT_UNIT: return "not_unit";
    case PERSONA_ERR_FORMAT: return "format_error";
    case PERSONA_ERR_IO: return "io_error";
    case PERSONA_ERR_PAIRING: return "pairing_error";
    case PERSONA_ERR_MISSING_DATA: return "missing_data";
    case PERSONA_ERR_CONFIG: return "config_error";
    case PERSONA_ERR_INPUT: return "input_error";
    case PERSONA_ERR_STATE: return "state_error";
    case PERSONA_ERR_NOT_FOUND: return "not_found";
    case PERSONA_ERR_MODE: return "mode_error";
    case PERSONA_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

int persona_exit_code(persona_status status) {
  switch (status) {
    case PERSONA_OK:
      return 0;
    case PERSONA_ERR_CONFIG:
    case PERSONA_ERR_INPUT:
    case PERSONA_ERR_MODE:
    case PERSONA_ERR_STATE:
      return 2;
    case PERSONA_ERR_FORMAT:
    case PERSONA_ERR_IO:
    case PERSONA_ERR_PAIRING:
    case PERSONA_ERR_MISSING_DATA:
    case PERSONA_ERR_NOT_FOUND:
      return 3;
    case PERSONA_ERR_DIMENSION:
    case PERSONA_ERR_DEGENERATE_DIRECTION:
    case PERSONA_ERR_NOT_UNIT:
      return 4;
    case PERSONA_ERR_INTERNAL:
      return 1;
  }
  return 1;
}

void persona_string_free(char* s) { std::free(s); }

persona_status persona_generate_synthetic(const char* spec_json, const char* out_dir) {
  return guard([&] {
    require(out_dir, "out_dir");
    const auto spec = persona::synthetic_spec_from_json(parse_json(spec_json));
    persona::write_synthetic(persona::generate_synthetic(spec), out_dir);
  });
}

persona_status persona_library_extract(const char* dumps_dir, const char* lexicon_path,
                                       const char* method, persona_library** out) {
  return guard([&] {
    require(dumps_dir, "dumps_dir");
    require(out, "out");
    const fs::path dir = dumps_dir;
    persona::PersonaLexicon lex;
    if (lexicon_path && std::string_view(lexicon_path) == "bundled") {
      lex = persona::bundled_lexicon();
    } else {
      lex = persona::load_lexicon(lexicon_path ? fs::path(lexicon_path) : dir / "lexicon.json");
    }
    const auto m = persona::direction_method_from_string(method ? method : "diff_of_means");
    *out = new persona_library{persona::extract_all(lex, dir, m)};
  });
}

persona_status persona_library_load(const char* dir, persona_library** out) {
  return guard([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new persona_library{persona::load_library(dir)};
  });
}

persona_status persona_library_save(const persona_library* lib, const char* dir) {
  return guard([&] {
    require(lib, "library");
    require(dir, "dir");
    persona::save_library(lib->lib, dir);
  });
}

void persona_library_free(persona_library* lib) { delete lib; }

size_t persona_library_size(const persona_library* lib) { return lib ? lib->lib.size() : 0; }

size_t persona_library_d_model(const persona_library* lib) { return lib ? lib->lib.d_model() : 0; }

persona_status persona_library_trait_name(const persona_library* lib, size_t index,
                                          const char** out) {
  return guard([&] {
    require(lib, "library");
    require(out, "out");
    if (index >= lib->lib.size()) throw persona::InputError("trait index out of range");
    *out = lib->lib.at(index).trait_name.c_str();
  });
}

persona_status persona_library_direction(const persona_library* lib, const char* trait,
                                         double* r_hat_out, size_t length, double* mu_t_out) {
  return guard([&] {
    require(lib, "library");
    require(trait, "trait");
    const auto& d = lib->lib.at(std::string_view(trait));
    if (r_hat_out) {
      if (length != d.d_model()) throw persona::DimensionError("output buffer length mismatch");
      std::copy(d.r_hat.begin(), d.r_hat.end(), r_hat_out);
    }
    if (mu_t_out) *mu_t_out = d.mu_t;
  });
}

persona_status persona_analyze(const persona_library* lib, const char* kind,
                               const char* params_json, const char* out_dir, char** report_json) {
  return guard([&] {
    require(lib, "library");
    require(kind, "kind");
    const json report = persona::run_analysis(kind, lib->lib, parse_json(params_json));
    if (out_dir) persona::write_report_files(kind, report, out_dir);
    if (report_json) *report_json = dup_string(persona::report_text(report));
  });
}

persona_status persona_heatmap(const char* persona_dump, const char* baseline_dump, size_t height,
                               size_t width, const char* out_image, char** report_json) {
  return guard([&] {
    require(persona_dump, "persona_dump");
    require(baseline_dump, "baseline_dump");
    const auto h = persona::delta_heatmap(persona::read_dump(persona_dump),
                                          persona::read_dump(baseline_dump), height, width);
    if (out_image) persona::write_text_file(out_image, persona::heatmap_pgm(h));
    if (report_json) *report_json = dup_string(persona::report_text(persona::heatmap_report(h)));
  });
}

persona_status persona_model_create(const char* config_json, persona_model** out) {
  return guard([&] {
    require(out, "out");
    *out = new persona_model{persona::ToyModel::init(persona::config_from_json(parse_json(config_json)))};
  });
}

persona_status persona_model_load(const char* path, persona_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new persona_model{persona::ToyModel::load(path)};
  });
}

persona_status persona_model_save(const persona_model* model, const char* path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    model->model.save(path);
  });
}

void persona_model_free(persona_model* model) { delete model; }

persona_status persona_steer(const persona_model* model, const persona_library* lib,
                             const char* request_json, char** transcript_json) {
  return guard([&] {
    require(model, "model");
    require(lib, "library");
    require(transcript_json, "transcript_json");
    const auto req = persona::steer_request_from_json(parse_json(request_json));
    const auto outcome = persona::run_steer(model->model, lib->lib.at(req.trait), req);
    *transcript_json = dup_string(persona::steer_outcome_json(outcome).dump(2) + "\n");
  });
}

persona_status persona_server_create(const persona_library* lib, const persona_model* model,
                                     const char* config_json, persona_server** out) {
  return guard([&] {
    require(out, "out");
    const auto config = persona::service_config_from_json(parse_json(config_json));
    persona::DirectionLibrary library =
        lib ? lib->lib
            : persona::synthetic_library(persona::demo_synthetic_spec(),
                                         persona::DirectionMethod::kDiffOfMeans);
    persona::ToyModel m = model ? model->model : persona::ToyModel::init(config.model);
    auto server = std::make_unique<persona_server>();
    server->service =
        std::make_shared<persona::SteeringService>(std::move(library), std::move(m), config);
    server->http = std::make_unique<persona::HttpServer>(server->service);
    *out = server.release();
  });
}

persona_status persona_server_start(persona_server* server, const char* host, int port,
                                    int* bound_port) {
  return guard([&] {
    require(server, "server");
    const int bound = server->http->start(host ? host : "127.0.0.1", port);
    if (bound_port) *bound_port = bound;
  });
}

persona_status persona_server_wait(persona_server* server) {
  return guard([&] {
    require(server, "server");
    server->http->wait();
  });
}

void persona_server_stop(persona_server* server) {
  if (server) server->http->stop();
}

void persona_server_free(persona_server* server) { delete server; }

}  // extern "C"
