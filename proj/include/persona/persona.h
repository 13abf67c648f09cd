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

#ifndef PERSONA_PERSONA_H_
#define PERSONA_PERSONA_H_

#include <stddef.h>

#if defined(PERSONA_BUILDING_LIBRARY)
#define PERSONA_API __attribute__((visibility("default")))
#else
#define PERSONA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum persona_status {
  PERSONA_OK = 0,
  PERSONA_ERR_DIMENSION = 1,
  PERSONA_ERR_DEGENERATE_DIRECTION = 2,
  PERSONA_ERR_NOT_UNIT = 3,
  PERSONA_ERR_FORMAT = 4,
  PERSONA_ERR_IO = 5,
  PERSONA_ERR_PAIRING = 6,
  PERSONA_ERR_MISSING_DATA = 7,
  PERSONA_ERR_CONFIG = 8,
  PERSONA_ERR_INPUT = 9,
  PERSONA_ERR_STATE = 10,
  PERSONA_ERR_NOT_FOUND = 11,
  PERSONA_ERR_MODE = 12,
  PERSONA_ERR_INTERNAL = 99
} persona_status;

typedef struct persona_library persona_library;
typedef struct persona_model persona_model;
typedef struct persona_server persona_server;

/* Message of the last failure on the calling thread; empty after success. */
PERSONA_API const char* persona_last_error(void);
PERSONA_API const char* persona_status_name(persona_status status);
/* 0 ok, 2 usage or configuration, 3 data, 4 numeric. */
PERSONA_API int persona_exit_code(persona_status status);
/* Frees strings returned through char** out-parameters. */
PERSONA_API void persona_string_free(char* s);

/* spec_json: synthetic spec; "seed" is required. */
PERSONA_API persona_status persona_generate_synthetic(const char* spec_json, const char* out_dir);

/* lexicon_path may be NULL to use <dumps_dir>/lexicon.json, or "bundled".
   method: "diff_of_means" or "paired_mean_diff". */
PERSONA_API persona_status persona_library_extract(const char* dumps_dir, const char* lexicon_path,
                                                   const char* method, persona_library** out);
PERSONA_API persona_status persona_library_load(const char* dir, persona_library** out);
PERSONA_API persona_status persona_library_save(const persona_library* lib, const char* dir);
PERSONA_API void persona_library_free(persona_library* lib);
PERSONA_API size_t persona_library_size(const persona_library* lib);
PERSONA_API size_t persona_library_d_model(const persona_library* lib);
/* The returned name lives as long as the library. */
PERSONA_API persona_status persona_library_trait_name(const persona_library* lib, size_t index,
                                                      const char** out);
/* Copies r_hat into r_hat_out (length must equal d_model). */
PERSONA_API persona_status persona_library_direction(const persona_library* lib, const char* trait,
                                                     double* r_hat_out, size_t length,
                                                     double* mu_t_out);

/* Runs an analysis; writes <kind>.json/.csv/.svg into out_dir when it is
   not NULL. report_json may be NULL. */
PERSONA_API persona_status persona_analyze(const persona_library* lib, const char* kind,
                                           const char* params_json, const char* out_dir,
                                           char** report_json);

/* Writes a binary PGM to out_image when it is not NULL. */
PERSONA_API persona_status persona_heatmap(const char* persona_dump, const char* baseline_dump,
                                           size_t height, size_t width, const char* out_image,
                                           char** report_json);

PERSONA_API persona_status persona_model_create(const char* config_json, persona_model** out);
PERSONA_API persona_status persona_model_load(const char* path, persona_model** out);
PERSONA_API persona_status persona_model_save(const persona_model* model, const char* path);
PERSONA_API void persona_model_free(persona_model* model);

/* request_json: {trait, mode, alpha, layer, prompt, max_new_tokens}. */
PERSONA_API persona_status persona_steer(const persona_model* model, const persona_library* lib,
                                         const char* request_json, char** transcript_json);

/* lib may be NULL for the built-in synthetic library; model may be NULL for
   a model built from config_json's "model" entry. Both are copied. */
PERSONA_API persona_status persona_server_create(const persona_library* lib,
                                                 const persona_model* model,
                                                 const char* config_json, persona_server** out);
/* Serves on a background thread; port 0 picks a free port. */
PERSONA_API persona_status persona_server_start(persona_server* server, const char* host, int port,
                                                int* bound_port);
PERSONA_API persona_status persona_server_wait(persona_server* server);
PERSONA_API void persona_server_stop(persona_server* server);
PERSONA_API void persona_server_free(persona_server* server);

#ifdef __cplusplus
}
#endif

#endif /* PERSONA_PERSONA_H_ */
