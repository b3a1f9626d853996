/*
 * Copyright 2026 gaitmix contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the gaitmix library.
 *
 * All objects are opaque handles released with their *_free function.
 * Every fallible call returns a gm_status; on failure the calling thread's
 * last error message is available through gm_last_error().
 */
#ifndef GAITMIX_GAITMIX_H_
#define GAITMIX_GAITMIX_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(GAITMIX_BUILDING_LIBRARY)
#    define GM_API __declspec(dllexport)
#  else
#    define GM_API __declspec(dllimport)
#  endif
#else
#  define GM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gm_status {
  GM_OK = 0,
  GM_ERR_INVALID_ARGUMENT = 1,
  GM_ERR_NOT_FOUND = 2,
  GM_ERR_NO_NEGATIVES = 3,
  GM_ERR_DEGENERATE_BATCH = 4,
  GM_ERR_INVALID_STATE = 5,
  GM_ERR_INSUFFICIENT_DATA = 6,
  GM_ERR_UNDEFINED_SIMILARITY = 7,
  GM_ERR_DIVERGENCE = 8,
  GM_ERR_IO = 9,
  GM_ERR_FORMAT = 10,
  GM_ERR_INTERNAL = 99
} gm_status;

typedef struct gm_config gm_config;
typedef struct gm_store gm_store;
typedef struct gm_model gm_model;

/* Message of the last failure on this thread; empty string if none. */
GM_API const char* gm_last_error(void);
GM_API const char* gm_status_name(gm_status status);
/* Nonzero when the status stems from bad input rather than a library fault. */
GM_API int gm_status_is_user_error(gm_status status);
GM_API const char* gm_version(void);

/* Configuration. A new config holds only defaults. */
GM_API gm_status gm_config_new(gm_config** out);
GM_API gm_status gm_config_load(const char* path, gm_config** out);
GM_API gm_status gm_config_set(gm_config* cfg, const char* key, const char* value);
/* Documentation of every key and its default; static storage. */
GM_API const char* gm_config_documentation(void);
GM_API void gm_config_free(gm_config* cfg);

/* Feature stores. */
GM_API gm_status gm_generate(const gm_config* cfg, uint64_t seed, gm_store** out);
GM_API gm_status gm_store_load(const char* path, gm_store** out);
GM_API gm_status gm_store_save(const gm_store* store, const char* path);
GM_API gm_status gm_store_merge(const gm_store* a, const gm_store* b, gm_store** out);
GM_API size_t gm_store_size(const gm_store* store);
GM_API size_t gm_store_dim(const gm_store* store);
GM_API size_t gm_store_domain_count(const gm_store* store);
GM_API void gm_store_free(gm_store* store);

/* Training. `init` may be NULL; `report_path` may be NULL. */
GM_API gm_status gm_train(const gm_store* store, const gm_config* cfg, uint64_t seed,
                          const gm_model* init, const char* report_path, gm_model** out);
GM_API gm_status gm_model_load(const char* path, gm_model** out);
GM_API gm_status gm_model_save(const gm_model* model, const char* path);
GM_API void gm_model_free(gm_model* model);

/*
 * Distillation. With a model, every domain is scored by it; with NULL, one
 * model per domain is pretrained from cfg first. `mode` may be NULL and
 * `fraction` negative to take the config values. `retained` may be NULL.
 */
GM_API gm_status gm_distill(const gm_store* store, const gm_model* model, const gm_config* cfg,
                            const char* mode, double fraction, uint64_t seed,
                            const char* report_path, gm_store** retained);

/* Rank-1 table over every domain of `store`: domains known to the model are
 * evaluated as seen, the rest as unseen under output averaging. */
GM_API gm_status gm_eval(const gm_model* model, const gm_store* store, const gm_config* cfg,
                         const char* out_path);

/* Low-level affinity to `low_path`; high-level to `high_path` when a model is
 * given. */
GM_API gm_status gm_affinity(const gm_store* store, const gm_model* model, const char* low_path,
                             const char* high_path);

/* Runs the grid ("dsbn=off,on", "setri=off,on", "distill=off,on") over
 * compare.seeds seeds starting at `seed`. */
GM_API gm_status gm_compare(const gm_config* cfg, const char* const* grid, size_t n_grid,
                            uint64_t seed, const char* table_path, const char* cells_path);

#ifdef __cplusplus
}
#endif

#endif /* GAITMIX_GAITMIX_H_ */
