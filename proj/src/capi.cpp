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

#include "gaitmix/gaitmix.h"

#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "gaitmix/affinity.hpp"
#include "gaitmix/distill.hpp"
#include "gaitmix/io.hpp"
#include "gaitmix/synth.hpp"
#include "gaitmix/trainer.hpp"

struct gm_config {
  gaitmix::Config value;
};
struct gm_store {
  gaitmix::FeatureStore value;
};
struct gm_model {
  gaitmix::ModelState value;
};

namespace {

thread_local std::string g_last_error;

gm_status from_code(gaitmix::ErrorCode code) {
  using gaitmix::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return GM_ERR_INVALID_ARGUMENT;
    case ErrorCode::not_found: return GM_ERR_NOT_FOUND;
    case ErrorCode::no_negatives: return GM_ERR_NO_NEGATIVES;
    case ErrorCode::degenerate_batch: return GM_ERR_DEGENERATE_BATCH;
    case ErrorCode::invalid_state: return GM_ERR_INVALID_STATE;
    case ErrorCode::insufficient_data: return GM_ERR_INSUFFICIENT_DATA;
    case ErrorCode::undefined_similarity: return GM_ERR_UNDEFINED_SIMILARITY;
    case ErrorCode::divergence: return GM_ERR_DIVERGENCE;
    case ErrorCode::io: return GM_ERR_IO;
    case ErrorCode::format: return GM_ERR_FORMAT;
  }
  return GM_ERR_INTERNAL;
}

template <typename F>
gm_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return GM_OK;
  } catch (const gaitmix::Error& e) {
    g_last_error = e.what();
    return from_code(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return GM_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) gaitmix::fail(gaitmix::ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

template <typename W, typename T>
void write_to(const char* path, W writer, const T& value) {
  std::ostringstream os;
  writer(os, value);
  gaitmix::write_file(path, os.str());
}

}  // namespace

extern "C" {

const char* gm_last_error(void) { return g_last_error.c_str(); }

const char* gm_status_name(gm_status status) {
  switch (status) {
    case GM_OK: return "ok";
    case GM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case GM_ERR_NOT_FOUND: return "not_found";
    case GM_ERR_NO_NEGATIVES: return "no_negatives";
    case GM_ERR_DEGENERATE_BATCH: return "degenerate_batch";
    case GM_ERR_INVALID_STATE: return "invalid_state";
    case GM_ERR_INSUFFICIENT_DATA: return "insufficient_data";
    case GM_ERR_UNDEFINED_SIMILARITY: return "undefined_similarity";
    case GM_ERR_DIVERGENCE: return "divergence";
    case GM_ERR_IO: return "io";
    case GM_ERR_FORMAT: return "format";
    case GM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int gm_status_is_user_error(gm_status status) {
  return status != GM_OK && status != GM_ERR_DIVERGENCE && status != GM_ERR_INVALID_STATE &&
         status != GM_ERR_INTERNAL;
}

const char* gm_version(void) { return "0.1.0"; }

gm_status gm_config_new(gm_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new gm_config{};
  });
}

gm_status gm_config_load(const char* path, gm_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new gm_config{gaitmix::Config::load(path)};
  });
}

gm_status gm_config_set(gm_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->value.set(key, value);
  });
}

const char* gm_config_documentation(void) {
  static const std::string doc = gaitmix::Config::documentation();
  return doc.c_str();
}

void gm_config_free(gm_config* cfg) { delete cfg; }

gm_status gm_generate(const gm_config* cfg, uint64_t seed, gm_store** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    const gaitmix::SynthPlan plan = gaitmix::synth_plan_from(cfg->value);
    *out = new gm_store{gaitmix::generate(plan.recipes, seed)};
  });
}

gm_status gm_store_load(const char* path, gm_store** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new gm_store{gaitmix::load_features(path)};
  });
}

gm_status gm_store_save(const gm_store* store, const char* path) {
  return guarded([&] {
    require(store, "store");
    require(path, "path");
    gaitmix::save_features(path, store->value);
  });
}

gm_status gm_store_merge(const gm_store* a, const gm_store* b, gm_store** out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = new gm_store{gaitmix::merge(a->value, b->value)};
  });
}

size_t gm_store_size(const gm_store* store) { return store ? store->value.size() : 0; }
size_t gm_store_dim(const gm_store* store) { return store ? store->value.dim() : 0; }
size_t gm_store_domain_count(const gm_store* store) {
  return store ? store->value.domain_table().size() : 0;
}
void gm_store_free(gm_store* store) { delete store; }

gm_status gm_train(const gm_store* store, const gm_config* cfg, uint64_t seed, const gm_model* init,
                   const char* report_path, gm_model** out) {
  return guarded([&] {
    require(store, "store");
    require(cfg, "cfg");
    require(out, "out");
    const gaitmix::TrainConfig tc = gaitmix::train_config_from(cfg->value, store->value, seed);
    gaitmix::TrainResult res = init ? gaitmix::train_from(init->value, store->value, tc)
                                    : gaitmix::train(store->value, tc);
    if (report_path) write_to(report_path, gaitmix::write_run_report, res.report);
    *out = new gm_model{std::move(res.model)};
  });
}

gm_status gm_model_load(const char* path, gm_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new gm_model{gaitmix::load_checkpoint(path)};
  });
}

gm_status gm_model_save(const gm_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    gaitmix::save_checkpoint(path, model->value);
  });
}

void gm_model_free(gm_model* model) { delete model; }

gm_status gm_distill(const gm_store* store, const gm_model* model, const gm_config* cfg,
                     const char* mode, double fraction, uint64_t seed, const char* report_path,
                     gm_store** retained) {
  return guarded([&] {
    require(store, "store");
    require(cfg, "cfg");
    gaitmix::Config c = cfg->value;
    if (mode) c.set("distill.mode", mode);
    if (fraction >= 0.0) c.set("distill.fraction", gaitmix::format_real(fraction));
    const gaitmix::DistillPolicy policy = gaitmix::distill_policy_from(c);
    gaitmix::DistillReport report;
    if (model) {
      report = gaitmix::distill(store->value, model->value, policy);
    } else {
      const gaitmix::TrainConfig base = gaitmix::train_config_from(c, store->value, seed);
      const auto models =
          gaitmix::pretrain_per_domain(store->value, base, c.count("distill.pretrain_steps"));
      report = gaitmix::distill(store->value, models, policy);
    }
    if (report_path) write_to(report_path, gaitmix::write_distill_report, report);
    if (retained) *retained = new gm_store{store->value.without_ids(report.removed_ids)};
  });
}

gm_status gm_eval(const gm_model* model, const gm_store* store, const gm_config* cfg,
                  const char* out_path) {
  return guarded([&] {
    require(model, "model");
    require(store, "store");
    require(cfg, "cfg");
    require(out_path, "out_path");
    const gaitmix::ModelState& m = model->value;
    std::vector<gaitmix::DomainId> seen, unseen;
    for (gaitmix::DomainId d : store->value.domains())
      (m.classes.domain_position(d) >= 0 ? seen : unseen).push_back(d);
    const auto protocols =
        gaitmix::make_protocols(m.hyper.norm, store->value.select_domains(seen),
                                store->value.select_domains(unseen),
                                cfg->value.count("eval.gallery_per_identity"));
    if (protocols.empty())
      gaitmix::fail(gaitmix::ErrorCode::insufficient_data,
                    "no domain has both gallery and probe samples");
    std::vector<gaitmix::Rank1Row> rows;
    for (const auto& p : protocols)
      rows.push_back({p.name, p.gallery.size(), p.probe.size(), gaitmix::rank1(m, p)});
    write_to(out_path, gaitmix::write_rank1_table, rows);
  });
}

gm_status gm_affinity(const gm_store* store, const gm_model* model, const char* low_path,
                      const char* high_path) {
  return guarded([&] {
    require(store, "store");
    require(low_path, "low_path");
    write_to(low_path, gaitmix::write_affinity, gaitmix::low_level_affinity(store->value));
    if (model) {
      require(high_path, "high_path");
      write_to(high_path, gaitmix::write_affinity,
               gaitmix::high_level_affinity(store->value, model->value));
    }
  });
}

gm_status gm_compare(const gm_config* cfg, const char* const* grid, size_t n_grid, uint64_t seed,
                     const char* table_path, const char* cells_path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(table_path, "table_path");
    if (n_grid) require(grid, "grid");
    std::vector<std::string> items;
    for (size_t i = 0; i < n_grid; ++i) {
      require(grid[i], "grid entry");
      items.emplace_back(grid[i]);
    }
    const auto variants = gaitmix::variants_from_grid(items, cfg->value);
    const auto factory = gaitmix::experiment_factory_from(cfg->value);
    const std::size_t n_seeds = cfg->value.count("compare.seeds");
    if (n_seeds == 0) gaitmix::fail(gaitmix::ErrorCode::invalid_argument, "compare.seeds must be positive");
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(seed + i);
    const gaitmix::TrainConfig base =
        gaitmix::train_config_from(cfg->value, factory(seeds.front()).train, seed);
    const auto table = gaitmix::run_comparison(variants, base, factory, seeds);
    write_to(table_path, gaitmix::write_comparison, table);
    if (cells_path) write_to(cells_path, gaitmix::write_comparison_cells, table);
  });
}

}  // extern "C"
