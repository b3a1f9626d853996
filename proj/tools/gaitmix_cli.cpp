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

// gaitmix command-line driver. Links only the C interface.
//
//   gaitmix gen      --config C --out data.csv [--seed S]
//   gaitmix train    data.csv [--config C] [--checkpoint init.ckpt] --out DIR [--seed S]
//   gaitmix distill  data.csv [--checkpoint M] [--mode noise|redundancy] [--fraction F] --out DIR
//   gaitmix eval     data.csv --checkpoint M --out rank1.csv
//   gaitmix affinity a.csv [b.csv ...] [--checkpoint M] --out DIR
//   gaitmix compare  --config C --grid dsbn=off,on setri=off,on --out DIR [--seed S]
//
// Exit status: 0 success, 1 user error, 2 internal error.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gaitmix/gaitmix.h"

namespace {

constexpr int kUserError = 1;
constexpr int kInternalError = 2;

struct Failure {
  int exit_code;
  std::string message;
};

void check(gm_status st) {
  if (st == GM_OK) return;
  throw Failure{gm_status_is_user_error(st) ? kUserError : kInternalError,
                std::string(gm_status_name(st)) + ": " + gm_last_error()};
}

struct ConfigDeleter {
  void operator()(gm_config* p) const { gm_config_free(p); }
};
struct StoreDeleter {
  void operator()(gm_store* p) const { gm_store_free(p); }
};
struct ModelDeleter {
  void operator()(gm_model* p) const { gm_model_free(p); }
};
using ConfigPtr = std::unique_ptr<gm_config, ConfigDeleter>;
using StorePtr = std::unique_ptr<gm_store, StoreDeleter>;
using ModelPtr = std::unique_ptr<gm_model, ModelDeleter>;

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string mode;
  double fraction = -1.0;
  std::vector<std::string> grid;
  std::string checkpoint;
  std::vector<std::string> inputs;
};

ConfigPtr load_config(const Options& o) {
  gm_config* raw = nullptr;
  if (o.config.empty())
    check(gm_config_new(&raw));
  else
    check(gm_config_load(o.config.c_str(), &raw));
  return ConfigPtr(raw);
}

StorePtr load_store(const std::string& path) {
  gm_store* raw = nullptr;
  check(gm_store_load(path.c_str(), &raw));
  return StorePtr(raw);
}

ModelPtr load_model(const std::string& path) {
  if (path.empty()) return nullptr;
  gm_model* raw = nullptr;
  check(gm_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

std::string out_dir(const Options& o) {
  std::error_code ec;
  std::filesystem::create_directories(o.out, ec);
  if (ec) throw Failure{kUserError, "cannot create output directory '" + o.out + "': " + ec.message()};
  return o.out;
}

std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

void single_input(const Options& o, const char* cmd) {
  if (o.inputs.size() != 1)
    throw Failure{kUserError, std::string(cmd) + " expects exactly one feature file"};
}

void run_gen(const Options& o) {
  if (o.config.empty()) throw Failure{kUserError, "gen requires --config"};
  ConfigPtr cfg = load_config(o);
  gm_store* raw = nullptr;
  check(gm_generate(cfg.get(), o.seed, &raw));
  StorePtr store(raw);
  check(gm_store_save(store.get(), o.out.c_str()));
}

void run_train(const Options& o) {
  single_input(o, "train");
  ConfigPtr cfg = load_config(o);
  StorePtr store = load_store(o.inputs[0]);
  ModelPtr init = load_model(o.checkpoint);
  const std::string dir = out_dir(o);
  gm_model* raw = nullptr;
  check(gm_train(store.get(), cfg.get(), o.seed, init.get(), join(dir, "run_report.csv").c_str(), &raw));
  ModelPtr model(raw);
  check(gm_model_save(model.get(), join(dir, "model.ckpt").c_str()));
}

void run_distill(const Options& o) {
  single_input(o, "distill");
  ConfigPtr cfg = load_config(o);
  StorePtr store = load_store(o.inputs[0]);
  ModelPtr model = load_model(o.checkpoint);
  const std::string dir = out_dir(o);
  gm_store* raw = nullptr;
  check(gm_distill(store.get(), model.get(), cfg.get(), o.mode.empty() ? nullptr : o.mode.c_str(),
                   o.fraction, o.seed, join(dir, "distill_report.csv").c_str(), &raw));
  StorePtr retained(raw);
  check(gm_store_save(retained.get(), join(dir, "retained.csv").c_str()));
}

void run_eval(const Options& o) {
  single_input(o, "eval");
  if (o.checkpoint.empty()) throw Failure{kUserError, "eval requires --checkpoint"};
  ConfigPtr cfg = load_config(o);
  StorePtr store = load_store(o.inputs[0]);
  ModelPtr model = load_model(o.checkpoint);
  check(gm_eval(model.get(), store.get(), cfg.get(), o.out.c_str()));
}

void run_affinity(const Options& o) {
  if (o.inputs.empty()) throw Failure{kUserError, "affinity expects at least one feature file"};
  StorePtr store = load_store(o.inputs[0]);
  for (std::size_t i = 1; i < o.inputs.size(); ++i) {
    StorePtr next = load_store(o.inputs[i]);
    gm_store* raw = nullptr;
    check(gm_store_merge(store.get(), next.get(), &raw));
    store.reset(raw);
  }
  ModelPtr model = load_model(o.checkpoint);
  const std::string dir = out_dir(o);
  check(gm_affinity(store.get(), model.get(), join(dir, "affinity_low.csv").c_str(),
                    join(dir, "affinity_high.csv").c_str()));
}

void run_compare(const Options& o) {
  if (o.grid.empty()) throw Failure{kUserError, "compare requires --grid"};
  ConfigPtr cfg = load_config(o);
  const std::string dir = out_dir(o);
  std::vector<const char*> grid;
  for (const std::string& g : o.grid) grid.push_back(g.c_str());
  check(gm_compare(cfg.get(), grid.data(), grid.size(), o.seed, join(dir, "comparison.csv").c_str(),
                   join(dir, "comparison_cells.csv").c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaitmix: mixed-domain metric learning toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gm_version()));
  Options o;

  auto common = [&o](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", o.config, "configuration file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed");
    auto* out = sub->add_option("--out", o.out, "output file or directory");
    if (needs_out) out->required();
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic feature file");
  common(gen, true);
  auto* train = app.add_subcommand("train", "train a model on a feature file");
  common(train, true);
  train->add_option("inputs", o.inputs, "feature file")->required();
  train->add_option("--checkpoint", o.checkpoint, "initial checkpoint")->check(CLI::ExistingFile);
  auto* distill = app.add_subcommand("distill", "score and prune a feature file");
  common(distill, true);
  distill->add_option("inputs", o.inputs, "feature file")->required();
  distill->add_option("--checkpoint", o.checkpoint, "scoring model (default: pretrain per domain)")
      ->check(CLI::ExistingFile);
  distill->add_option("--mode", o.mode, "noise | redundancy");
  distill->add_option("--fraction", o.fraction, "removal fraction per domain");
  auto* eval = app.add_subcommand("eval", "rank-1 table of a checkpoint on a feature file");
  common(eval, true);
  eval->add_option("inputs", o.inputs, "feature file")->required();
  eval->add_option("--checkpoint", o.checkpoint, "model checkpoint")->check(CLI::ExistingFile);
  auto* affinity = app.add_subcommand("affinity", "domain affinity matrices");
  common(affinity, true);
  affinity->add_option("inputs", o.inputs, "feature files")->required();
  affinity->add_option("--checkpoint", o.checkpoint, "model for high-level affinity")
      ->check(CLI::ExistingFile);
  auto* compare = app.add_subcommand("compare", "variant grid over several seeds");
  common(compare, true);
  compare->add_option("--grid", o.grid, "key=off,on axes (dsbn, setri, distill)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "gaitmix: error: %s\n", e.what());
    return kUserError;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "gen") run_gen(o);
    else if (name == "train") run_train(o);
    else if (name == "distill") run_distill(o);
    else if (name == "eval") run_eval(o);
    else if (name == "affinity") run_affinity(o);
    else run_compare(o);
  } catch (const Failure& f) {
    std::fprintf(stderr, "gaitmix: error: %s\n", f.message.c_str());
    return f.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gaitmix: error: %s\n", e.what());
    return kInternalError;
  }
  return 0;
}
