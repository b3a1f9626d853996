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

#ifndef GAITMIX_TRAINER_HPP_
#define GAITMIX_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaitmix/core.hpp"
#include "gaitmix/distill.hpp"
#include "gaitmix/losses.hpp"
#include "gaitmix/netmod.hpp"
#include "gaitmix/sampler.hpp"

namespace gaitmix {

struct TrainConfig {
  ModelHyper hyper;  // d_in is taken from the training store
  BatchSpec batch;
  TripletConfig triplet;
  TripletScope scope = TripletScope::separate;
  DomainWeights weights;
  LrSchedule schedule;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // 0: evaluate only after the last step

  /// Canonical key=value rendering; the digest hashes this text.
  std::string describe() const;
  std::uint64_t digest() const;
};

/// Gallery/probe retrieval task over one domain.
struct EvalProtocol {
  std::string name;
  FeatureStore gallery;
  FeatureStore probe;
  InferenceNorm norm;

  void validate() const;
};

/// Per identity, the first `n_gallery` samples (ascending id) go to the
/// gallery and the rest to the probe set.
std::pair<FeatureStore, FeatureStore> split_gallery_probe(const FeatureStore& store,
                                                          std::size_t n_gallery);

/// Protocols for every domain: seen domains under their own branch (and
/// additionally under output averaging for DSBN models), unseen domains
/// under output averaging. Names are "self:d<k>:branch", "self:d<k>:average",
/// "cross:d<k>:average".
std::vector<EvalProtocol> make_protocols(NormMode norm, const FeatureStore& self_test,
                                         const FeatureStore& cross_test, std::size_t n_gallery);

/// Fraction of probes whose nearest gallery row carries the same identity;
/// distance ties go to the smaller gallery sample id.
double rank1(const Eigen::MatrixXd& gallery, std::span<const std::uint64_t> gallery_ids,
             std::span<const IdentityId> gallery_identities, const Eigen::MatrixXd& probe,
             std::span<const IdentityId> probe_identities);
double rank1(const ModelState& model, const EvalProtocol& protocol);

struct EvalRecord {
  std::size_t step = 0;
  std::string name;
  double rank1 = 0.0;
};

struct LossRecord {
  std::size_t step = 0;
  double lr = 0.0;
  LossBreakdown loss;  // gradients dropped
};

struct RunReport {
  std::vector<EvalRecord> evals;
  std::vector<LossRecord> trace;
  std::uint64_t config_digest = 0;
  double wall_seconds = 0.0;  // informational; never written to artifacts
};

struct TrainResult {
  ModelState model;
  RunReport report;
};

/// SGD with momentum on the combined loss over mixed P x K batches.
/// v <- momentum * v - lr * (g + weight_decay * theta); theta <- theta + v.
/// Throws divergence on a non-finite loss.
TrainResult train(const FeatureStore& store, const TrainConfig& cfg,
                  std::span<const EvalProtocol> protocols = {});

/// Same as train() but starting from a given model (used for 0-step and
/// resume checks).
TrainResult train_from(ModelState model, const FeatureStore& store, const TrainConfig& cfg,
                       std::span<const EvalProtocol> protocols = {});

/// Copy of `base` reduced to one domain of `store`, single normalization,
/// `steps` steps with decays at 1/2 and 3/4 of the run.
TrainConfig single_domain_config(const TrainConfig& base, DomainId domain, std::size_t steps);

/// One single-domain model per domain of `store`.
std::map<DomainId, ModelState> pretrain_per_domain(const FeatureStore& store, const TrainConfig& base,
                                                   std::size_t steps);

/// Uniformly random removal with the same per-domain budget and last-sample
/// guard as distillation.
std::vector<std::uint64_t> random_removals(const FeatureStore& store, double fraction, Rng& rng);

struct Experiment {
  FeatureStore train;
  FeatureStore self_test;   // fresh identities from the training domains
  FeatureStore cross_test;  // held-out domains
  std::size_t gallery_per_identity = 2;
};
using ExperimentFactory = std::function<Experiment(std::uint64_t seed)>;

enum class DataPruning { none, distill, random };

struct Variant {
  std::string name;
  std::function<void(TrainConfig&)> apply;
  DataPruning pruning = DataPruning::none;
  DistillPolicy policy;
  std::size_t pretrain_steps = 2000;
};

struct ComparisonCell {
  std::string variant;
  std::uint64_t seed = 0;
  double self_rank1 = 0.0;
  double self_rank1_average = 0.0;  // seen domains under output averaging
  double cross_rank1 = 0.0;
  std::size_t train_samples = 0;
  std::size_t full_samples = 0;
  std::string error;
};

struct ComparisonRow {
  std::string variant;
  std::size_t n_ok = 0;
  double self_mean = 0.0, self_std = 0.0;
  double cross_mean = 0.0, cross_std = 0.0;
  double train_fraction = 0.0;
  std::vector<std::string> errors;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<ComparisonCell> cells;
  std::uint64_t digest = 0;
};

/// Trains every variant for every seed and aggregates mean and sample std of
/// self-domain and held-out rank-1. A failing cell is recorded and the rest
/// continue.
ComparisonTable run_comparison(std::span<const Variant> variants, const TrainConfig& base,
                               const ExperimentFactory& experiments,
                               std::span<const std::uint64_t> seeds);

/// Single-cell evaluation shared by run_comparison and the CLI.
ComparisonCell run_cell(const Variant& variant, const TrainConfig& base, const Experiment& exp,
                        std::uint64_t seed);

}  // namespace gaitmix

#endif  // GAITMIX_TRAINER_HPP_
