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

#ifndef GAITMIX_IO_HPP_
#define GAITMIX_IO_HPP_

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gaitmix/affinity.hpp"
#include "gaitmix/core.hpp"
#include "gaitmix/distill.hpp"
#include "gaitmix/netmod.hpp"
#include "gaitmix/synth.hpp"
#include "gaitmix/trainer.hpp"

namespace gaitmix {

// Format-version tokens; every artifact starts with one and readers reject
// anything else.
inline constexpr std::string_view kFeaturesVersion = "#gaitmix-features v1";
inline constexpr std::string_view kCheckpointVersion = "#gaitmix-checkpoint v1";
inline constexpr std::string_view kDistillVersion = "#gaitmix-distill-report v1";
inline constexpr std::string_view kRunReportVersion = "#gaitmix-run-report v1";
inline constexpr std::string_view kRank1Version = "#gaitmix-rank1 v1";
inline constexpr std::string_view kAffinityVersion = "#gaitmix-affinity v1";
inline constexpr std::string_view kComparisonVersion = "#gaitmix-comparison v1";

/// Flat `key = value` configuration with dotted sections. Lines starting
/// with '#' are comments. Keys outside the schema are rejected; per-domain
/// keys use `domain<k>` as a section (synth.domain0.shift, train.domain1.P).
class Config {
 public:
  Config() = default;
  static Config parse(std::string_view text, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool is_set(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::size_t> counts(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  /// Every accepted key with its default and meaning.
  static std::string documentation();

 private:
  std::map<std::string, std::string> values_;
};

struct SynthPlan {
  std::vector<DomainRecipe> recipes;  // recipe k is domain k
  std::vector<DomainId> train_domains;
  std::vector<DomainId> heldout_domains;
};

SynthPlan synth_plan_from(const Config& cfg);
/// Batch spec, weights, schedule and model shape for training on `store`.
TrainConfig train_config_from(const Config& cfg, const FeatureStore& store, std::uint64_t seed);
DistillPolicy distill_policy_from(const Config& cfg);
/// Per seed: training and held-out domains from the recipes, plus a
/// fresh-identity test set of the training domains.
ExperimentFactory experiment_factory_from(const Config& cfg);

/// Parses "k=v1,v2 k2=..." grid arguments into the Cartesian product of
/// variants (first key varies slowest). Keys: dsbn, setri, distill.
std::vector<Variant> variants_from_grid(const std::vector<std::string>& grid, const Config& cfg);

// Feature files: version line, `id,identity,domain,flag,s0,...` header, rows.
void write_features(std::ostream& os, const FeatureStore& store);
FeatureStore read_features(std::istream& is, const std::string& origin = "<features>");
void save_features(const std::string& path, const FeatureStore& store);
FeatureStore load_features(const std::string& path);

// Checkpoints: version line, key=value hyperparameters, then `[name rows cols]`
// blocks in the fixed order w1, b1, gamma.k, beta.k, w2, b2, head_w.j,
// head_b.j, running_mean.k, running_var.k with one matrix row per line.
void write_checkpoint(std::ostream& os, const ModelState& model);
ModelState read_checkpoint(std::istream& is, const std::string& origin = "<checkpoint>");
void save_checkpoint(const std::string& path, const ModelState& model);
ModelState load_checkpoint(const std::string& path);

void write_distill_report(std::ostream& os, const DistillReport& report);
void write_run_report(std::ostream& os, const RunReport& report);

struct Rank1Row {
  std::string protocol;
  std::size_t gallery = 0;
  std::size_t probe = 0;
  double rank1 = 0.0;
};
void write_rank1_table(std::ostream& os, const std::vector<Rank1Row>& rows);
void write_affinity(std::ostream& os, const AffinityMatrix& matrix);
void write_comparison(std::ostream& os, const ComparisonTable& table);
void write_comparison_cells(std::ostream& os, const ComparisonTable& table);

/// Writes `content` to `path`, throwing io on failure.
void write_file(const std::string& path, const std::string& content);

}  // namespace gaitmix

#endif  // GAITMIX_IO_HPP_
