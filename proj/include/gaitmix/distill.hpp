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

#ifndef GAITMIX_DISTILL_HPP_
#define GAITMIX_DISTILL_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaitmix/core.hpp"
#include "gaitmix/netmod.hpp"

namespace gaitmix {

/// Maps a sample to its feature-space embedding.
using EmbedFn = std::function<Embedding(const Sample&)>;

/// Mean Euclidean distance from the anchor to every same-domain sample of a
/// different identity. Throws no_negatives when there are none.
double mean_negative_distance(const Sample& anchor, const FeatureStore& store, const EmbedFn& embed);

/// Mean embedding of an identity's samples; throws not_found.
Embedding identity_centroid(IdentityId identity, const FeatureStore& store, const EmbedFn& embed);

/// Distance from the sample's embedding to its identity centroid.
double intra_distance(const Sample& sample, const FeatureStore& store, const EmbedFn& embed);

/// True iff any part-level prediction differs from the label.
bool part_failure(std::span<const IdentityId> predictions, IdentityId label);

enum class DistillMode { redundancy, noise };

struct DistillPolicy {
  DistillMode mode = DistillMode::noise;
  double removal_fraction = 0.2;

  void validate() const;
};

struct SampleScores {
  std::uint64_t sample_id = 0;
  std::optional<double> mean_dist;  // empty when the domain has no negatives
  double intra_dist = 0.0;
  bool failure = false;
};

struct DistillReport {
  std::vector<SampleScores> scores;     // ascending sample id
  std::vector<std::uint64_t> removed_ids;  // ascending
  DistillPolicy policy;
  std::uint64_t retained_store_digest = 0;
  /// Budget that could not be spent because of the last-sample guard.
  std::size_t shortfall = 0;
  std::vector<std::string> notices;
};

/// Scores every sample from precomputed embeddings (row i = store sample i)
/// and per-sample part predictions.
std::vector<SampleScores> score_samples(const FeatureStore& store, const Eigen::MatrixXd& embeddings,
                                        const std::vector<std::vector<IdentityId>>& part_preds);

/// Scores from a model in inference mode.
std::vector<SampleScores> score_samples(const FeatureStore& store, const ModelState& model);

/// Removal decisions from given scores; budget floor(fraction * N_k) per domain.
/// redundancy: largest mean_dist first. noise: failures in ascending id
/// order, then largest intra_dist. Ties go to the smaller id; an identity's
/// last sample is never removed.
DistillReport select_removals(const FeatureStore& store, std::vector<SampleScores> scores,
                              const DistillPolicy& policy);

/// Scores the whole store with one model and selects removals.
DistillReport distill(const FeatureStore& store, const ModelState& model, const DistillPolicy& policy);

/// Each domain scored with the model pretrained on that domain alone.
DistillReport distill(const FeatureStore& store, const std::map<DomainId, ModelState>& models,
                      const DistillPolicy& policy);

}  // namespace gaitmix

#endif  // GAITMIX_DISTILL_HPP_
