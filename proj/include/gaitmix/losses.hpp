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

#ifndef GAITMIX_LOSSES_HPP_
#define GAITMIX_LOSSES_HPP_

#include <Eigen/Dense>
#include <map>
#include <set>
#include <span>

#include "gaitmix/core.hpp"

namespace gaitmix {

enum class Mining { all_valid, batch_hard };

/// Which triples may form: `naive` lets any other identity (from any domain)
/// be a negative; `separate` confines anchor, positive and negative to one
/// domain and averages per domain.
enum class TripletScope { naive, separate };

struct TripletConfig {
  double margin = 0.2;
  Mining mining = Mining::batch_hard;
};

using DomainWeights = std::map<DomainId, double>;

struct TripletResult {
  double value = 0.0;
  Eigen::MatrixXd grad;  // B x d_emb
  std::size_t n_terms = 0;
  /// Set when the batch holds no (anchor, positive, negative) triple.
  bool no_valid = false;
};

/// [d_ap - d_an + m]_+
double triplet_hinge(double d_ap, double d_an, double margin);

/// Triplet loss over the whole batch, every other identity a negative.
/// All-valid mining averages over every valid triple; batch-hard averages
/// over anchors using their farthest positive and nearest negative (ties go
/// to the lower row).
TripletResult naive_triplet(const Eigen::MatrixXd& embeddings,
                            std::span<const IdentityId> identities, const TripletConfig& cfg);

/// One naive_triplet per domain on that domain's rows; gradients are
/// scattered back to full-batch shape.
std::map<DomainId, TripletResult> separate_triplet(const Eigen::MatrixXd& embeddings,
                                                   std::span<const IdentityId> identities,
                                                   const TripletConfig& cfg);

struct CrossEntropyResult {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

/// Mean over rows and parts of -log softmax(logits)[label]. `logits` is
/// B x (parts * n_classes); labels index the unified class space.
CrossEntropyResult cross_entropy(const Eigen::MatrixXd& logits, std::size_t parts,
                                 std::span<const std::size_t> labels);

struct LossBreakdown {
  /// Separate scope only: unweighted per-domain triplet values.
  std::map<DomainId, double> per_domain_triplet;
  /// Naive scope only: the single batch-wide triplet value.
  double naive_triplet = 0.0;
  double cross_entropy = 0.0;
  double total = 0.0;
  /// Domains (or the whole batch, as domain set) that had no valid triple.
  std::set<DomainId> no_triplet_domains;
  Eigen::MatrixXd grad_embeddings;
  Eigen::MatrixXd grad_logits;
};

/// sum_k w^k * triplet_k + CE for the separate scope. The naive scope uses
/// the mean weight of the batch's domains on the single batch-wide term.
LossBreakdown combined_loss(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& logits,
                            std::size_t parts, std::span<const IdentityId> identities,
                            std::span<const std::size_t> labels, const DomainWeights& weights,
                            const TripletConfig& cfg, TripletScope scope);

}  // namespace gaitmix

#endif  // GAITMIX_LOSSES_HPP_
