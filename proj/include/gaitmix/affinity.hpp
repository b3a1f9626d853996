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

#ifndef GAITMIX_AFFINITY_HPP_
#define GAITMIX_AFFINITY_HPP_

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "gaitmix/core.hpp"
#include "gaitmix/netmod.hpp"

namespace gaitmix {

enum class AffinityLevel { low, high };

/// Symmetric domain-by-domain cosine similarity with a unit diagonal.
struct AffinityMatrix {
  AffinityLevel level = AffinityLevel::low;
  std::vector<DomainId> domains;
  Eigen::MatrixXd values;
};

/// Throws undefined_similarity if either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Cosine similarity between the domains' mean raw signatures.
AffinityMatrix low_level_affinity(const FeatureStore& store);

/// Cosine similarity between the domains' embedding centroids, embedded
/// under output-averaging normalization.
AffinityMatrix high_level_affinity(const FeatureStore& store, const ModelState& model);

/// Pearson correlation between affinity and cross-domain rank-1 over ordered
/// (train, test) pairs with train != test. cross_rank1(i, j) is the rank-1 on
/// domain j of a model trained on domain i.
double affinity_accuracy_correlation(const AffinityMatrix& affinity, const Eigen::MatrixXd& cross_rank1);

}  // namespace gaitmix

#endif  // GAITMIX_AFFINITY_HPP_
