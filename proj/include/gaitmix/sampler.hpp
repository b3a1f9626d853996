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

#ifndef GAITMIX_SAMPLER_HPP_
#define GAITMIX_SAMPLER_HPP_

#include <cstdint>
#include <vector>

#include "gaitmix/core.hpp"

namespace gaitmix {

struct DomainDraw {
  DomainId domain;
  std::size_t identities = 2;           // P_k
  std::size_t samples_per_identity = 2;  // K_k
};

/// Per-domain P x K sampling contract.
struct BatchSpec {
  std::vector<DomainDraw> draws;  // ascending domain order

  std::size_t batch_size() const;
  /// Throws invalid_argument unless P_k, K_k >= 2 and domains are ascending.
  void validate() const;
};

/// Multi-step decay: lr = initial * factor^(number of decay steps <= step).
struct LrSchedule {
  double initial = 0.1;
  std::vector<std::size_t> decay_steps;
  double decay_factor = 0.1;
  std::size_t total_steps = 1;

  void validate() const;
};

double lr_at(std::size_t step, const LrSchedule& schedule);

/// Store positions of one mixed batch. Per domain in ascending order: P_k
/// identities uniformly without replacement, then K_k of each identity's
/// samples, without replacement when it has at least K_k and otherwise every
/// sample once plus uniform fill.
std::vector<std::size_t> sample_batch(const FeatureStore& store, const BatchSpec& spec, Rng& rng);

}  // namespace gaitmix

#endif  // GAITMIX_SAMPLER_HPP_
