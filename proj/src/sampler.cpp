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

#include "gaitmix/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gaitmix {

std::size_t BatchSpec::batch_size() const {
  std::size_t b = 0;
  for (const DomainDraw& d : draws) b += d.identities * d.samples_per_identity;
  return b;
}

void BatchSpec::validate() const {
  if (draws.empty()) fail(ErrorCode::invalid_argument, "batch spec has no domains");
  for (std::size_t i = 0; i < draws.size(); ++i) {
    if (i > 0 && !(draws[i - 1].domain < draws[i].domain))
      fail(ErrorCode::invalid_argument, "batch spec domains must be strictly ascending");
    if (draws[i].identities < 2 || draws[i].samples_per_identity < 2)
      fail(ErrorCode::invalid_argument, "batch spec for domain " +
                                            std::to_string(draws[i].domain.value) +
                                            " needs P >= 2 and K >= 2");
  }
}

void LrSchedule::validate() const {
  if (total_steps == 0) fail(ErrorCode::invalid_argument, "schedule total_steps must be positive");
  if (!std::isfinite(initial) || initial < 0)
    fail(ErrorCode::invalid_argument, "initial learning rate must be finite and non-negative");
  if (!(decay_factor > 0 && decay_factor < 1))
    fail(ErrorCode::invalid_argument, "decay factor must be in (0, 1)");
  for (std::size_t i = 0; i < decay_steps.size(); ++i) {
    if (i > 0 && decay_steps[i] <= decay_steps[i - 1])
      fail(ErrorCode::invalid_argument, "decay steps must be strictly ascending");
    if (decay_steps[i] >= total_steps)
      fail(ErrorCode::invalid_argument, "decay steps must lie below total_steps");
  }
}

double lr_at(std::size_t step, const LrSchedule& schedule) {
  if (step >= schedule.total_steps)
    fail(ErrorCode::invalid_argument, "step " + std::to_string(step) + " outside schedule of " +
                                          std::to_string(schedule.total_steps) + " steps");
  double lr = schedule.initial;
  for (std::size_t s : schedule.decay_steps)
    if (s <= step) lr *= schedule.decay_factor;
  return lr;
}

std::vector<std::size_t> sample_batch(const FeatureStore& store, const BatchSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<std::size_t> out;
  out.reserve(spec.batch_size());
  for (const DomainDraw& draw : spec.draws) {
    std::vector<const std::vector<std::size_t>*> pool;
    for (const auto& [identity, rows] : store.identity_index())
      if (identity.domain == draw.domain) pool.push_back(&rows);
    if (pool.size() < draw.identities)
      fail(ErrorCode::invalid_argument, "domain " + std::to_string(draw.domain.value) + " has " +
                                            std::to_string(pool.size()) + " identities, batch needs " +
                                            std::to_string(draw.identities));
    // Partial Fisher-Yates: the first P entries become the chosen identities.
    for (std::size_t i = 0; i < draw.identities; ++i)
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    for (std::size_t i = 0; i < draw.identities; ++i) {
      std::vector<std::size_t> rows = *pool[i];
      const std::size_t k = draw.samples_per_identity;
      if (rows.size() >= k) {
        for (std::size_t t = 0; t < k; ++t) std::swap(rows[t], rows[t + rng.below(rows.size() - t)]);
        out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        const std::size_t have = rows.size();
        shuffle(rows, rng);
        out.insert(out.end(), rows.begin(), rows.end());
        for (std::size_t t = have; t < k; ++t) out.push_back(rows[rng.below(have)]);
      }
    }
  }
  return out;
}

}  // namespace gaitmix
