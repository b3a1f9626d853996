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

// Shared fixtures for the unit tests. Oracles live in the individual test
// files next to the checks that use them.
#ifndef GAITMIX_TESTS_TEST_UTIL_HPP_
#define GAITMIX_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "gaitmix/core.hpp"

namespace gaitmix::testing {

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

/// Random store: `domains` domains, `ids` identities each with `per` samples,
/// signatures uniform in [-1, 1). Sample ids are shuffled and sparse.
inline FeatureStore random_store(std::uint64_t seed, std::size_t domains, std::size_t ids,
                                 std::size_t per, std::size_t dim) {
  Rng rng(seed, 99);
  std::vector<std::uint64_t> sample_ids;
  for (std::size_t i = 0; i < domains * ids * per; ++i) sample_ids.push_back(3 * i + 1);
  shuffle(sample_ids, rng);
  std::vector<Sample> samples;
  std::size_t next = 0;
  for (std::size_t d = 0; d < domains; ++d)
    for (std::size_t l = 0; l < ids; ++l)
      for (std::size_t s = 0; s < per; ++s) {
        Sample x;
        x.id = sample_ids[next++];
        x.identity = IdentityId{DomainId{static_cast<std::uint32_t>(d)}, static_cast<std::uint32_t>(l)};
        for (std::size_t j = 0; j < dim; ++j) x.signature.push_back(2.0 * rng.uniform() - 1.0);
        samples.push_back(std::move(x));
      }
  return FeatureStore(dim, std::move(samples));
}

}  // namespace gaitmix::testing

#endif  // GAITMIX_TESTS_TEST_UTIL_HPP_
