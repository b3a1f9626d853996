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

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "gaitmix/sampler.hpp"
#include "test_util.hpp"

using namespace gaitmix;

TEST_CASE("batch sizes follow P x K per domain") {
  const FeatureStore s = gaitmix::testing::random_store(1, 2, 40, 5, 2);
  Rng rng(3);
  BatchSpec one{{{DomainId{0}, 16, 4}}};
  CHECK(one.batch_size() == 64);
  CHECK(sample_batch(s, one, rng).size() == 64);
  BatchSpec two{{{DomainId{0}, 32, 4}, {DomainId{1}, 32, 4}}};
  const auto rows = sample_batch(s, two, rng);
  REQUIRE(rows.size() == 256);
  std::size_t d0 = 0;
  for (auto r : rows) d0 += s[r].identity.domain == DomainId{0};
  CHECK(d0 == 128);
}

TEST_CASE("each batch has P distinct identities with K samples each") {
  const FeatureStore s = gaitmix::testing::random_store(2, 1, 10, 6, 2);
  Rng rng(5);
  BatchSpec spec{{{DomainId{0}, 4, 3}}};
  for (int t = 0; t < 50; ++t) {
    std::map<IdentityId, std::vector<std::size_t>> groups;
    for (auto r : sample_batch(s, spec, rng)) groups[s[r].identity].push_back(r);
    CHECK(groups.size() == 4);
    for (auto& [id, g] : groups) {
      CHECK(g.size() == 3);
      std::sort(g.begin(), g.end());
      CHECK(std::unique(g.begin(), g.end()) == g.end());
    }
  }
}

TEST_CASE("small identities are filled with replacement") {
  std::vector<Sample> v;
  for (std::uint64_t i = 0; i < 2; ++i) v.push_back({i, {DomainId{0}, 0}, {0.0}, TruthFlag::none});
  for (std::uint64_t i = 2; i < 8; ++i) v.push_back({i, {DomainId{0}, 1}, {0.0}, TruthFlag::none});
  const FeatureStore s(1, v);
  Rng rng(1);
  BatchSpec spec{{{DomainId{0}, 2, 4}}};
  for (int t = 0; t < 20; ++t) {
    std::map<std::uint64_t, int> seen;
    for (auto r : sample_batch(s, spec, rng)) ++seen[s[r].id];
    CHECK(seen.count(0) == 1);
    CHECK(seen.count(1) == 1);
  }
}

TEST_CASE("spec validation") {
  const FeatureStore s = gaitmix::testing::random_store(1, 2, 3, 2, 2);
  Rng rng(1);
  CHECK_THROWS_AS(sample_batch(s, BatchSpec{{{DomainId{0}, 4, 2}}}, rng), Error);
  CHECK_THROWS_AS((BatchSpec{{{DomainId{0}, 1, 2}}}.validate()), Error);
  CHECK_THROWS_AS((BatchSpec{{{DomainId{0}, 2, 1}}}.validate()), Error);
  CHECK_THROWS_AS((BatchSpec{{{DomainId{1}, 2, 2}, {DomainId{0}, 2, 2}}}.validate()), Error);
}

TEST_CASE("identity coverage is uniform across batches") {
  const FeatureStore s = gaitmix::testing::random_store(4, 1, 10, 4, 2);
  Rng rng(9);
  BatchSpec spec{{{DomainId{0}, 3, 2}}};
  std::map<std::uint32_t, int> picks;
  const int n = 20000;
  for (int t = 0; t < n; ++t)
    for (auto r : sample_batch(s, spec, rng)) ++picks[s[r].identity.label];
  // Each identity is drawn with probability 3/10 per batch.
  const double p = 0.3, mean = n * p * 2, sd = 2 * std::sqrt(n * p * (1 - p));
  for (const auto& [label, c] : picks) CHECK(std::abs(c - mean) < 3 * sd);
}

TEST_CASE("per-domain share over many batches") {
  const FeatureStore s = gaitmix::testing::random_store(6, 2, 8, 4, 2);
  Rng rng(2);
  BatchSpec spec{{{DomainId{0}, 4, 2}, {DomainId{1}, 2, 3}}};
  std::size_t d0 = 0, total = 0;
  for (int t = 0; t < 500; ++t)
    for (auto r : sample_batch(s, spec, rng)) {
      d0 += s[r].identity.domain == DomainId{0};
      ++total;
    }
  // Shares are fixed by construction: 8 of every 14 rows.
  CHECK(d0 * 14 == total * 8);
}

TEST_CASE("multi-step learning-rate decay") {
  LrSchedule s{0.1, {20000, 40000, 60000}, 0.1, 80000};
  CHECK(lr_at(0, s) == 0.1);
  CHECK(lr_at(19999, s) == 0.1);
  CHECK(lr_at(20000, s) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(lr_at(45000, s) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(lr_at(79999, s) == doctest::Approx(0.0001).epsilon(1e-15));
  CHECK_THROWS_AS(lr_at(80000, s), Error);
  std::set<double> plateaus;
  double prev = 1.0;
  for (std::size_t t = 0; t < 80000; t += 7) {
    const double lr = lr_at(t, s);
    CHECK(lr <= prev);
    prev = lr;
    plateaus.insert(lr);
  }
  CHECK(plateaus.size() == 4);
  CHECK_THROWS_AS((LrSchedule{0.1, {50, 40}, 0.1, 100}.validate()), Error);
  CHECK_THROWS_AS((LrSchedule{0.1, {100}, 0.1, 100}.validate()), Error);
}
