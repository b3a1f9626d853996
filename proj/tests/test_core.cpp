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

#include <charconv>
#include <set>

#include "gaitmix/core.hpp"
#include "test_util.hpp"

using namespace gaitmix;
using gaitmix::testing::rel_err;

namespace {

double sum_of_squares_distance(const std::vector<double>& a, const std::vector<double>& b) {
  long double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
    acc += d * d;
  }
  return static_cast<double>(std::sqrt(acc));
}

Sample make(std::uint64_t id, std::uint32_t domain, std::uint32_t label, std::vector<double> sig) {
  return Sample{id, IdentityId{DomainId{domain}, label}, std::move(sig), TruthFlag::none};
}

}  // namespace

TEST_CASE("euclidean on hand-checked pairs") {
  CHECK(euclidean(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 5.0);
  const std::vector<double> v{1.5, -2.0, 7.0};
  CHECK(euclidean(v, v) == 0.0);
}

TEST_CASE("euclidean rejects mismatched lengths") {
  try {
    euclidean(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
  }
}

TEST_CASE("euclidean matches a componentwise oracle and the triangle inequality") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(8), b(8), c(8);
    for (int j = 0; j < 8; ++j) {
      a[j] = rng.normal(0, 3);
      b[j] = rng.normal(0, 3);
      c[j] = rng.normal(0, 3);
    }
    CHECK(rel_err(euclidean(a, b), sum_of_squares_distance(a, b)) < 1e-12);
    CHECK(euclidean(a, c) <= euclidean(a, b) + euclidean(b, c) + 1e-12);
  }
}

TEST_CASE("FeatureStore sorts by id and indexes identities") {
  FeatureStore s(2, {make(9, 1, 0, {1, 1}), make(2, 0, 3, {0, 0}), make(5, 0, 3, {2, 2})});
  REQUIRE(s.size() == 3);
  CHECK(s[0].id == 2);
  CHECK(s[2].id == 9);
  CHECK(s.index_of(5) == 1);
  CHECK(s.contains(9));
  CHECK_FALSE(s.contains(4));
  CHECK(s.domains().size() == 2);
  CHECK(s.domain_table().at(DomainId{0}) == 1);
  const auto& idx = s.identity_index().at(IdentityId{DomainId{0}, 3});
  CHECK(idx == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(s.index_of(4), Error);
}

TEST_CASE("FeatureStore rejects duplicate ids and ragged signatures") {
  CHECK_THROWS_AS(FeatureStore(2, {make(1, 0, 0, {1, 1}), make(1, 0, 1, {0, 0})}), Error);
  CHECK_THROWS_AS(FeatureStore(2, {make(1, 0, 0, {1, 1}), make(2, 0, 1, {0})}), Error);
}

TEST_CASE("FeatureStore selections") {
  const FeatureStore s = gaitmix::testing::random_store(3, 3, 4, 3, 5);
  const FeatureStore d1 = s.select_domain(DomainId{1});
  CHECK(d1.size() == 12);
  for (const Sample& x : d1.samples()) CHECK(x.identity.domain == DomainId{1});
  const std::vector<std::uint64_t> drop{s[0].id, s[5].id};
  const FeatureStore w = s.without_ids(drop);
  CHECK(w.size() == s.size() - 2);
  CHECK_FALSE(w.contains(s[0].id));
  CHECK(merge(s.select_domain(DomainId{0}), s.select_domains(std::vector<DomainId>{DomainId{1}, DomainId{2}})) == s);
  CHECK(s.digest() != w.digest());
  CHECK(s.digest() == gaitmix::testing::random_store(3, 3, 4, 3, 5).digest());
}

TEST_CASE("Rng is deterministic and streams are independent") {
  Rng a(42, 0), b(42, 0), c(42, 1);
  std::vector<std::uint64_t> xa, xc;
  for (int i = 0; i < 64; ++i) {
    const auto v = a.next_u64();
    CHECK(v == b.next_u64());
    xa.push_back(v);
    xc.push_back(c.next_u64());
  }
  std::set<std::uint64_t> sa(xa.begin(), xa.end());
  for (auto v : xc) CHECK(sa.count(v) == 0);
  // Advancing one stream never changes another stream's sequence.
  Rng c2(42, 1);
  Rng a2(42, 0);
  for (int i = 0; i < 1000; ++i) a2.next_u64();
  CHECK(c2.next_u64() == xc[0]);
  CHECK(Rng(42).split(7).next_u64() == Rng(42).split(7).next_u64());
}

TEST_CASE("Rng distributions") {
  Rng r(5);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = r.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("format_real round-trips doubles exactly") {
  Rng r(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = r.normal() * std::pow(10.0, static_cast<double>(r.below(40)) - 20.0);
    const std::string s = format_real(v);
    double back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
  CHECK(format_real(0.2) == "0.2");
  CHECK(format_real(-0.0) == "-0");
  CHECK(format_real(1e-310) == "1e-310");
}
