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

#include <algorithm>
#include <map>

#include "gaitmix/distill.hpp"
#include "gaitmix/losses.hpp"
#include "gaitmix/synth.hpp"
#include "test_util.hpp"

using namespace gaitmix;
using gaitmix::testing::rel_err;

namespace {

Sample at(std::uint64_t id, std::uint32_t label, std::vector<double> sig, std::uint32_t domain = 0) {
  return Sample{id, IdentityId{DomainId{domain}, label}, std::move(sig), TruthFlag::none};
}

const EmbedFn kIdentity = [](const Sample& s) { return s.signature; };

double oracle_mean_negative(const FeatureStore& s, std::size_t i) {
  long double sum = 0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j].identity.domain != s[i].identity.domain || s[j].identity == s[i].identity) continue;
    long double sq = 0;
    for (std::size_t c = 0; c < s.dim(); ++c) {
      const long double d = static_cast<long double>(s[i].signature[c]) - s[j].signature[c];
      sq += d * d;
    }
    sum += std::sqrt(sq);
    ++n;
  }
  return static_cast<double>(sum / static_cast<long double>(n));
}

std::vector<SampleScores> scores_with(const FeatureStore& s, std::vector<double> mean_dist,
                                      std::vector<double> intra, std::vector<bool> failure) {
  std::vector<SampleScores> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    out.push_back({s[i].id, mean_dist[i], intra[i], failure[i]});
  return out;
}

FeatureStore ten_samples() {
  std::vector<Sample> v;
  for (std::uint64_t i = 0; i < 10; ++i) v.push_back(at(i, static_cast<std::uint32_t>(i / 2), {0.0}));
  return FeatureStore(1, std::move(v));
}

}  // namespace

TEST_CASE("mean negative distance on a hand example") {
  const FeatureStore s(2, {at(1, 0, {0, 0}), at(2, 1, {3, 4}), at(3, 2, {6, 8}), at(4, 0, {0, 1}),
                           at(5, 1, {100, 100}, 1)});
  CHECK(mean_negative_distance(s[0], s, kIdentity) == 7.5);
}

TEST_CASE("mean negative distance needs a same-domain negative") {
  const FeatureStore s(1, {at(1, 0, {0}), at(2, 0, {1}), at(3, 1, {5}, 1)});
  try {
    mean_negative_distance(s[0], s, kIdentity);
    FAIL("expected no_negatives");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::no_negatives);
  }
}

TEST_CASE("mean negative distance matches the pairwise oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FeatureStore s = gaitmix::testing::random_store(seed, 2, 5, 3, 4);
    for (std::size_t i = 0; i < s.size(); ++i)
      CHECK(rel_err(mean_negative_distance(s[i], s, kIdentity), oracle_mean_negative(s, i)) < 1e-10);
  }
}

TEST_CASE("identity centroid") {
  const FeatureStore s(2, {at(1, 0, {1, 1}), at(2, 0, {3, 3}), at(3, 1, {7, -2})});
  CHECK(identity_centroid(IdentityId{DomainId{0}, 0}, s, kIdentity) == Embedding{2, 2});
  CHECK(identity_centroid(IdentityId{DomainId{0}, 1}, s, kIdentity) == Embedding{7, -2});
  try {
    identity_centroid(IdentityId{DomainId{0}, 9}, s, kIdentity);
    FAIL("expected not_found");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_found);
  }
  const FeatureStore r = gaitmix::testing::random_store(4, 1, 1, 10, 5);
  const Embedding mu = identity_centroid(r[0].identity, r, kIdentity);
  for (std::size_t c = 0; c < 5; ++c) {
    long double acc = 0;
    for (const Sample& x : r.samples()) acc += x.signature[c];
    CHECK(std::abs(mu[c] - static_cast<double>(acc / 10)) < 1e-12);
  }
}

TEST_CASE("intra-class distance") {
  const FeatureStore s(2, {at(1, 0, {1, 1}), at(2, 0, {3, 3}), at(3, 1, {7, -2})});
  CHECK(intra_distance(s[2], s, kIdentity) == 0.0);
  CHECK(intra_distance(s[0], s, kIdentity) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(intra_distance(s[1], s, kIdentity) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(intra_distance(at(99, 0, {0, 0}), s, kIdentity), Error);
}

TEST_CASE("outliers have larger intra-class distance than clean samples") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DomainRecipe r;
    r.n_identities = 10;
    r.samples_per_identity = 10;
    r.shift.assign(6, 0.0);
    r.outlier_fraction = 0.1;
    const std::vector<DomainRecipe> rs{r};
    const FeatureStore s = generate(rs, seed);
    double out = 0, clean = 0;
    std::size_t n_out = 0, n_clean = 0;
    for (const Sample& x : s.samples()) {
      const double d = intra_distance(x, s, kIdentity);
      if (x.flag == TruthFlag::outlier) {
        out += d;
        ++n_out;
      } else {
        clean += d;
        ++n_clean;
      }
    }
    CHECK(out / static_cast<double>(n_out) > clean / static_cast<double>(n_clean));
  }
}

TEST_CASE("part failure is a disjunction over parts") {
  const IdentityId five{DomainId{0}, 5}, seven{DomainId{0}, 7};
  const std::vector<IdentityId> ok{five, five, five, five}, one_off{five, seven, five, five}, none{seven, seven};
  CHECK_FALSE(part_failure(ok, five));
  CHECK(part_failure(one_off, five));
  CHECK(part_failure(none, five));
  CHECK_THROWS_AS(part_failure(std::vector<IdentityId>{}, five), Error);
}

TEST_CASE("zero removal fraction keeps everything") {
  const FeatureStore s = ten_samples();
  const auto sc = scores_with(s, std::vector<double>(10, 1.0), std::vector<double>(10, 1.0), std::vector<bool>(10, true));
  const DistillReport r = select_removals(s, sc, {DistillMode::noise, 0.0});
  CHECK(r.removed_ids.empty());
  CHECK(r.retained_store_digest == s.digest());
}

TEST_CASE("redundancy mode removes the largest mean distances") {
  const FeatureStore s = ten_samples();
  const auto sc = scores_with(s, {0.1, 0.9, 0.3, 0.4, 0.5, 0.95, 0.2, 0.6, 0.7, 0.8}, std::vector<double>(10, 0.0),
                              std::vector<bool>(10, false));
  const DistillReport r = select_removals(s, sc, {DistillMode::redundancy, 0.2});
  CHECK(r.removed_ids == std::vector<std::uint64_t>{1, 5});
  CHECK(r.shortfall == 0);
}

TEST_CASE("equal scores fall back to ascending ids") {
  std::vector<Sample> v;
  for (std::uint64_t i = 0; i < 20; ++i) v.push_back(at(i, static_cast<std::uint32_t>(i % 4), {0.0}));
  const FeatureStore s(1, std::move(v));
  for (DistillMode mode : {DistillMode::redundancy, DistillMode::noise}) {
    const auto sc = scores_with(s, std::vector<double>(20, 2.0), std::vector<double>(20, 2.0), std::vector<bool>(20, false));
    const DistillReport r = select_removals(s, sc, {mode, 0.3});
    CHECK(r.removed_ids == std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5});
  }
}

TEST_CASE("the last sample of an identity is never removed") {
  std::vector<Sample> v;
  for (std::uint64_t i = 0; i < 10; ++i) v.push_back(at(i, i < 8 ? static_cast<std::uint32_t>(i) : 8u, {0.0}));
  const FeatureStore s(1, std::move(v));
  const auto sc = scores_with(s, {9, 8, 7, 6, 5, 4, 3, 2, 1, 0}, std::vector<double>(10, 0.0), std::vector<bool>(10, false));
  const DistillReport r = select_removals(s, sc, {DistillMode::redundancy, 0.5});
  CHECK(r.removed_ids == std::vector<std::uint64_t>{8});
  CHECK(r.shortfall == 4);
  CHECK(r.notices.size() == 1);
  const FeatureStore kept = s.without_ids(r.removed_ids);
  CHECK(kept.identities().size() == s.identities().size());
}

TEST_CASE("noise mode takes failures first, then large intra distances") {
  const FeatureStore s = ten_samples();
  const auto sc = scores_with(s, std::vector<double>(10, 0.0), {0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1},
                              {false, false, false, true, false, false, false, false, false, false});
  const DistillReport r = select_removals(s, sc, {DistillMode::noise, 0.2});
  CHECK(r.removed_ids == std::vector<std::uint64_t>{0, 3});
  const DistillReport r3 = select_removals(s, sc, {DistillMode::noise, 0.3});
  CHECK(r3.removed_ids == std::vector<std::uint64_t>{0, 3, 6});
}

TEST_CASE("budget is per domain") {
  std::vector<Sample> v;
  for (std::uint64_t i = 0; i < 10; ++i) v.push_back(at(i, static_cast<std::uint32_t>(i / 2), {0.0}, 0));
  for (std::uint64_t i = 10; i < 15; ++i) v.push_back(at(i, static_cast<std::uint32_t>((i - 10) / 2), {0.0}, 1));
  const FeatureStore s(1, std::move(v));
  std::vector<double> md(15);
  for (std::size_t i = 0; i < 15; ++i) md[i] = static_cast<double>(i);
  const auto sc = scores_with(s, md, std::vector<double>(15, 0.0), std::vector<bool>(15, false));
  const DistillReport r = select_removals(s, sc, {DistillMode::redundancy, 0.2});
  // floor(0.2 * 10) = 2 from domain 0, floor(0.2 * 5) = 1 from domain 1;
  // 8 and 14 would orphan their identities.
  CHECK(r.removed_ids == std::vector<std::uint64_t>{7, 9, 13});
}

TEST_CASE("policy validation") {
  CHECK_THROWS_AS((DistillPolicy{DistillMode::noise, 1.0}.validate()), Error);
  CHECK_THROWS_AS((DistillPolicy{DistillMode::noise, -0.1}.validate()), Error);
  CHECK_NOTHROW((DistillPolicy{DistillMode::noise, 0.0}.validate()));
}

TEST_CASE("scores do not depend on store order") {
  const FeatureStore s = gaitmix::testing::random_store(3, 2, 4, 3, 5);
  auto preds_for = [](const FeatureStore& st) {
    std::vector<std::vector<IdentityId>> p;
    for (const Sample& x : st.samples()) p.push_back({x.identity, IdentityId{x.identity.domain, x.identity.label + (x.id % 3 == 0)}});
    return p;
  };
  const auto a = score_samples(s, signature_matrix(s), preds_for(s));
  // Same samples relabelled with new ids in reverse order.
  std::vector<Sample> rev;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Sample x = s[i];
    x.id = 10000 - x.id;
    rev.push_back(x);
  }
  const FeatureStore t(s.dim(), rev);
  std::vector<std::vector<IdentityId>> pt;
  for (const Sample& x : t.samples()) {
    const Sample& orig = s[s.index_of(10000 - x.id)];
    pt.push_back({orig.identity, IdentityId{orig.identity.domain, orig.identity.label + (orig.id % 3 == 0)}});
  }
  const auto b = score_samples(t, signature_matrix(t), pt);
  for (const SampleScores& x : a) {
    const SampleScores& y = b[t.index_of(10000 - x.sample_id)];
    CHECK(*x.mean_dist == doctest::Approx(*y.mean_dist).epsilon(1e-14));
    CHECK(x.intra_dist == doctest::Approx(y.intra_dist).epsilon(1e-14));
    CHECK(x.failure == y.failure);
  }
  // And agree with the per-sample definitions.
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(rel_err(*a[i].mean_dist, mean_negative_distance(s[i], s, kIdentity)) < 1e-12);
    CHECK(std::abs(a[i].intra_dist - intra_distance(s[i], s, kIdentity)) < 1e-12);
  }
}

TEST_CASE("a large mean negative distance does not silence the hardest triplet") {
  // Anchor 1 sits 0.15 from a negative and 10 from another: its mean
  // negative distance clears the margin, its nearest negative does not.
  const FeatureStore s(1, {at(1, 0, {0.0}), at(2, 0, {0.1}), at(3, 1, {0.15}), at(4, 2, {10.0})});
  const double m = 0.2;
  const double far_pos = 0.1;
  CHECK(mean_negative_distance(s[0], s, kIdentity) - far_pos > m);
  CHECK(triplet_hinge(far_pos, 0.15, m) > 0.0);
  // With the nearest negative in its place the implication holds.
  for (double near_neg : {0.31, 0.5, 3.0})
    if (near_neg - far_pos > m) CHECK(triplet_hinge(far_pos, near_neg, m) == 0.0);
}
