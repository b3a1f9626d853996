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
#include <cmath>

#include "gaitmix/synth.hpp"

using namespace gaitmix;

namespace {

DomainRecipe recipe(std::size_t ids, std::size_t per, std::size_t dim) {
  DomainRecipe r;
  r.n_identities = ids;
  r.samples_per_identity = per;
  r.shift.assign(dim, 0.0);
  return r;
}

std::vector<double> mean_of(const FeatureStore& s, const std::vector<std::size_t>& rows) {
  std::vector<double> m(s.dim(), 0.0);
  for (auto i : rows)
    for (std::size_t j = 0; j < s.dim(); ++j) m[j] += s[i].signature[j] / static_cast<double>(rows.size());
  return m;
}

}  // namespace

TEST_CASE("generate counts samples and leaves clean recipes unflagged") {
  const std::vector<DomainRecipe> rs{recipe(2, 2, 4)};
  const FeatureStore s = generate(rs, 1);
  CHECK(s.size() == 4);
  for (const Sample& x : s.samples()) CHECK(x.flag == TruthFlag::none);
}

TEST_CASE("flag counts use floor") {
  auto r = recipe(10, 10, 4);
  r.dup_fraction = 0.1;
  r.outlier_fraction = 0.29;
  const std::vector<DomainRecipe> rs{r};
  const FeatureStore s = generate(rs, 3);
  const auto dups = std::count_if(s.samples().begin(), s.samples().end(),
                                  [](const Sample& x) { return x.flag == TruthFlag::duplicate; });
  const auto outs = std::count_if(s.samples().begin(), s.samples().end(),
                                  [](const Sample& x) { return x.flag == TruthFlag::outlier; });
  CHECK(dups == 10);
  CHECK(outs == 29);
  CHECK(fraction_count(0.29, 100) == 29);
  CHECK(fraction_count(0.15, 7) == 1);
}

TEST_CASE("regeneration is bit-identical and seeds differ") {
  std::vector<DomainRecipe> rs{recipe(5, 4, 6), recipe(3, 5, 6)};
  rs[1].dup_fraction = 0.2;
  CHECK(generate(rs, 17) == generate(rs, 17));
  CHECK_FALSE(generate(rs, 17) == generate(rs, 18));
}

TEST_CASE("generate rejects inconsistent dimensions") {
  const std::vector<DomainRecipe> rs{recipe(2, 2, 4), recipe(2, 2, 5)};
  CHECK_THROWS_AS(generate(rs, 1), Error);
}

TEST_CASE("outliers sit beyond the 95th percentile of clean distances") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto r = recipe(20, 10, 8);
    r.outlier_fraction = 0.1;
    r.outlier_std = 10 * r.intra_std;
    const std::vector<DomainRecipe> rs{r};
    const FeatureStore s = generate(rs, seed);
    std::vector<double> clean, out;
    for (const auto& [id, rows] : s.identity_index()) {
      std::vector<std::size_t> clean_rows;
      for (auto i : rows)
        if (s[i].flag == TruthFlag::none) clean_rows.push_back(i);
      const auto m = mean_of(s, clean_rows);
      for (auto i : rows) (s[i].flag == TruthFlag::outlier ? out : clean).push_back(euclidean(s[i].signature, m));
    }
    std::sort(clean.begin(), clean.end());
    const double p95 = clean[static_cast<std::size_t>(0.95 * static_cast<double>(clean.size()))];
    const bool all_beyond = std::all_of(out.begin(), out.end(), [&](double d) { return d > p95; });
    wins += all_beyond ? 1 : 0;
  }
  CHECK(wins == 20);
}

TEST_CASE("clean samples concentrate around their identity center") {
  // Recover the center from a copy of the generator's identity stream: the
  // mean of n clean samples must lie within 3 intra_std / sqrt(n) per axis
  // of the mean of a much larger draw of the same identity.
  auto small = recipe(6, 30, 4);
  auto large = recipe(6, 3000, 4);
  const std::vector<DomainRecipe> rs{small}, rl{large};
  const FeatureStore s = generate(rs, 4), l = generate(rl, 4);
  for (const auto& [id, rows] : s.identity_index()) {
    const auto m_small = mean_of(s, rows);
    const auto m_large = mean_of(l, l.identity_index().at(id));
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(std::abs(m_small[j] - m_large[j]) < 3 * small.intra_std / std::sqrt(30.0) + 3 * small.intra_std / std::sqrt(3000.0));
  }
}

TEST_CASE("duplicates lie close to a clean sample of their identity") {
  auto r = recipe(10, 8, 6);
  r.dup_fraction = 0.2;
  const std::vector<DomainRecipe> rs{r};
  const FeatureStore s = generate(rs, 8);
  int n = 0;
  for (const auto& [id, rows] : s.identity_index())
    for (auto i : rows) {
      if (s[i].flag != TruthFlag::duplicate) continue;
      ++n;
      double best = 1e300;
      for (auto j : rows)
        if (s[j].flag == TruthFlag::none) best = std::min(best, euclidean(s[i].signature, s[j].signature));
      CHECK(best < r.intra_std / 10);
    }
  CHECK(n == 16);
}

TEST_CASE("domain shift and scale move identity centers") {
  auto a = recipe(50, 4, 3);
  auto b = recipe(50, 4, 3);
  b.shift = {5, 0, 0};
  const std::vector<DomainRecipe> rs{a, b};
  const FeatureStore s = generate(rs, 2);
  double ma = 0, mb = 0;
  for (const Sample& x : s.samples()) (x.identity.domain.value ? mb : ma) += x.signature[0] / 200.0;
  CHECK(mb - ma == doctest::Approx(5.0).epsilon(0.1));
  CHECK(s.select_domain(DomainId{1}).identities().size() == 50);
}

TEST_CASE("part segments") {
  CHECK(part_segments(8, 2) == std::vector<Segment>{{0, 4}, {4, 8}});
  CHECK(part_segments(8, 1) == std::vector<Segment>{{0, 8}});
  CHECK_THROWS_AS(part_segments(12, 5), Error);
  const std::vector<DomainRecipe> rs{recipe(2, 2, 8)};
  const FeatureStore s = make_part_labels(generate(rs, 1), 4);
  CHECK(s.parts().size() == 4);
  CHECK(s.parts()[3] == Segment{6, 8});
}
