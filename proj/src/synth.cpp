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

#include "gaitmix/synth.hpp"

#include <cmath>
#include <string>

namespace gaitmix {
namespace {

void validate(const DomainRecipe& r, std::size_t dim, std::size_t k) {
  const std::string where = "recipe " + std::to_string(k) + ": ";
  if (r.shift.size() != dim)
    fail(ErrorCode::invalid_argument, where + "shift length " + std::to_string(r.shift.size()) +
                                          " != d_in " + std::to_string(dim));
  if (r.n_identities == 0 || r.samples_per_identity == 0)
    fail(ErrorCode::invalid_argument, where + "identity and sample counts must be positive");
  if (!(r.identity_spread > 0) || !(r.intra_std > 0) || !(r.scale > 0) || !(r.outlier_std > 0))
    fail(ErrorCode::invalid_argument, where + "spreads, scale and outlier_std must be positive");
  if (r.dup_fraction < 0 || r.dup_fraction > 1 || r.outlier_fraction < 0 ||
      r.outlier_fraction > 1 || r.dup_fraction + r.outlier_fraction > 0.5)
    fail(ErrorCode::invalid_argument,
         where + "dup_fraction and outlier_fraction must be in [0,1] with sum <= 0.5");
}

}  // namespace

std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

FeatureStore generate(std::span<const DomainRecipe> recipes, std::uint64_t seed,
                      const GenerateOptions& options) {
  if (recipes.empty()) fail(ErrorCode::invalid_argument, "generate: need at least one recipe");
  const std::size_t dim = recipes.front().shift.size();
  if (dim == 0) fail(ErrorCode::invalid_argument, "generate: d_in must be positive");
  for (std::size_t k = 0; k < recipes.size(); ++k) validate(recipes[k], dim, k);

  const Rng root(seed);
  std::vector<Sample> samples;
  std::uint64_t next_id = options.first_sample_id;

  for (std::size_t k = 0; k < recipes.size(); ++k) {
    const DomainRecipe& r = recipes[k];
    const DomainId domain{options.first_domain + static_cast<std::uint32_t>(k)};
    Rng rng = root.split(domain.value);
    const std::size_t n_id = r.n_identities;
    const std::size_t per = r.samples_per_identity;
    const std::size_t n = n_id * per;

    std::vector<std::vector<double>> centers(n_id, std::vector<double>(dim));
    for (auto& c : centers)
      for (std::size_t j = 0; j < dim; ++j)
        c[j] = rng.normal(0.0, r.identity_spread) * r.scale + r.shift[j];

    std::vector<std::vector<double>> sig(n, std::vector<double>(dim));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dim; ++j) sig[i][j] = centers[i / per][j] + rng.normal(0.0, r.intra_std);

    // The first slot of every identity stays clean so no identity is left
    // without an unflagged sample.
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i)
      if (i % per != 0) candidates.push_back(i);
    const std::size_t n_dup = fraction_count(r.dup_fraction, n);
    const std::size_t n_out = fraction_count(r.outlier_fraction, n);
    if (n_dup + n_out > candidates.size())
      fail(ErrorCode::invalid_argument,
           "recipe " + std::to_string(k) + ": too few samples per identity for the requested "
                                           "duplicate/outlier fractions");
    shuffle(candidates, rng);

    std::vector<TruthFlag> flags(n, TruthFlag::none);
    for (std::size_t t = 0; t < n_dup; ++t) flags[candidates[t]] = TruthFlag::duplicate;
    for (std::size_t t = n_dup; t < n_dup + n_out; ++t) flags[candidates[t]] = TruthFlag::outlier;

    for (std::size_t i = 0; i < n; ++i) {
      if (flags[i] != TruthFlag::duplicate) continue;
      const std::size_t base = (i / per) * per;
      std::vector<std::size_t> clean;
      for (std::size_t s = base; s < base + per; ++s)
        if (flags[s] == TruthFlag::none) clean.push_back(s);
      const std::size_t src = clean[rng.below(clean.size())];
      for (std::size_t j = 0; j < dim; ++j)
        sig[i][j] = sig[src][j] + rng.normal(0.0, r.intra_std / 100.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (flags[i] != TruthFlag::outlier) continue;
      for (std::size_t j = 0; j < dim; ++j)
        sig[i][j] = centers[i / per][j] + rng.normal(0.0, r.outlier_std);
    }

    for (std::size_t i = 0; i < n; ++i) {
      Sample s;
      s.id = next_id++;
      s.identity = IdentityId{domain, static_cast<std::uint32_t>(i / per)};
      s.signature = std::move(sig[i]);
      s.flag = flags[i];
      samples.push_back(std::move(s));
    }
  }
  return FeatureStore(dim, std::move(samples));
}

std::vector<Segment> part_segments(std::size_t dim, std::size_t p) {
  if (p == 0 || dim % p != 0)
    fail(ErrorCode::invalid_argument,
         "part count " + std::to_string(p) + " does not divide dimension " + std::to_string(dim));
  std::vector<Segment> out;
  const std::size_t w = dim / p;
  for (std::size_t j = 0; j < p; ++j) out.push_back({j * w, (j + 1) * w});
  return out;
}

FeatureStore make_part_labels(const FeatureStore& store, std::size_t p) {
  FeatureStore out = store;
  out.set_parts(part_segments(store.dim(), p));
  return out;
}

}  // namespace gaitmix
