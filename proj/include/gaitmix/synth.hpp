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

#ifndef GAITMIX_SYNTH_HPP_
#define GAITMIX_SYNTH_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "gaitmix/core.hpp"

namespace gaitmix {

/// Generative recipe for one synthetic domain. Identity centers are drawn as
/// Normal(0, identity_spread^2) * scale + shift; samples scatter around their
/// center with intra_std. A dup_fraction of samples become near-copies of a
/// clean same-identity sample, an outlier_fraction are redrawn with
/// outlier_std.
struct DomainRecipe {
  std::size_t n_identities = 20;
  std::size_t samples_per_identity = 8;
  double identity_spread = 1.0;
  double intra_std = 0.1;
  std::vector<double> shift;  // length d_in
  double scale = 1.0;
  double dup_fraction = 0.0;
  double outlier_fraction = 0.0;
  double outlier_std = 1.0;
};

struct GenerateOptions {
  std::uint32_t first_domain = 0;
  std::uint64_t first_sample_id = 0;
};

/// floor(fraction * n), tolerant of representation error in `fraction`
/// (0.29 * 100 counts as 29).
std::size_t fraction_count(double fraction, std::size_t n);

/// Recipe k becomes domain first_domain + k. Deterministic in seed; each
/// domain draws from its own Rng stream.
FeatureStore generate(std::span<const DomainRecipe> recipes, std::uint64_t seed,
                      const GenerateOptions& options = {});

/// Contiguous equal segments [j*d/p, (j+1)*d/p).
std::vector<Segment> part_segments(std::size_t dim, std::size_t p);

/// Copy of `store` carrying part segmentation metadata; p must divide dim.
FeatureStore make_part_labels(const FeatureStore& store, std::size_t p);

}  // namespace gaitmix

#endif  // GAITMIX_SYNTH_HPP_
