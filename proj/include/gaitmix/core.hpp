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

#ifndef GAITMIX_CORE_HPP_
#define GAITMIX_CORE_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gaitmix {

/// Error categories surfaced by every module and mapped 1:1 onto C API codes.
enum class ErrorCode {
  invalid_argument = 1,
  not_found,
  no_negatives,
  degenerate_batch,
  invalid_state,
  insufficient_data,
  undefined_similarity,
  divergence,
  io,
  format,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

struct DomainId {
  std::uint32_t value = 0;
  friend auto operator<=>(const DomainId&, const DomainId&) = default;
};

/// Identity labels are namespaced by domain: equal labels in different
/// domains are different people.
struct IdentityId {
  DomainId domain;
  std::uint32_t label = 0;
  friend auto operator<=>(const IdentityId&, const IdentityId&) = default;
};

/// Ground truth attached by the synthetic generator; always `none` for
/// ingested data.
enum class TruthFlag { none, duplicate, outlier };

struct Sample {
  std::uint64_t id = 0;
  IdentityId identity;
  std::vector<double> signature;
  TruthFlag flag = TruthFlag::none;
};

/// Half-open segment [begin, end) of a signature or embedding.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Indexed, immutable collection of samples of one dimensionality.
/// Samples are kept in ascending id order.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(std::size_t dim, std::vector<Sample> samples);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  /// Position of a sample id, or throws not_found.
  std::size_t index_of(std::uint64_t id) const;
  bool contains(std::uint64_t id) const;

  /// Domains present, ascending.
  std::vector<DomainId> domains() const;
  /// Number of distinct identities per domain.
  const std::map<DomainId, std::size_t>& domain_table() const noexcept { return domain_table_; }
  /// Sample positions per identity, ascending by id.
  const std::map<IdentityId, std::vector<std::size_t>>& identity_index() const noexcept {
    return identity_index_;
  }
  std::vector<IdentityId> identities() const;

  /// Part segmentation metadata; empty until make_part_labels is applied.
  const std::vector<Segment>& parts() const noexcept { return parts_; }
  void set_parts(std::vector<Segment> parts);

  FeatureStore select_domain(DomainId domain) const;
  FeatureStore select_domains(std::span<const DomainId> domains) const;
  FeatureStore without_ids(std::span<const std::uint64_t> ids) const;
  FeatureStore subset(std::span<const std::size_t> positions) const;

  /// FNV-1a over the canonical text form of every sample.
  std::uint64_t digest() const;

  friend bool operator==(const FeatureStore& a, const FeatureStore& b);

 private:
  std::size_t dim_ = 0;
  std::vector<Sample> samples_;
  std::map<DomainId, std::size_t> domain_table_;
  std::map<IdentityId, std::vector<std::size_t>> identity_index_;
  std::vector<Segment> parts_;
};

/// Merges stores with disjoint sample ids.
FeatureStore merge(const FeatureStore& a, const FeatureStore& b);

using Embedding = std::vector<double>;

/// Euclidean distance; throws invalid_argument on length mismatch.
double euclidean(std::span<const double> a, std::span<const double> b);

/// xoshiro256** seeded through SplitMix64. A (seed, stream) pair selects an
/// independent sequence; all draws are integer-exact so sequences match
/// bit-for-bit on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n > 0. Unbiased (rejection).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller, cached pair.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Derives an independent generator for a child stream.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// In-place Fisher-Yates shuffle driven by Rng.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

/// 64-bit FNV-1a, used for config and store digests.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Shortest text form that reads back to the same double.
std::string format_real(double v);

}  // namespace gaitmix

#endif  // GAITMIX_CORE_HPP_
