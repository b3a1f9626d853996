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

#include "gaitmix/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

namespace gaitmix {

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

FeatureStore::FeatureStore(std::size_t dim, std::vector<Sample> samples)
    : dim_(dim), samples_(std::move(samples)) {
  if (dim_ == 0) fail(ErrorCode::invalid_argument, "feature store dimension must be positive");
  std::sort(samples_.begin(), samples_.end(),
            [](const Sample& a, const Sample& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (i > 0 && samples_[i - 1].id == s.id)
      fail(ErrorCode::invalid_argument, "duplicate sample id " + std::to_string(s.id));
    if (s.signature.size() != dim_)
      fail(ErrorCode::invalid_argument,
           "sample " + std::to_string(s.id) + " has signature length " +
               std::to_string(s.signature.size()) + ", expected " + std::to_string(dim_));
    identity_index_[s.identity].push_back(i);
  }
  for (const auto& [identity, _] : identity_index_) ++domain_table_[identity.domain];
}

std::size_t FeatureStore::index_of(std::uint64_t id) const {
  auto it = std::lower_bound(samples_.begin(), samples_.end(), id,
                             [](const Sample& s, std::uint64_t v) { return s.id < v; });
  if (it == samples_.end() || it->id != id)
    fail(ErrorCode::not_found, "sample id " + std::to_string(id) + " not in store");
  return static_cast<std::size_t>(it - samples_.begin());
}

bool FeatureStore::contains(std::uint64_t id) const {
  auto it = std::lower_bound(samples_.begin(), samples_.end(), id,
                             [](const Sample& s, std::uint64_t v) { return s.id < v; });
  return it != samples_.end() && it->id == id;
}

std::vector<DomainId> FeatureStore::domains() const {
  std::vector<DomainId> out;
  for (const auto& [d, _] : domain_table_) out.push_back(d);
  return out;
}

std::vector<IdentityId> FeatureStore::identities() const {
  std::vector<IdentityId> out;
  out.reserve(identity_index_.size());
  for (const auto& [id, _] : identity_index_) out.push_back(id);
  return out;
}

void FeatureStore::set_parts(std::vector<Segment> parts) {
  std::size_t cursor = 0;
  for (const Segment& s : parts) {
    if (s.begin != cursor || s.end <= s.begin)
      fail(ErrorCode::invalid_argument, "part segments must tile the signature");
    cursor = s.end;
  }
  if (!parts.empty() && cursor != dim_)
    fail(ErrorCode::invalid_argument, "part segments must cover the full signature");
  parts_ = std::move(parts);
}

FeatureStore FeatureStore::select_domain(DomainId domain) const {
  DomainId one[] = {domain};
  return select_domains(one);
}

FeatureStore FeatureStore::select_domains(std::span<const DomainId> domains) const {
  std::vector<Sample> kept;
  for (const Sample& s : samples_)
    if (std::find(domains.begin(), domains.end(), s.identity.domain) != domains.end())
      kept.push_back(s);
  FeatureStore out(dim_, std::move(kept));
  out.parts_ = parts_;
  return out;
}

FeatureStore FeatureStore::without_ids(std::span<const std::uint64_t> ids) const {
  std::set<std::uint64_t> drop(ids.begin(), ids.end());
  std::vector<Sample> kept;
  for (const Sample& s : samples_)
    if (!drop.count(s.id)) kept.push_back(s);
  FeatureStore out(dim_, std::move(kept));
  out.parts_ = parts_;
  return out;
}

FeatureStore FeatureStore::subset(std::span<const std::size_t> positions) const {
  std::vector<Sample> kept;
  kept.reserve(positions.size());
  for (std::size_t p : positions) kept.push_back(samples_.at(p));
  FeatureStore out(dim_, std::move(kept));
  out.parts_ = parts_;
  return out;
}

std::uint64_t FeatureStore::digest() const {
  std::uint64_t h = fnv1a("gaitmix-store");
  h = fnv1a(std::to_string(dim_), h);
  for (const Sample& s : samples_) {
    std::string row = std::to_string(s.id) + ',' + std::to_string(s.identity.label) + ',' +
                      std::to_string(s.identity.domain.value) + ',' +
                      std::to_string(static_cast<int>(s.flag));
    for (double v : s.signature) row += ',' + format_real(v);
    h = fnv1a(row, h);
  }
  return h;
}

bool operator==(const FeatureStore& a, const FeatureStore& b) {
  if (a.dim_ != b.dim_ || a.samples_.size() != b.samples_.size()) return false;
  for (std::size_t i = 0; i < a.samples_.size(); ++i) {
    const Sample& x = a.samples_[i];
    const Sample& y = b.samples_[i];
    if (x.id != y.id || x.identity != y.identity || x.flag != y.flag ||
        x.signature != y.signature)
      return false;
  }
  return a.parts_ == b.parts_;
}

FeatureStore merge(const FeatureStore& a, const FeatureStore& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim() != b.dim()) fail(ErrorCode::invalid_argument, "cannot merge stores of different dim");
  std::vector<Sample> all = a.samples();
  all.insert(all.end(), b.samples().begin(), b.samples().end());
  return FeatureStore(a.dim(), std::move(all));
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorCode::invalid_argument, "euclidean: dimension mismatch (" +
                                          std::to_string(a.size()) + " vs " +
                                          std::to_string(b.size()) + ")");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  std::uint64_t mix = seed;
  std::uint64_t salt = splitmix64(mix) ^ (stream * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL);
  std::uint64_t x = salt;
  for (auto& word : s_) word = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) fail(ErrorCode::invalid_argument, "Rng::below(0)");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Rng Rng::split(std::uint64_t stream) const {
  std::uint64_t x = seed_ ^ rotl(stream_ + 1, 32);
  return Rng(splitmix64(x), stream);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace gaitmix
