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

#include "gaitmix/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gaitmix {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::invalid_argument, "cosine: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::undefined_similarity, "cosine of a zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

AffinityMatrix from_centroids(AffinityLevel level, const std::vector<DomainId>& domains,
                              const std::vector<Eigen::VectorXd>& centroids) {
  const auto n = static_cast<Eigen::Index>(domains.size());
  AffinityMatrix m;
  m.level = level;
  m.domains = domains;
  m.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ci = centroids[static_cast<std::size_t>(i)];
    if (ci.norm() == 0.0)
      fail(ErrorCode::undefined_similarity,
           "domain " + std::to_string(domains[static_cast<std::size_t>(i)].value) + " has a zero-norm mean");
    m.values(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& cj = centroids[static_cast<std::size_t>(j)];
      const double c = cosine_similarity({ci.data(), static_cast<std::size_t>(ci.size())},
                                         {cj.data(), static_cast<std::size_t>(cj.size())});
      m.values(i, j) = m.values(j, i) = c;
    }
  }
  return m;
}

std::vector<Eigen::VectorXd> domain_means(const FeatureStore& store, const Eigen::MatrixXd& rows) {
  std::vector<Eigen::VectorXd> out;
  for (DomainId d : store.domains()) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(rows.cols());
    std::size_t n = 0;
    for (std::size_t i = 0; i < store.size(); ++i)
      if (store[i].identity.domain == d) {
        acc += rows.row(static_cast<Eigen::Index>(i)).transpose();
        ++n;
      }
    out.push_back(acc / static_cast<double>(n));
  }
  return out;
}

}  // namespace

AffinityMatrix low_level_affinity(const FeatureStore& store) {
  if (store.empty()) fail(ErrorCode::invalid_argument, "affinity: empty store");
  return from_centroids(AffinityLevel::low, store.domains(),
                        domain_means(store, signature_matrix(store)));
}

AffinityMatrix high_level_affinity(const FeatureStore& store, const ModelState& model) {
  if (store.empty()) fail(ErrorCode::invalid_argument, "affinity: empty store");
  if (store.dim() != model.hyper.d_in)
    fail(ErrorCode::invalid_argument, "affinity: model input width does not match the store");
  return from_centroids(AffinityLevel::high, store.domains(),
                        domain_means(store, embed(model, store, InferenceNorm::average())));
}

double affinity_accuracy_correlation(const AffinityMatrix& affinity, const Eigen::MatrixXd& cross) {
  const Eigen::Index n = affinity.values.rows();
  if (affinity.values.cols() != n || cross.rows() != n || cross.cols() != n)
    fail(ErrorCode::invalid_argument, "correlation: affinity and rank-1 matrices differ in shape");
  std::vector<double> x, y;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) {
        x.push_back(affinity.values(i, j));
        y.push_back(cross(i, j));
      }
  if (x.size() < 3) fail(ErrorCode::insufficient_data, "correlation needs at least 3 domain pairs");
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    fail(ErrorCode::insufficient_data, "correlation undefined: one side has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace gaitmix
