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

#include "gaitmix/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace gaitmix {

double triplet_hinge(double d_ap, double d_an, double margin) {
  return std::max(0.0, d_ap - d_an + margin);
}

namespace {

Eigen::MatrixXd pairwise(const Eigen::MatrixXd& e) {
  const Eigen::Index n = e.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (e.row(i) - e.row(j)).norm();
  return d;
}

/// Adds s * d D(e_i, e_j) / d e to grad; zero at coincident points.
void add_distance_grad(Eigen::MatrixXd& grad, const Eigen::MatrixXd& e, const Eigen::MatrixXd& dist,
                       Eigen::Index i, Eigen::Index j, double s) {
  const double d = dist(i, j);
  if (d == 0.0) return;
  const Eigen::RowVectorXd u = (e.row(i) - e.row(j)) / d;
  grad.row(i) += s * u;
  grad.row(j) -= s * u;
}

}  // namespace

TripletResult naive_triplet(const Eigen::MatrixXd& e, std::span<const IdentityId> ids,
                            const TripletConfig& cfg) {
  if (ids.size() != static_cast<std::size_t>(e.rows()))
    fail(ErrorCode::invalid_argument, "triplet: one identity per embedding row required");
  if (!std::isfinite(cfg.margin) || cfg.margin <= 0)
    fail(ErrorCode::invalid_argument, "triplet: margin must be positive and finite");
  const Eigen::Index n = e.rows();
  const Eigen::MatrixXd dist = pairwise(e);
  TripletResult out;
  out.grad = Eigen::MatrixXd::Zero(n, e.cols());
  double sum = 0.0;

  if (cfg.mining == Mining::all_valid) {
    std::vector<std::array<Eigen::Index, 3>> active;
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index p = 0; p < n; ++p) {
        if (p == a || ids[p] != ids[a]) continue;
        for (Eigen::Index q = 0; q < n; ++q) {
          if (ids[q] == ids[a]) continue;
          ++out.n_terms;
          const double h = triplet_hinge(dist(a, p), dist(a, q), cfg.margin);
          sum += h;
          if (h > 0.0) active.push_back({a, p, q});
        }
      }
    if (out.n_terms == 0) {
      out.no_valid = true;
      return out;
    }
    const double s = 1.0 / static_cast<double>(out.n_terms);
    for (const auto& [a, p, q] : active) {
      add_distance_grad(out.grad, e, dist, a, p, s);
      add_distance_grad(out.grad, e, dist, a, q, -s);
    }
  } else {
    struct Term {
      Eigen::Index a, p, q;
    };
    std::vector<Term> active;
    for (Eigen::Index a = 0; a < n; ++a) {
      Eigen::Index hp = -1, hn = -1;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == a) continue;
        if (ids[j] == ids[a]) {
          if (hp < 0 || dist(a, j) > dist(a, hp)) hp = j;
        } else if (hn < 0 || dist(a, j) < dist(a, hn)) {
          hn = j;
        }
      }
      if (hp < 0 || hn < 0) continue;
      ++out.n_terms;
      const double h = triplet_hinge(dist(a, hp), dist(a, hn), cfg.margin);
      sum += h;
      if (h > 0.0) active.push_back({a, hp, hn});
    }
    if (out.n_terms == 0) {
      out.no_valid = true;
      return out;
    }
    const double s = 1.0 / static_cast<double>(out.n_terms);
    for (const Term& t : active) {
      add_distance_grad(out.grad, e, dist, t.a, t.p, s);
      add_distance_grad(out.grad, e, dist, t.a, t.q, -s);
    }
  }
  out.value = sum / static_cast<double>(out.n_terms);
  return out;
}

std::map<DomainId, TripletResult> separate_triplet(const Eigen::MatrixXd& e,
                                                   std::span<const IdentityId> ids,
                                                   const TripletConfig& cfg) {
  if (ids.size() != static_cast<std::size_t>(e.rows()))
    fail(ErrorCode::invalid_argument, "triplet: one identity per embedding row required");
  std::map<DomainId, std::vector<Eigen::Index>> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) rows[ids[i].domain].push_back(static_cast<Eigen::Index>(i));

  std::map<DomainId, TripletResult> out;
  for (const auto& [domain, members] : rows) {
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(members.size()), e.cols());
    std::vector<IdentityId> sub_ids;
    for (std::size_t i = 0; i < members.size(); ++i) {
      sub.row(static_cast<Eigen::Index>(i)) = e.row(members[i]);
      sub_ids.push_back(ids[static_cast<std::size_t>(members[i])]);
    }
    TripletResult part = naive_triplet(sub, sub_ids, cfg);
    TripletResult full;
    full.value = part.value;
    full.n_terms = part.n_terms;
    full.no_valid = part.no_valid;
    full.grad = Eigen::MatrixXd::Zero(e.rows(), e.cols());
    if (!part.no_valid)
      for (std::size_t i = 0; i < members.size(); ++i)
        full.grad.row(members[i]) = part.grad.row(static_cast<Eigen::Index>(i));
    out.emplace(domain, std::move(full));
  }
  return out;
}

CrossEntropyResult cross_entropy(const Eigen::MatrixXd& logits, std::size_t parts,
                                 std::span<const std::size_t> labels) {
  if (parts == 0 || logits.cols() % static_cast<Eigen::Index>(parts) != 0)
    fail(ErrorCode::invalid_argument, "cross_entropy: logit width is not a multiple of parts");
  if (labels.size() != static_cast<std::size_t>(logits.rows()) || labels.empty())
    fail(ErrorCode::invalid_argument, "cross_entropy: one label per row required");
  const Eigen::Index n_cls = logits.cols() / static_cast<Eigen::Index>(parts);
  for (std::size_t y : labels)
    if (y >= static_cast<std::size_t>(n_cls))
      fail(ErrorCode::invalid_argument,
           "cross_entropy: label " + std::to_string(y) + " outside " + std::to_string(n_cls) + " classes");

  const double scale = 1.0 / static_cast<double>(labels.size() * parts);
  CrossEntropyResult out;
  out.grad.resize(logits.rows(), logits.cols());
  double sum = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(parts); ++j) {
      const auto z = logits.row(r).segment(j * n_cls, n_cls);
      const double mx = z.maxCoeff();
      const Eigen::RowVectorXd ex = (z.array() - mx).exp().matrix();
      const double se = ex.sum();
      sum += std::log(se) + mx - z(y);
      auto g = out.grad.row(r).segment(j * n_cls, n_cls);
      g = ex / se;
      g(y) -= 1.0;
      g *= scale;
    }
  }
  out.value = sum * scale;
  return out;
}

LossBreakdown combined_loss(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& logits,
                            std::size_t parts, std::span<const IdentityId> identities,
                            std::span<const std::size_t> labels, const DomainWeights& weights,
                            const TripletConfig& cfg, TripletScope scope) {
  std::set<DomainId> present;
  for (const IdentityId& id : identities) present.insert(id.domain);
  for (DomainId d : present) {
    auto it = weights.find(d);
    if (it == weights.end())
      fail(ErrorCode::invalid_argument, "no triplet weight for domain " + std::to_string(d.value));
    if (!(it->second >= 0) || !std::isfinite(it->second))
      fail(ErrorCode::invalid_argument, "triplet weights must be finite and non-negative");
  }

  LossBreakdown out;
  CrossEntropyResult ce = cross_entropy(logits, parts, labels);
  out.cross_entropy = ce.value;
  out.grad_logits = std::move(ce.grad);
  out.grad_embeddings = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
  double weighted = 0.0;

  if (scope == TripletScope::separate) {
    for (auto& [domain, res] : separate_triplet(embeddings, identities, cfg)) {
      const double w = weights.at(domain);
      out.per_domain_triplet[domain] = res.value;
      if (res.no_valid) out.no_triplet_domains.insert(domain);
      weighted += w * res.value;
      if (w != 0.0) out.grad_embeddings += w * res.grad;
    }
  } else {
    double w = 0.0;
    for (DomainId d : present) w += weights.at(d);
    w /= static_cast<double>(present.size());
    TripletResult res = naive_triplet(embeddings, identities, cfg);
    out.naive_triplet = res.value;
    if (res.no_valid) out.no_triplet_domains = present;
    weighted = w * res.value;
    if (w != 0.0) out.grad_embeddings += w * res.grad;
  }
  out.total = weighted + out.cross_entropy;
  return out;
}

}  // namespace gaitmix
