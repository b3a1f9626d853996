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

#include "gaitmix/distill.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gaitmix/synth.hpp"

namespace gaitmix {

double mean_negative_distance(const Sample& anchor, const FeatureStore& store, const EmbedFn& embed) {
  const Embedding fa = embed(anchor);
  double sum = 0.0;
  std::size_t count = 0;
  for (const Sample& s : store.samples()) {
    if (s.identity.domain != anchor.identity.domain || s.identity == anchor.identity) continue;
    sum += euclidean(fa, embed(s));
    ++count;
  }
  if (count == 0)
    fail(ErrorCode::no_negatives, "sample " + std::to_string(anchor.id) +
                                      " has no same-domain negatives");
  return sum / static_cast<double>(count);
}

Embedding identity_centroid(IdentityId identity, const FeatureStore& store, const EmbedFn& embed) {
  auto it = store.identity_index().find(identity);
  if (it == store.identity_index().end())
    fail(ErrorCode::not_found, "identity " + std::to_string(identity.label) + " of domain " +
                                   std::to_string(identity.domain.value) + " not in store");
  Embedding mu;
  for (std::size_t pos : it->second) {
    const Embedding f = embed(store[pos]);
    if (mu.empty()) mu.assign(f.size(), 0.0);
    if (f.size() != mu.size()) fail(ErrorCode::invalid_argument, "inconsistent embedding length");
    for (std::size_t j = 0; j < f.size(); ++j) mu[j] += f[j];
  }
  for (double& v : mu) v /= static_cast<double>(it->second.size());
  return mu;
}

double intra_distance(const Sample& sample, const FeatureStore& store, const EmbedFn& embed) {
  if (!store.contains(sample.id))
    fail(ErrorCode::not_found, "sample " + std::to_string(sample.id) + " not in store");
  return euclidean(embed(sample), identity_centroid(sample.identity, store, embed));
}

bool part_failure(std::span<const IdentityId> predictions, IdentityId label) {
  if (predictions.empty()) fail(ErrorCode::invalid_argument, "part_failure: no part predictions");
  return std::any_of(predictions.begin(), predictions.end(),
                     [&](const IdentityId& p) { return p != label; });
}

void DistillPolicy::validate() const {
  if (!(removal_fraction >= 0.0 && removal_fraction < 1.0))
    fail(ErrorCode::invalid_argument, "removal fraction must be in [0, 1)");
}

std::vector<SampleScores> score_samples(const FeatureStore& store, const Eigen::MatrixXd& emb,
                                        const std::vector<std::vector<IdentityId>>& part_preds) {
  if (static_cast<std::size_t>(emb.rows()) != store.size() || part_preds.size() != store.size())
    fail(ErrorCode::invalid_argument, "score_samples: one embedding and prediction row per sample");
  const std::size_t n = store.size();
  std::vector<Embedding> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i].resize(static_cast<std::size_t>(emb.cols()));
    for (Eigen::Index j = 0; j < emb.cols(); ++j)
      f[i][static_cast<std::size_t>(j)] = emb(static_cast<Eigen::Index>(i), j);
  }

  std::map<IdentityId, Embedding> centroids;
  for (const auto& [identity, rows] : store.identity_index()) {
    Embedding mu(static_cast<std::size_t>(emb.cols()), 0.0);
    for (std::size_t r : rows)
      for (std::size_t j = 0; j < mu.size(); ++j) mu[j] += f[r][j];
    for (double& v : mu) v /= static_cast<double>(rows.size());
    centroids.emplace(identity, std::move(mu));
  }

  std::vector<SampleScores> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = store[i];
    SampleScores& sc = out[i];
    sc.sample_id = s.id;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const Sample& t = store[j];
      if (t.identity.domain != s.identity.domain || t.identity == s.identity) continue;
      sum += euclidean(f[i], f[j]);
      ++count;
    }
    if (count > 0) sc.mean_dist = sum / static_cast<double>(count);
    sc.intra_dist = euclidean(f[i], centroids.at(s.identity));
    sc.failure = part_failure(part_preds[i], s.identity);
  }
  return out;
}

std::vector<SampleScores> score_samples(const FeatureStore& store, const ModelState& model) {
  if (model.training) fail(ErrorCode::invalid_state, "scoring requires a model in inference mode");
  const auto domains = sample_domains(store);
  const ForwardResult fr = forward(model, signature_matrix(store), domains);
  const auto preds = part_predictions(fr.logits, model.hyper.parts, model.n_classes());
  std::vector<std::vector<IdentityId>> ids(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t c : preds[i]) ids[i].push_back(model.classes.identity_of(c));
  // Labels must live in the model's class space.
  for (const Sample& s : store.samples()) (void)model.classes.class_of(s.identity);
  return score_samples(store, fr.embeddings, ids);
}

DistillReport select_removals(const FeatureStore& store, std::vector<SampleScores> scores,
                              const DistillPolicy& policy) {
  policy.validate();
  if (scores.size() != store.size())
    fail(ErrorCode::invalid_argument, "select_removals: one score per sample required");
  std::sort(scores.begin(), scores.end(),
            [](const SampleScores& a, const SampleScores& b) { return a.sample_id < b.sample_id; });
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i].sample_id != store[i].id)
      fail(ErrorCode::invalid_argument, "select_removals: scores do not match store ids");

  DistillReport report;
  report.policy = policy;
  std::set<std::uint64_t> removed;

  for (DomainId domain : store.domains()) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < store.size(); ++i)
      if (store[i].identity.domain == domain) members.push_back(i);
    const std::size_t budget = fraction_count(policy.removal_fraction, members.size());
    if (budget == 0) continue;

    std::map<IdentityId, std::size_t> remaining;
    for (std::size_t i : members) ++remaining[store[i].identity];
    std::size_t spent = 0;
    auto try_remove = [&](std::size_t i) {
      if (spent == budget || removed.count(store[i].id)) return;
      std::size_t& left = remaining[store[i].identity];
      if (left <= 1) return;
      --left;
      removed.insert(store[i].id);
      ++spent;
    };

    auto by_score_desc = [&](auto key) {
      std::vector<std::size_t> order;
      for (std::size_t i : members)
        if (key(scores[i])) order.push_back(i);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return *key(scores[a]) > *key(scores[b]);
      });
      return order;
    };

    if (policy.mode == DistillMode::redundancy) {
      auto order = by_score_desc([](const SampleScores& s) { return s.mean_dist; });
      for (std::size_t i : order) try_remove(i);
    } else {
      for (std::size_t i : members)
        if (scores[i].failure) try_remove(i);
      auto order = by_score_desc(
          [](const SampleScores& s) { return std::optional<double>(s.intra_dist); });
      for (std::size_t i : order) try_remove(i);
    }

    if (spent < budget) {
      report.shortfall += budget - spent;
      report.notices.push_back("domain " + std::to_string(domain.value) + ": removed " +
                               std::to_string(spent) + " of budget " + std::to_string(budget) +
                               " (last-sample guard or undefined scores)");
    }
  }

  report.scores = std::move(scores);
  report.removed_ids.assign(removed.begin(), removed.end());
  report.retained_store_digest = store.without_ids(report.removed_ids).digest();
  return report;
}

DistillReport distill(const FeatureStore& store, const ModelState& model, const DistillPolicy& policy) {
  policy.validate();
  return select_removals(store, score_samples(store, model), policy);
}

DistillReport distill(const FeatureStore& store, const std::map<DomainId, ModelState>& models,
                      const DistillPolicy& policy) {
  policy.validate();
  std::vector<SampleScores> all;
  for (DomainId domain : store.domains()) {
    auto it = models.find(domain);
    if (it == models.end())
      fail(ErrorCode::invalid_argument, "no pretrained model for domain " + std::to_string(domain.value));
    auto part = score_samples(store.select_domain(domain), it->second);
    all.insert(all.end(), part.begin(), part.end());
  }
  return select_removals(store, std::move(all), policy);
}

}  // namespace gaitmix
