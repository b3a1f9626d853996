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

#include "gaitmix/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "gaitmix/synth.hpp"

namespace gaitmix {

std::string TrainConfig::describe() const {
  std::ostringstream os;
  os << "model.hidden=" << hyper.hidden << '\n'
     << "model.d_emb=" << hyper.d_emb << '\n'
     << "model.parts=" << hyper.parts << '\n'
     << "model.eps=" << format_real(hyper.eps) << '\n'
     << "model.bn_momentum=" << format_real(hyper.bn_momentum) << '\n'
     << "model.norm=" << (hyper.norm == NormMode::dsbn ? "dsbn" : "single") << '\n';
  for (const DomainDraw& d : batch.draws)
    os << "batch.d" << d.domain.value << '=' << d.identities << 'x' << d.samples_per_identity << '\n';
  os << "triplet.margin=" << format_real(triplet.margin) << '\n'
     << "triplet.mining=" << (triplet.mining == Mining::batch_hard ? "batch_hard" : "all_valid") << '\n'
     << "triplet.scope=" << (scope == TripletScope::separate ? "separate" : "naive") << '\n';
  for (const auto& [d, w] : weights) os << "weight.d" << d.value << '=' << format_real(w) << '\n';
  os << "lr.initial=" << format_real(schedule.initial) << '\n' << "lr.decay_steps=";
  for (std::size_t i = 0; i < schedule.decay_steps.size(); ++i)
    os << (i ? "," : "") << schedule.decay_steps[i];
  os << '\n'
     << "lr.decay_factor=" << format_real(schedule.decay_factor) << '\n'
     << "lr.total_steps=" << schedule.total_steps << '\n'
     << "sgd.momentum=" << format_real(momentum) << '\n'
     << "sgd.weight_decay=" << format_real(weight_decay) << '\n'
     << "seed=" << seed << '\n'
     << "eval_every=" << eval_every << '\n';
  return os.str();
}

std::uint64_t TrainConfig::digest() const { return fnv1a(describe()); }

void EvalProtocol::validate() const {
  if (gallery.empty() || probe.empty())
    fail(ErrorCode::invalid_argument, "protocol '" + name + "': gallery and probe must be non-empty");
  for (const Sample& s : probe.samples()) {
    if (!gallery.identity_index().count(s.identity))
      fail(ErrorCode::invalid_argument, "protocol '" + name + "': probe identity missing from gallery");
    if (gallery.contains(s.id))
      fail(ErrorCode::invalid_argument, "protocol '" + name + "': probe and gallery share sample ids");
  }
}

std::pair<FeatureStore, FeatureStore> split_gallery_probe(const FeatureStore& store,
                                                          std::size_t n_gallery) {
  if (n_gallery == 0) fail(ErrorCode::invalid_argument, "gallery needs at least one sample per identity");
  std::vector<std::size_t> g, p;
  for (const auto& [identity, rows] : store.identity_index())
    for (std::size_t i = 0; i < rows.size(); ++i) (i < n_gallery ? g : p).push_back(rows[i]);
  std::sort(g.begin(), g.end());
  std::sort(p.begin(), p.end());
  return {store.subset(g), store.subset(p)};
}

std::vector<EvalProtocol> make_protocols(NormMode norm, const FeatureStore& self_test,
                                         const FeatureStore& cross_test, std::size_t n_gallery) {
  std::vector<EvalProtocol> out;
  auto add = [&](const FeatureStore& store, const std::string& scope, DomainId d, InferenceNorm how,
                 const char* how_name) {
    auto [gallery, probe] = split_gallery_probe(store.select_domain(d), n_gallery);
    if (gallery.empty() || probe.empty()) return;
    out.push_back({scope + ":d" + std::to_string(d.value) + ":" + how_name, std::move(gallery),
                   std::move(probe), how});
  };
  if (!self_test.empty())
    for (DomainId d : self_test.domains()) {
      add(self_test, "self", d, InferenceNorm::own_domain(), "branch");
      if (norm == NormMode::dsbn) add(self_test, "self", d, InferenceNorm::average(), "average");
    }
  if (!cross_test.empty())
    for (DomainId d : cross_test.domains())
      add(cross_test, "cross", d, InferenceNorm::average(), "average");
  return out;
}

double rank1(const Eigen::MatrixXd& gallery, std::span<const std::uint64_t> gallery_ids,
             std::span<const IdentityId> gallery_identities, const Eigen::MatrixXd& probe,
             std::span<const IdentityId> probe_identities) {
  if (gallery.rows() == 0 || probe.rows() == 0)
    fail(ErrorCode::invalid_argument, "rank1: gallery and probe must be non-empty");
  if (gallery_ids.size() != static_cast<std::size_t>(gallery.rows()) ||
      gallery_identities.size() != gallery_ids.size() ||
      probe_identities.size() != static_cast<std::size_t>(probe.rows()) ||
      gallery.cols() != probe.cols())
    fail(ErrorCode::invalid_argument, "rank1: inconsistent shapes");
  std::size_t hits = 0;
  for (Eigen::Index q = 0; q < probe.rows(); ++q) {
    Eigen::Index best = -1;
    double best_d = 0.0;
    for (Eigen::Index g = 0; g < gallery.rows(); ++g) {
      const double d = (probe.row(q) - gallery.row(g)).norm();
      if (best < 0 || d < best_d ||
          (d == best_d && gallery_ids[static_cast<std::size_t>(g)] <
                              gallery_ids[static_cast<std::size_t>(best)])) {
        best = g;
        best_d = d;
      }
    }
    if (gallery_identities[static_cast<std::size_t>(best)] ==
        probe_identities[static_cast<std::size_t>(q)])
      ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probe.rows());
}

double rank1(const ModelState& model, const EvalProtocol& protocol) {
  protocol.validate();
  const Eigen::MatrixXd g = embed(model, protocol.gallery, protocol.norm);
  const Eigen::MatrixXd p = embed(model, protocol.probe, protocol.norm);
  std::vector<std::uint64_t> gids;
  std::vector<IdentityId> gident, pident;
  for (const Sample& s : protocol.gallery.samples()) {
    gids.push_back(s.id);
    gident.push_back(s.identity);
  }
  for (const Sample& s : protocol.probe.samples()) pident.push_back(s.identity);
  return rank1(g, gids, gident, p, pident);
}

namespace {

void validate_config(const FeatureStore& store, const TrainConfig& cfg) {
  if (store.empty()) fail(ErrorCode::invalid_argument, "train: empty store");
  cfg.batch.validate();
  if (cfg.schedule.total_steps > 0) cfg.schedule.validate();
  if (!(cfg.momentum >= 0 && cfg.momentum < 1))
    fail(ErrorCode::invalid_argument, "momentum must be in [0, 1)");
  if (!(cfg.weight_decay >= 0)) fail(ErrorCode::invalid_argument, "weight decay must be >= 0");
  bool any_positive = false;
  for (const auto& [d, w] : cfg.weights) {
    if (!(w >= 0) || !std::isfinite(w))
      fail(ErrorCode::invalid_argument, "triplet weights must be finite and non-negative");
    any_positive = any_positive || w > 0;
  }
  if (!any_positive) fail(ErrorCode::invalid_argument, "at least one triplet weight must be positive");
  const auto& table = store.domain_table();
  for (const DomainDraw& d : cfg.batch.draws) {
    if (!table.count(d.domain))
      fail(ErrorCode::invalid_argument,
           "batch spec names domain " + std::to_string(d.domain.value) + " absent from the store");
    if (!cfg.weights.count(d.domain))
      fail(ErrorCode::invalid_argument, "no triplet weight for domain " + std::to_string(d.domain.value));
  }
}

void evaluate(ModelState& model, std::span<const EvalProtocol> protocols, std::size_t step,
              RunReport& report) {
  const bool was_training = model.training;
  model.training = false;
  for (const EvalProtocol& p : protocols) report.evals.push_back({step, p.name, rank1(model, p)});
  model.training = was_training;
}

}  // namespace

TrainResult train(const FeatureStore& store, const TrainConfig& cfg,
                  std::span<const EvalProtocol> protocols) {
  validate_config(store, cfg);
  ModelHyper hyper = cfg.hyper;
  hyper.d_in = store.dim();
  Rng init = Rng(cfg.seed).split(1);
  return train_from(init_model(hyper, ClassMap::from_store(store), init), store, cfg, protocols);
}

TrainResult train_from(ModelState model, const FeatureStore& store, const TrainConfig& cfg,
                       std::span<const EvalProtocol> protocols) {
  validate_config(store, cfg);
  validate_model(model);
  for (const auto& [identity, _] : store.identity_index()) (void)model.classes.class_of(identity);
  const auto started = std::chrono::steady_clock::now();

  TrainResult result;
  RunReport& report = result.report;
  report.config_digest = cfg.digest();
  Rng sampler = Rng(cfg.seed).split(2);
  Params velocity = model.params.zeros_like();
  model.training = true;

  const std::size_t steps = cfg.schedule.total_steps;
  for (std::size_t step = 0; step < steps; ++step) {
    const double lr = lr_at(step, cfg.schedule);
    const auto rows = sample_batch(store, cfg.batch, sampler);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(store.dim()));
    std::vector<DomainId> domains;
    std::vector<IdentityId> ids;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Sample& s = store[rows[i]];
      for (std::size_t j = 0; j < store.dim(); ++j)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.signature[j];
      domains.push_back(s.identity.domain);
      ids.push_back(s.identity);
      labels.push_back(model.classes.class_of(s.identity));
    }

    ForwardResult fr = forward(model, x, domains);
    LossBreakdown loss = combined_loss(fr.embeddings, fr.logits, model.hyper.parts, ids, labels,
                                       cfg.weights, cfg.triplet, cfg.scope);
    if (!std::isfinite(loss.total)) {
      std::ostringstream os;
      os << "training diverged at step " << step << " (lr " << format_real(lr) << "): total "
         << format_real(loss.total) << ", cross-entropy " << format_real(loss.cross_entropy);
      fail(ErrorCode::divergence, os.str());
    }
    Params grad = backward(model, fr.cache, loss.grad_embeddings, loss.grad_logits);
    commit_running_stats(model, fr.cache);

    auto theta = model.params.tensors();
    auto vel = velocity.tensors();
    auto g = grad.tensors();
    for (std::size_t t = 0; t < theta.size(); ++t)
      for (std::size_t i = 0; i < theta[t].size(); ++i) {
        vel[t][i] = cfg.momentum * vel[t][i] - lr * (g[t][i] + cfg.weight_decay * theta[t][i]);
        theta[t][i] += vel[t][i];
      }
    ++model.version;

    loss.grad_embeddings.resize(0, 0);
    loss.grad_logits.resize(0, 0);
    report.trace.push_back({step, lr, std::move(loss)});
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 && step + 1 < steps)
      evaluate(model, protocols, step + 1, report);
  }

  model.training = false;
  evaluate(model, protocols, steps, report);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.model = std::move(model);
  return result;
}

TrainConfig single_domain_config(const TrainConfig& base, DomainId domain, std::size_t steps) {
  TrainConfig cfg = base;
  cfg.hyper.norm = NormMode::single;
  DomainDraw draw{domain, 8, 4};
  auto it = std::find_if(base.batch.draws.begin(), base.batch.draws.end(),
                         [&](const DomainDraw& d) { return d.domain == domain; });
  if (it != base.batch.draws.end())
    draw = *it;
  else if (!base.batch.draws.empty())
    draw = {domain, base.batch.draws.front().identities, base.batch.draws.front().samples_per_identity};
  cfg.batch.draws = {draw};
  auto w = base.weights.find(domain);
  cfg.weights = {{domain, w != base.weights.end() && w->second > 0 ? w->second : 1.0}};
  cfg.schedule.total_steps = steps;
  cfg.schedule.decay_steps.clear();
  if (steps >= 4) cfg.schedule.decay_steps = {steps / 2, steps * 3 / 4};
  return cfg;
}

std::map<DomainId, ModelState> pretrain_per_domain(const FeatureStore& store, const TrainConfig& base,
                                                   std::size_t steps) {
  std::map<DomainId, ModelState> out;
  for (DomainId d : store.domains()) {
    const FeatureStore sub = store.select_domain(d);
    TrainConfig cfg = single_domain_config(base, d, steps);
    // Small domains cannot fill the configured P.
    cfg.batch.draws[0].identities = std::min(cfg.batch.draws[0].identities, sub.domain_table().at(d));
    out.emplace(d, train(sub, cfg).model);
  }
  return out;
}

std::vector<std::uint64_t> random_removals(const FeatureStore& store, double fraction, Rng& rng) {
  std::vector<std::uint64_t> removed;
  for (DomainId domain : store.domains()) {
    std::vector<std::size_t> members;
    std::map<IdentityId, std::size_t> remaining;
    for (std::size_t i = 0; i < store.size(); ++i)
      if (store[i].identity.domain == domain) {
        members.push_back(i);
        ++remaining[store[i].identity];
      }
    const std::size_t budget = fraction_count(fraction, members.size());
    shuffle(members, rng);
    std::size_t spent = 0;
    for (std::size_t i : members) {
      if (spent == budget) break;
      std::size_t& left = remaining[store[i].identity];
      if (left <= 1) continue;
      --left;
      removed.push_back(store[i].id);
      ++spent;
    }
  }
  std::sort(removed.begin(), removed.end());
  return removed;
}

ComparisonCell run_cell(const Variant& variant, const TrainConfig& base, const Experiment& exp,
                        std::uint64_t seed) {
  ComparisonCell cell;
  cell.variant = variant.name;
  cell.seed = seed;
  cell.full_samples = exp.train.size();
  try {
    TrainConfig cfg = base;
    cfg.seed = seed;
    if (variant.apply) variant.apply(cfg);
    FeatureStore store = exp.train;
    if (variant.pruning == DataPruning::distill) {
      const auto models = pretrain_per_domain(store, cfg, variant.pretrain_steps);
      store = store.without_ids(distill(store, models, variant.policy).removed_ids);
    } else if (variant.pruning == DataPruning::random) {
      Rng rng = Rng(seed).split(3);
      store = store.without_ids(random_removals(store, variant.policy.removal_fraction, rng));
    }
    cell.train_samples = store.size();
    const auto protocols =
        make_protocols(cfg.hyper.norm, exp.self_test, exp.cross_test, exp.gallery_per_identity);
    const TrainResult res = train(store, cfg, protocols);

    double self = 0, self_avg = 0, cross = 0;
    std::size_t n_self = 0, n_self_avg = 0, n_cross = 0;
    for (const EvalRecord& e : res.report.evals) {
      if (e.name.starts_with("self:") && e.name.ends_with(":branch")) {
        self += e.rank1;
        ++n_self;
      } else if (e.name.starts_with("self:")) {
        self_avg += e.rank1;
        ++n_self_avg;
      } else {
        cross += e.rank1;
        ++n_cross;
      }
    }
    cell.self_rank1 = n_self ? self / static_cast<double>(n_self) : 0.0;
    cell.self_rank1_average = n_self_avg ? self_avg / static_cast<double>(n_self_avg) : cell.self_rank1;
    cell.cross_rank1 = n_cross ? cross / static_cast<double>(n_cross) : 0.0;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

ComparisonTable run_comparison(std::span<const Variant> variants, const TrainConfig& base,
                               const ExperimentFactory& experiments,
                               std::span<const std::uint64_t> seeds) {
  if (variants.empty()) fail(ErrorCode::invalid_argument, "comparison needs at least one variant");
  if (seeds.empty()) fail(ErrorCode::invalid_argument, "comparison needs at least one seed");
  ComparisonTable table;
  std::uint64_t h = fnv1a(base.describe());
  for (const Variant& v : variants) h = fnv1a(v.name + ";", h);
  for (std::uint64_t s : seeds) h = fnv1a(std::to_string(s) + ";", h);
  table.digest = h;

  std::vector<Experiment> exps;
  for (std::uint64_t s : seeds) exps.push_back(experiments(s));
  for (const Variant& v : variants) {
    ComparisonRow row;
    row.variant = v.name;
    std::vector<double> self, cross, frac;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      ComparisonCell cell = run_cell(v, base, exps[i], seeds[i]);
      if (cell.error.empty()) {
        ++row.n_ok;
        self.push_back(cell.self_rank1);
        cross.push_back(cell.cross_rank1);
        frac.push_back(static_cast<double>(cell.train_samples) /
                       static_cast<double>(std::max<std::size_t>(cell.full_samples, 1)));
      } else {
        row.errors.push_back("seed " + std::to_string(seeds[i]) + ": " + cell.error);
      }
      table.cells.push_back(std::move(cell));
    }
    std::tie(row.self_mean, row.self_std) = mean_std(self);
    std::tie(row.cross_mean, row.cross_std) = mean_std(cross);
    row.train_fraction = mean_std(frac).first;
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace gaitmix
