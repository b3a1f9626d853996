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

#include "gaitmix/netmod.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gaitmix {

ClassMap::ClassMap(std::vector<std::pair<DomainId, std::size_t>> blocks) : blocks_(std::move(blocks)) {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (i > 0 && !(blocks_[i - 1].first < blocks_[i].first))
      fail(ErrorCode::invalid_argument, "class map domains must be strictly ascending");
    if (blocks_[i].second == 0)
      fail(ErrorCode::invalid_argument, "class map domain with zero identities");
    offsets_.push_back(n_classes_);
    n_classes_ += blocks_[i].second;
  }
}

ClassMap ClassMap::from_store(const FeatureStore& store) {
  std::vector<std::pair<DomainId, std::size_t>> blocks;
  for (const auto& [domain, _] : store.domain_table()) {
    // Labels are dense per domain, so the block spans max label + 1.
    std::uint32_t max_label = 0;
    for (const auto& [identity, rows] : store.identity_index())
      if (identity.domain == domain) max_label = std::max(max_label, identity.label);
    blocks.emplace_back(domain, static_cast<std::size_t>(max_label) + 1);
  }
  return ClassMap(std::move(blocks));
}

std::vector<DomainId> ClassMap::domains() const {
  std::vector<DomainId> out;
  for (const auto& b : blocks_) out.push_back(b.first);
  return out;
}

std::ptrdiff_t ClassMap::domain_position(DomainId domain) const noexcept {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].first == domain) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

std::size_t ClassMap::class_of(IdentityId id) const {
  const std::ptrdiff_t pos = domain_position(id.domain);
  if (pos < 0 || id.label >= blocks_[static_cast<std::size_t>(pos)].second)
    fail(ErrorCode::not_found, "identity " + std::to_string(id.label) + " of domain " +
                                   std::to_string(id.domain.value) + " is not in the class map");
  return offsets_[static_cast<std::size_t>(pos)] + id.label;
}

IdentityId ClassMap::identity_of(std::size_t cls) const {
  if (cls >= n_classes_) fail(ErrorCode::not_found, "class index out of range");
  std::size_t i = blocks_.size() - 1;
  while (offsets_[i] > cls) --i;
  return IdentityId{blocks_[i].first, static_cast<std::uint32_t>(cls - offsets_[i])};
}

std::vector<std::span<double>> Params::tensors() {
  std::vector<std::span<double>> out;
  auto add = [&out](auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); };
  add(w1);
  add(b1);
  for (auto& g : gamma) add(g);
  for (auto& b : beta) add(b);
  add(w2);
  add(b2);
  for (std::size_t j = 0; j < head_w.size(); ++j) {
    add(head_w[j]);
    add(head_b[j]);
  }
  return out;
}

std::vector<std::span<const double>> Params::tensors() const {
  std::vector<std::span<const double>> out;
  for (auto s : const_cast<Params*>(this)->tensors()) out.emplace_back(s.data(), s.size());
  return out;
}

Params Params::zeros_like() const {
  Params z = *this;
  for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

std::size_t Params::count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

std::size_t ModelState::branch_of(DomainId domain) const {
  if (hyper.norm == NormMode::single) return 0;
  const std::ptrdiff_t pos = classes.domain_position(domain);
  if (pos < 0)
    fail(ErrorCode::invalid_argument,
         "domain " + std::to_string(domain.value) + " has no normalization branch");
  return static_cast<std::size_t>(pos);
}

ModelState init_model(const ModelHyper& hyper, ClassMap classes, Rng& rng) {
  if (hyper.d_in == 0 || hyper.hidden == 0 || hyper.d_emb == 0 || hyper.parts == 0)
    fail(ErrorCode::invalid_argument, "model dimensions must be positive");
  if (hyper.d_emb % hyper.parts != 0)
    fail(ErrorCode::invalid_argument, "parts must divide the embedding dimension");
  if (classes.n_classes() == 0) fail(ErrorCode::invalid_argument, "model needs at least one class");
  if (!(hyper.bn_momentum > 0 && hyper.bn_momentum <= 1))
    fail(ErrorCode::invalid_argument, "bn momentum must be in (0, 1]");

  ModelState m;
  m.hyper = hyper;
  m.classes = std::move(classes);
  const std::size_t h = hyper.hidden;
  const std::size_t seg = hyper.d_emb / hyper.parts;
  const std::size_t n_cls = m.classes.n_classes();
  const std::size_t branches = hyper.norm == NormMode::dsbn ? m.classes.n_domains() : 1;

  auto gaussian = [&rng](Eigen::Index rows, Eigen::Index cols, double stddev) {
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.normal(0.0, stddev);
    return w;
  };
  Params& p = m.params;
  p.w1 = gaussian(h, hyper.d_in, std::sqrt(2.0 / static_cast<double>(hyper.d_in)));
  p.b1 = Eigen::VectorXd::Zero(h);
  p.gamma.assign(branches, Eigen::VectorXd::Ones(h));
  p.beta.assign(branches, Eigen::VectorXd::Zero(h));
  p.w2 = gaussian(hyper.d_emb, h, std::sqrt(1.0 / static_cast<double>(h)));
  p.b2 = Eigen::VectorXd::Zero(hyper.d_emb);
  for (std::size_t j = 0; j < hyper.parts; ++j) {
    p.head_w.push_back(gaussian(n_cls, seg, std::sqrt(1.0 / static_cast<double>(seg))));
    p.head_b.push_back(Eigen::VectorXd::Zero(n_cls));
  }
  m.running_mean.assign(branches, Eigen::VectorXd::Zero(h));
  m.running_var.assign(branches, Eigen::VectorXd::Ones(h));
  return m;
}

void validate_model(const ModelState& m) {
  const ModelHyper& hp = m.hyper;
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_argument, "model: " + what); };
  if (hp.parts == 0 || hp.d_emb % hp.parts != 0) bad("parts must divide d_emb");
  const auto h = static_cast<Eigen::Index>(hp.hidden);
  const auto n_cls = static_cast<Eigen::Index>(m.n_classes());
  const std::size_t branches = hp.norm == NormMode::dsbn ? m.classes.n_domains() : 1;
  const Params& p = m.params;
  if (p.w1.rows() != h || p.w1.cols() != static_cast<Eigen::Index>(hp.d_in) || p.b1.size() != h)
    bad("layer 1 shape");
  if (p.w2.rows() != static_cast<Eigen::Index>(hp.d_emb) || p.w2.cols() != h ||
      p.b2.size() != static_cast<Eigen::Index>(hp.d_emb))
    bad("layer 2 shape");
  if (p.gamma.size() != branches || p.beta.size() != branches ||
      m.running_mean.size() != branches || m.running_var.size() != branches)
    bad("normalization branch count");
  for (std::size_t k = 0; k < branches; ++k) {
    if (p.gamma[k].size() != h || p.beta[k].size() != h || m.running_mean[k].size() != h ||
        m.running_var[k].size() != h)
      bad("normalization branch shape");
    if ((m.running_var[k].array() < 0).any()) bad("negative running variance");
  }
  const auto seg = static_cast<Eigen::Index>(hp.d_emb / hp.parts);
  if (p.head_w.size() != hp.parts || p.head_b.size() != hp.parts) bad("part head count");
  for (std::size_t j = 0; j < hp.parts; ++j)
    if (p.head_w[j].rows() != n_cls || p.head_w[j].cols() != seg || p.head_b[j].size() != n_cls)
      bad("part head shape");
  for (auto t : p.tensors())
    for (double v : t)
      if (!std::isfinite(v)) bad("non-finite parameter");
}

namespace {

void check_input(const ModelState& model, const Eigen::MatrixXd& x,
                 std::span<const DomainId> domains) {
  if (x.cols() != static_cast<Eigen::Index>(model.hyper.d_in))
    fail(ErrorCode::invalid_argument, "input width " + std::to_string(x.cols()) +
                                          " != d_in " + std::to_string(model.hyper.d_in));
  if (domains.size() != static_cast<std::size_t>(x.rows()))
    fail(ErrorCode::invalid_argument, "one domain label per input row required");
}

/// Standardizes the given rows with their own statistics.
BranchBatch batch_stats(const Eigen::MatrixXd& z, std::size_t branch, std::vector<std::size_t> rows,
                        double eps) {
  if (rows.size() < 2)
    fail(ErrorCode::degenerate_batch, "normalization branch " + std::to_string(branch) +
                                          " received " + std::to_string(rows.size()) +
                                          " training rows; need at least 2");
  BranchBatch bb;
  bb.branch = branch;
  const auto n = static_cast<double>(rows.size());
  bb.mean = Eigen::VectorXd::Zero(z.cols());
  for (std::size_t r : rows) bb.mean += z.row(static_cast<Eigen::Index>(r)).transpose();
  bb.mean /= n;
  bb.var = Eigen::VectorXd::Zero(z.cols());
  for (std::size_t r : rows)
    bb.var += (z.row(static_cast<Eigen::Index>(r)).transpose() - bb.mean).array().square().matrix();
  bb.var /= n;
  bb.inv_std = (bb.var.array() + eps).rsqrt();
  bb.rows = std::move(rows);
  return bb;
}

Eigen::RowVectorXd infer_row(const ModelState& m, const Eigen::RowVectorXd& z, std::size_t k) {
  const Eigen::ArrayXd inv = (m.running_var[k].array() + m.hyper.eps).rsqrt();
  return (m.params.gamma[k].array() * (z.transpose().array() - m.running_mean[k].array()) * inv +
          m.params.beta[k].array())
      .matrix()
      .transpose();
}

void check_branch(const ModelState& m, std::size_t k) {
  if (k >= m.n_branches())
    fail(ErrorCode::invalid_argument, "normalization branch " + std::to_string(k) + " out of range");
}

}  // namespace

ForwardResult forward(const ModelState& model, const Eigen::MatrixXd& x,
                      std::span<const DomainId> domains, InferenceNorm norm) {
  check_input(model, x, domains);
  const Params& p = model.params;
  const Eigen::Index rows = x.rows();
  ForwardResult out;
  ForwardCache& c = out.cache;
  c.training = model.training;
  c.version = model.version;
  c.x = x;
  c.z1 = (x * p.w1.transpose()).rowwise() + p.b1.transpose();
  c.normed.resize(rows, c.z1.cols());

  if (model.training) {
    c.xhat.resize(rows, c.z1.cols());
    c.row_branch.resize(static_cast<std::size_t>(rows));
    std::vector<std::vector<std::size_t>> members(model.n_branches());
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::size_t k = model.branch_of(domains[static_cast<std::size_t>(r)]);
      c.row_branch[static_cast<std::size_t>(r)] = k;
      members[k].push_back(static_cast<std::size_t>(r));
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (members[k].empty()) continue;
      BranchBatch bb = batch_stats(c.z1, k, std::move(members[k]), model.hyper.eps);
      for (std::size_t r : bb.rows) {
        const auto ri = static_cast<Eigen::Index>(r);
        c.xhat.row(ri) = ((c.z1.row(ri).transpose() - bb.mean).array() * bb.inv_std.array())
                             .matrix()
                             .transpose();
        c.normed.row(ri) =
            (p.gamma[k].array() * c.xhat.row(ri).transpose().array() + p.beta[k].array())
                .matrix()
                .transpose();
      }
      c.batches.push_back(std::move(bb));
    }
  } else {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::RowVectorXd z = c.z1.row(r);
      switch (norm.kind) {
        case InferenceNorm::Kind::own_domain:
          c.normed.row(r) = infer_row(model, z, model.branch_of(domains[static_cast<std::size_t>(r)]));
          break;
        case InferenceNorm::Kind::branch:
          check_branch(model, norm.branch);
          c.normed.row(r) = infer_row(model, z, norm.branch);
          break;
        case InferenceNorm::Kind::average: {
          Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(z.size());
          for (std::size_t k = 0; k < model.n_branches(); ++k) acc += infer_row(model, z, k);
          c.normed.row(r) = acc / static_cast<double>(model.n_branches());
          break;
        }
      }
    }
  }

  c.act = c.normed.cwiseMax(0.0);
  out.embeddings = (c.act * p.w2.transpose()).rowwise() + p.b2.transpose();

  const std::size_t parts = model.hyper.parts;
  const auto seg = static_cast<Eigen::Index>(model.hyper.d_emb / parts);
  const auto n_cls = static_cast<Eigen::Index>(model.n_classes());
  out.logits.resize(rows, static_cast<Eigen::Index>(parts) * n_cls);
  for (std::size_t j = 0; j < parts; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.logits.middleCols(jj * n_cls, n_cls) =
        (out.embeddings.middleCols(jj * seg, seg) * p.head_w[j].transpose()).rowwise() +
        p.head_b[j].transpose();
  }
  return out;
}

void commit_running_stats(ModelState& model, const ForwardCache& cache) {
  if (!cache.training || cache.version != model.version)
    fail(ErrorCode::invalid_state, "running statistics need a fresh training-mode cache");
  const double mom = model.hyper.bn_momentum;
  for (const BranchBatch& bb : cache.batches) {
    const double n = static_cast<double>(bb.rows.size());
    model.running_mean[bb.branch] = (1.0 - mom) * model.running_mean[bb.branch] + mom * bb.mean;
    model.running_var[bb.branch] =
        (1.0 - mom) * model.running_var[bb.branch] + mom * (bb.var * (n / (n - 1.0)));
  }
  ++model.version;
}

Params backward(const ModelState& model, const ForwardCache& c,
                const Eigen::MatrixXd& grad_emb, const Eigen::MatrixXd& grad_logits) {
  if (!c.training) fail(ErrorCode::invalid_state, "backward needs a training-mode forward cache");
  if (c.version != model.version)
    fail(ErrorCode::invalid_state, "stale forward cache: model changed since the forward pass");
  const Params& p = model.params;
  const Eigen::Index rows = c.x.rows();
  const std::size_t parts = model.hyper.parts;
  const auto seg = static_cast<Eigen::Index>(model.hyper.d_emb / parts);
  const auto n_cls = static_cast<Eigen::Index>(model.n_classes());
  if (grad_emb.rows() != rows || grad_emb.cols() != static_cast<Eigen::Index>(model.hyper.d_emb) ||
      grad_logits.rows() != rows || grad_logits.cols() != static_cast<Eigen::Index>(parts) * n_cls)
    fail(ErrorCode::invalid_argument, "backward: upstream gradient shape mismatch");

  Params g = p.zeros_like();
  Eigen::MatrixXd d_emb = grad_emb;
  const Eigen::MatrixXd emb = (c.act * p.w2.transpose()).rowwise() + p.b2.transpose();
  for (std::size_t j = 0; j < parts; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const auto dl = grad_logits.middleCols(jj * n_cls, n_cls);
    g.head_w[j] = dl.transpose() * emb.middleCols(jj * seg, seg);
    g.head_b[j] = dl.colwise().sum().transpose();
    d_emb.middleCols(jj * seg, seg) += dl * p.head_w[j];
  }

  g.w2 = d_emb.transpose() * c.act;
  g.b2 = d_emb.colwise().sum().transpose();
  const Eigen::MatrixXd d_act = d_emb * p.w2;
  const Eigen::MatrixXd d_norm = (c.normed.array() > 0.0).select(d_act, 0.0);

  Eigen::MatrixXd d_z1 = Eigen::MatrixXd::Zero(rows, d_norm.cols());
  for (const BranchBatch& bb : c.batches) {
    const std::size_t k = bb.branch;
    const double n = static_cast<double>(bb.rows.size());
    Eigen::VectorXd sum_dxhat = Eigen::VectorXd::Zero(d_norm.cols());
    Eigen::VectorXd sum_dxhat_xhat = Eigen::VectorXd::Zero(d_norm.cols());
    for (std::size_t r : bb.rows) {
      const auto ri = static_cast<Eigen::Index>(r);
      const Eigen::VectorXd dn = d_norm.row(ri).transpose();
      const Eigen::VectorXd xh = c.xhat.row(ri).transpose();
      g.gamma[k] += dn.cwiseProduct(xh);
      g.beta[k] += dn;
      const Eigen::VectorXd dxh = dn.cwiseProduct(p.gamma[k]);
      sum_dxhat += dxh;
      sum_dxhat_xhat += dxh.cwiseProduct(xh);
    }
    for (std::size_t r : bb.rows) {
      const auto ri = static_cast<Eigen::Index>(r);
      const Eigen::ArrayXd dxh = d_norm.row(ri).transpose().array() * p.gamma[k].array();
      const Eigen::ArrayXd xh = c.xhat.row(ri).transpose().array();
      d_z1.row(ri) = (bb.inv_std.array() / n *
                      (n * dxh - sum_dxhat.array() - xh * sum_dxhat_xhat.array()))
                         .matrix()
                         .transpose();
    }
  }

  g.w1 = d_z1.transpose() * c.x;
  g.b1 = d_z1.colwise().sum().transpose();
  return g;
}

Eigen::MatrixXd bn_forward(ModelState& model, const Eigen::MatrixXd& x, std::size_t branch) {
  check_branch(model, branch);
  if (x.cols() != static_cast<Eigen::Index>(model.hyper.hidden))
    fail(ErrorCode::invalid_argument, "bn_forward: width must equal hidden size");
  Eigen::MatrixXd y(x.rows(), x.cols());
  if (!model.training) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) y.row(r) = infer_row(model, x.row(r), branch);
    return y;
  }
  std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
  BranchBatch bb = batch_stats(x, branch, std::move(rows), model.hyper.eps);
  const Eigen::VectorXd& gamma = model.params.gamma[branch];
  const Eigen::VectorXd& beta = model.params.beta[branch];
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    y.row(r) = (gamma.array() * (x.row(r).transpose() - bb.mean).array() * bb.inv_std.array() +
                beta.array())
                   .matrix()
                   .transpose();
  ForwardCache c;
  c.training = true;
  c.version = model.version;
  c.batches.push_back(std::move(bb));
  commit_running_stats(model, c);
  return y;
}

Eigen::MatrixXd dsbn_route(ModelState& model, const Eigen::MatrixXd& x,
                           std::span<const DomainId> domains) {
  if (model.hyper.norm != NormMode::dsbn)
    fail(ErrorCode::invalid_state, "dsbn_route requires a model in dsbn mode");
  if (domains.size() != static_cast<std::size_t>(x.rows()))
    fail(ErrorCode::invalid_argument, "one domain label per row required");
  std::vector<std::vector<Eigen::Index>> members(model.n_branches());
  for (std::size_t r = 0; r < domains.size(); ++r)
    members[model.branch_of(domains[r])].push_back(static_cast<Eigen::Index>(r));
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (members[k].empty()) continue;
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(members[k].size()), x.cols());
    for (std::size_t i = 0; i < members[k].size(); ++i)
      sub.row(static_cast<Eigen::Index>(i)) = x.row(members[k][i]);
    const Eigen::MatrixXd out = bn_forward(model, sub, k);
    for (std::size_t i = 0; i < members[k].size(); ++i)
      y.row(members[k][i]) = out.row(static_cast<Eigen::Index>(i));
  }
  return y;
}

Eigen::MatrixXd dsbn_average_inference(const ModelState& model, const Eigen::MatrixXd& x) {
  if (model.training)
    fail(ErrorCode::invalid_state, "output averaging is an inference-only operation");
  if (x.cols() != static_cast<Eigen::Index>(model.hyper.hidden))
    fail(ErrorCode::invalid_argument, "dsbn_average_inference: width must equal hidden size");
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (std::size_t k = 0; k < model.n_branches(); ++k)
    for (Eigen::Index r = 0; r < x.rows(); ++r) y.row(r) += infer_row(model, x.row(r), k);
  return y / static_cast<double>(model.n_branches());
}

Eigen::MatrixXd signature_matrix(const FeatureStore& store) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(store.size()), static_cast<Eigen::Index>(store.dim()));
  for (std::size_t i = 0; i < store.size(); ++i)
    for (std::size_t j = 0; j < store.dim(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = store[i].signature[j];
  return x;
}

std::vector<DomainId> sample_domains(const FeatureStore& store) {
  std::vector<DomainId> out;
  out.reserve(store.size());
  for (const Sample& s : store.samples()) out.push_back(s.identity.domain);
  return out;
}

Eigen::MatrixXd embed(const ModelState& model, const FeatureStore& store, InferenceNorm norm) {
  if (model.training) fail(ErrorCode::invalid_state, "embed requires a model in inference mode");
  const auto domains = sample_domains(store);
  return forward(model, signature_matrix(store), domains, norm).embeddings;
}

std::vector<std::vector<std::size_t>> part_predictions(const Eigen::MatrixXd& logits,
                                                       std::size_t parts,
                                                       std::size_t n_classes) {
  if (static_cast<std::size_t>(logits.cols()) != parts * n_classes)
    fail(ErrorCode::invalid_argument, "logit width != parts * n_classes");
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (std::size_t j = 0; j < parts; ++j) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < n_classes; ++c)
        if (logits(r, static_cast<Eigen::Index>(j * n_classes + c)) >
            logits(r, static_cast<Eigen::Index>(j * n_classes + best)))
          best = c;
      out[static_cast<std::size_t>(r)].push_back(best);
    }
  }
  return out;
}

}  // namespace gaitmix
