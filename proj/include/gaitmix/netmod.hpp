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

#ifndef GAITMIX_NETMOD_HPP_
#define GAITMIX_NETMOD_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "gaitmix/core.hpp"

namespace gaitmix {

enum class NormMode { single, dsbn };

struct ModelHyper {
  std::size_t d_in = 16;
  std::size_t hidden = 32;
  std::size_t d_emb = 16;
  std::size_t parts = 2;
  double eps = 1e-5;
  double bn_momentum = 0.1;
  NormMode norm = NormMode::single;
};

/// Maps domain-namespaced identities onto the unified class space: domains in
/// ascending order, each contributing a contiguous block of labels.
class ClassMap {
 public:
  ClassMap() = default;
  /// (domain, identity count) pairs; domains must be strictly ascending.
  explicit ClassMap(std::vector<std::pair<DomainId, std::size_t>> blocks);
  static ClassMap from_store(const FeatureStore& store);

  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t n_domains() const noexcept { return blocks_.size(); }
  const std::vector<std::pair<DomainId, std::size_t>>& blocks() const noexcept { return blocks_; }
  std::vector<DomainId> domains() const;

  /// Position of `domain` in the domain list, or -1.
  std::ptrdiff_t domain_position(DomainId domain) const noexcept;
  /// Throws not_found for an identity outside the map.
  std::size_t class_of(IdentityId id) const;
  IdentityId identity_of(std::size_t cls) const;

  friend bool operator==(const ClassMap&, const ClassMap&) = default;

 private:
  std::vector<std::pair<DomainId, std::size_t>> blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t n_classes_ = 0;
};

/// Learned parameters. Also used as the gradient container.
struct Params {
  Eigen::MatrixXd w1;  // hidden x d_in
  Eigen::VectorXd b1;
  std::vector<Eigen::VectorXd> gamma;  // per norm branch, length hidden
  std::vector<Eigen::VectorXd> beta;
  Eigen::MatrixXd w2;  // d_emb x hidden
  Eigen::VectorXd b2;
  std::vector<Eigen::MatrixXd> head_w;  // per part, n_classes x (d_emb / parts)
  std::vector<Eigen::VectorXd> head_b;  // per part, n_classes

  /// Views over every tensor in the fixed checkpoint order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  Params zeros_like() const;
  std::size_t count() const;
};

struct ModelState {
  ModelHyper hyper;
  ClassMap classes;
  Params params;
  std::vector<Eigen::VectorXd> running_mean;  // per branch
  std::vector<Eigen::VectorXd> running_var;
  bool training = false;
  /// Bumped on every parameter or statistic mutation; caches remember it.
  std::uint64_t version = 0;

  std::size_t n_branches() const noexcept { return running_mean.size(); }
  std::size_t n_classes() const noexcept { return classes.n_classes(); }
  /// Normalization branch that owns `domain`; throws invalid_argument.
  std::size_t branch_of(DomainId domain) const;
};

/// He-style random init; gamma = 1, beta = 0, running mean 0 / var 1.
ModelState init_model(const ModelHyper& hyper, ClassMap classes, Rng& rng);
/// Throws invalid_argument when shapes disagree with hyper or values are non-finite.
void validate_model(const ModelState& model);

struct InferenceNorm {
  enum class Kind { own_domain, branch, average };
  Kind kind = Kind::own_domain;
  std::size_t branch = 0;

  static InferenceNorm own_domain() { return {Kind::own_domain, 0}; }
  static InferenceNorm fixed_branch(std::size_t k) { return {Kind::branch, k}; }
  static InferenceNorm average() { return {Kind::average, 0}; }
};

/// Per-branch batch statistics captured by a training-mode forward pass.
struct BranchBatch {
  std::size_t branch = 0;
  std::vector<std::size_t> rows;
  Eigen::VectorXd mean;
  Eigen::VectorXd var;  // biased
  Eigen::VectorXd inv_std;
};

struct ForwardCache {
  bool training = false;
  std::uint64_t version = 0;
  Eigen::MatrixXd x;
  Eigen::MatrixXd z1;
  Eigen::MatrixXd xhat;
  Eigen::MatrixXd normed;
  Eigen::MatrixXd act;
  std::vector<std::size_t> row_branch;
  std::vector<BranchBatch> batches;
};

struct ForwardResult {
  Eigen::MatrixXd embeddings;  // B x d_emb
  Eigen::MatrixXd logits;      // B x (parts * n_classes), part j in columns [j*C, (j+1)*C)
  ForwardCache cache;
};

/// Forward pass. In training mode every branch normalizes with its own
/// sub-batch statistics and `norm` is ignored; running statistics are not
/// touched (see commit_running_stats).
ForwardResult forward(const ModelState& model, const Eigen::MatrixXd& x,
                      std::span<const DomainId> domains,
                      InferenceNorm norm = InferenceNorm::own_domain());

/// running <- (1 - momentum) * running + momentum * batch (unbiased variance).
void commit_running_stats(ModelState& model, const ForwardCache& cache);

/// Reverse-mode gradients of a scalar loss given its gradients w.r.t.
/// embeddings and logits. The cache must come from a training-mode forward of
/// the same model version.
Params backward(const ModelState& model, const ForwardCache& cache,
                const Eigen::MatrixXd& grad_embeddings, const Eigen::MatrixXd& grad_logits);

/// Batch normalization through branch k on a batch of hidden activations.
/// Training mode standardizes with batch statistics and updates the branch's
/// running statistics; needs >= 2 rows.
Eigen::MatrixXd bn_forward(ModelState& model, const Eigen::MatrixXd& x, std::size_t branch);

/// Each row normalized by its domain's branch; in training mode branch
/// statistics are updated from that domain's rows only.
Eigen::MatrixXd dsbn_route(ModelState& model, const Eigen::MatrixXd& x,
                           std::span<const DomainId> domains);

/// Mean over all branches of BN_k(x) with running statistics. Inference only.
Eigen::MatrixXd dsbn_average_inference(const ModelState& model, const Eigen::MatrixXd& x);

/// Stacks store signatures into a B x d_in matrix.
Eigen::MatrixXd signature_matrix(const FeatureStore& store);
std::vector<DomainId> sample_domains(const FeatureStore& store);

/// Inference-mode embeddings for every sample of `store`, row i = sample i.
Eigen::MatrixXd embed(const ModelState& model, const FeatureStore& store,
                      InferenceNorm norm = InferenceNorm::own_domain());

/// Argmax class per part for every row; ties go to the smaller class index.
std::vector<std::vector<std::size_t>> part_predictions(const Eigen::MatrixXd& logits,
                                                       std::size_t parts,
                                                       std::size_t n_classes);

}  // namespace gaitmix

#endif  // GAITMIX_NETMOD_HPP_
