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

// Central finite-difference oracle for the combined training loss of a
// model, used by the unit tests and the acceptance suite.
#ifndef GAITMIX_TESTS_FD_ORACLE_HPP_
#define GAITMIX_TESTS_FD_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "gaitmix/losses.hpp"
#include "gaitmix/netmod.hpp"

namespace gaitmix::testing {

struct LossProblem {
  Eigen::MatrixXd x;
  std::vector<DomainId> domains;
  std::vector<IdentityId> identities;
  std::vector<std::size_t> labels;
  DomainWeights weights;
  TripletConfig triplet;
  TripletScope scope = TripletScope::separate;
};

inline LossBreakdown evaluate_loss(const ModelState& m, const LossProblem& p, ForwardCache* cache = nullptr) {
  ForwardResult f = forward(m, p.x, p.domains);
  LossBreakdown lb = combined_loss(f.embeddings, f.logits, m.hyper.parts, p.identities, p.labels,
                                   p.weights, p.triplet, p.scope);
  if (cache) *cache = std::move(f.cache);
  return lb;
}

inline Params analytic_gradient(const ModelState& m, const LossProblem& p) {
  ForwardCache cache;
  const LossBreakdown lb = evaluate_loss(m, p, &cache);
  return backward(m, cache, lb.grad_embeddings, lb.grad_logits);
}

struct GradCheck {
  double worst_rel = 0.0;
  std::size_t checked = 0;
  std::size_t failures = 0;
};

/// Compares every analytic coordinate against (L(t+h) - L(t-h)) / 2h.
/// A coordinate passes when |a - n| <= tol * max(|a|, |n|) + abs_floor; the
/// floor absorbs the O(eps / h) rounding of the difference quotient.
inline GradCheck check_gradient(ModelState m, const LossProblem& p, double h, double tol,
                                double abs_floor = 1e-8) {
  const Params g = analytic_gradient(m, p);
  const auto ga = g.tensors();
  auto views = m.params.tensors();
  GradCheck out;
  for (std::size_t t = 0; t < views.size(); ++t)
    for (std::size_t i = 0; i < views[t].size(); ++i) {
      const double keep = views[t][i];
      views[t][i] = keep + h;
      const double up = evaluate_loss(m, p).total;
      views[t][i] = keep - h;
      const double down = evaluate_loss(m, p).total;
      views[t][i] = keep;
      const double num = (up - down) / (2 * h);
      const double ana = ga[t][i];
      const double scale = std::max(std::abs(num), std::abs(ana));
      const double err = std::abs(num - ana);
      if (scale > abs_floor) out.worst_rel = std::max(out.worst_rel, err / scale);
      if (err > tol * scale + abs_floor) ++out.failures;
      ++out.checked;
    }
  return out;
}

}  // namespace gaitmix::testing

#endif  // GAITMIX_TESTS_FD_ORACLE_HPP_
