/*
 * Copyright 2026 The kper Authors.
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

#include "kper/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kper/matrix.hpp"
#include "kper/seed_referencing.hpp"

namespace kper {

void assemble(std::span<const double> v, std::span<const double> hops,
              std::span<const double> v_plus, std::span<double> h) {
  auto it = std::copy(v.begin(), v.end(), h.begin());
  it = std::copy(hops.begin(), hops.end(), it);
  std::copy(v_plus.begin(), v_plus.end(), it);
}

PairScore assemble_and_score(std::span<const double> h_u, std::span<const double> h_i) {
  if (h_u.size() != h_i.size()) {
    throw std::invalid_argument("representation lengths differ: " + std::to_string(h_u.size()) +
                                " vs " + std::to_string(h_i.size()));
  }
  PairScore s;
  s.h_u.assign(h_u.begin(), h_u.end());
  s.h_i.assign(h_i.begin(), h_i.end());
  s.raw = linalg::dot(h_u, h_i);
  s.prob = linalg::sigmoid(s.raw);
  return s;
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

double cross_entropy_loss(std::span<const std::uint8_t> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) throw std::invalid_argument("labels and probs differ");
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double p = clamp_prob(probs[k]);
    sum -= labels[k] != 0 ? std::log(p) : std::log1p(-p);
  }
  return sum / static_cast<double>(labels.size());
}

double sparsity_penalty_log(std::span<const double> log_beta, double tau, double eta) {
  double sum = 0.0;
  for (double lb : log_beta) sum += gate_open_probability(lb, tau, eta);
  return sum;
}

double sparsity_penalty(std::span<const double> beta, double tau, double eta) {
  double sum = 0.0;
  for (double b : beta) sum += gate_open_probability(std::log(b), tau, eta);
  return sum;
}

LossBreakdown total_loss(double ce, double sp, const ModelParameters& params, double lambda1,
                         double lambda2) {
  LossBreakdown out;
  out.ce = ce;
  out.sp = sp;
  out.l2 = l2_squared(params);
  out.lambda1 = lambda1;
  out.lambda2 = lambda2;
  out.total = ce + lambda1 * sp + lambda2 * out.l2;
  return out;
}

}  // namespace kper
