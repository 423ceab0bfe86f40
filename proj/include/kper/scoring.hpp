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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kper/params.hpp"

namespace kper {

struct PairScore {
  std::vector<double> h_u;
  std::vector<double> h_i;
  double raw = 0.0;
  double prob = 0.5;
};

// h = v || hop_1 .. hop_K || v+
void assemble(std::span<const double> v, std::span<const double> hops,
              std::span<const double> v_plus, std::span<double> h);

// Throws std::invalid_argument on a length mismatch.
PairScore assemble_and_score(std::span<const double> h_u, std::span<const double> h_i);

inline constexpr double kProbFloor = 1e-12;

double clamp_prob(double p);

// Mean binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12].
double cross_entropy_loss(std::span<const std::uint8_t> labels, std::span<const double> probs);

// Sum over entries of sigmoid(log beta - tau * log(-eta)).
double sparsity_penalty(std::span<const double> beta, double tau, double eta);
// Same, from log(beta) directly.
double sparsity_penalty_log(std::span<const double> log_beta, double tau, double eta);

struct LossBreakdown {
  double ce = 0.0;
  double sp = 0.0;
  double l2 = 0.0;
  double total = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

LossBreakdown total_loss(double ce, double sp, const ModelParameters& params, double lambda1,
                         double lambda2);

}  // namespace kper
