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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kper/ckg.hpp"
#include "kper/matrix.hpp"
#include "kper/params.hpp"
#include "kper/rng.hpp"

namespace kper {

// High-degree users and items whose separate embedding rows serve as
// reference features. Users and items form disjoint blocks: rows
// [0, |user_seeds|) of the seed-related tensors belong to users, the rest to
// items.
struct SeedPool {
  std::vector<Id> user_seeds;
  std::vector<Id> item_seeds;
  std::vector<std::size_t> user_degrees;  // parallel to user_seeds
  std::vector<std::size_t> item_degrees;  // parallel to item_seeds
  std::vector<std::int32_t> user_slot;    // node -> index in user block, or -1
  std::vector<std::int32_t> item_slot;

  std::size_t size() const { return user_seeds.size() + item_seeds.size(); }
  std::size_t count(NodeKind kind) const {
    return kind == NodeKind::kUser ? user_seeds.size() : item_seeds.size();
  }
  std::size_t offset(NodeKind kind) const {
    return kind == NodeKind::kUser ? 0 : user_seeds.size();
  }
  std::int32_t slot(NodeKind kind, Id node) const {
    const auto& slots = kind == NodeKind::kUser ? user_slot : item_slot;
    return node < slots.size() ? slots[node] : -1;
  }
  std::span<const Id> seeds(NodeKind kind) const {
    return kind == NodeKind::kUser ? std::span<const Id>(user_seeds)
                                   : std::span<const Id>(item_seeds);
  }

  bool operator==(const SeedPool&) const = default;
};

// Per side: drop the lowest `exclusion_quantile` fraction by positive degree,
// then keep the `size_per_side` highest-degree nodes. Ties go to the smaller
// id. Shrinks (with a warning) when fewer nodes are eligible.
SeedPool build_seed_pool(const CollaborativeKnowledgeGraph& graph, std::size_t size_per_side,
                         double exclusion_quantile, std::vector<std::string>* warnings = nullptr);

// `kind<TAB>internal_id<TAB>degree`
void write_seeds(const std::filesystem::path& path, const SeedPool& pool);
SeedPool read_seeds(const std::filesystem::path& path, std::size_t num_users,
                    std::size_t num_items);

// --- selection confidence --------------------------------------------------

inline constexpr double kLogBetaClamp = 30.0;

// log(beta) = clamp(W[rows] v* + b[rows], +-30) for rows [row0, row0+out.size()).
void selection_log_scores(const ModelParameters& params, std::size_t row0,
                          std::span<const double> v_star, std::span<double> log_beta);

// beta = exp(clamp(W v* + b)) over every seed row.
std::vector<double> selection_scores(const ModelParameters& params,
                                     std::span<const double> v_star);

// --- hard-concrete gates ---------------------------------------------------

struct GateState {
  std::vector<double> beta;
  std::vector<double> gamma;           // in (0, 1)
  std::vector<double> gamma_rescaled;  // in (eta, 1)
  std::vector<double> z_bar;           // in [0, 1)
  double eta = -0.5;
  double tau = 2.0 / 3.0;
};

// gamma = sigmoid((noise_logit + log_beta) / tau)
inline double concrete_sample(double log_beta, double noise_logit, double tau) {
  return linalg::sigmoid((noise_logit + log_beta) / tau);
}

inline double stretch(double gamma, double eta) { return (1.0 - eta) * gamma + eta; }

// P(z_bar > 0) under xi ~ U(0,1): sigmoid(log_beta - tau * log(-eta)).
double gate_open_probability(double log_beta, double tau, double eta);

// xi must lie strictly inside (0, 1); throws std::invalid_argument otherwise.
GateState sample_gates(std::span<const double> beta, double tau, double eta,
                       std::span<const double> xi);
// Draws xi from `rng`, redrawing exact 0 or 1.
GateState sample_gates(std::span<const double> beta, double tau, double eta, Rng& rng);

// Evaluation rule: xi = 0.5, so the logistic noise term vanishes.
std::vector<double> deterministic_gates(std::span<const double> beta, double tau, double eta);

// --- referencing and gated aggregation ---------------------------------------

// Seed node (slot >= 0): out = seed row verbatim, weights one-hot.
// Otherwise out = sum_x softmax(z_bar)_x * seed_row_x over the node's block.
// `masked` restricts the softmax to open gates (z_bar > 0); with every gate
// closed the output is zero.
void referencing_embedding(const Matrix& seed_table, std::size_t row0, std::int32_t slot,
                           std::span<const double> z_bar, bool masked, std::span<double> out,
                           std::span<double> weights);

std::vector<double> referencing_embedding(const ModelParameters& params, const SeedPool& pool,
                                          NodeKind kind, Id node, std::span<const double> z_bar,
                                          bool masked = false);

// Accumulates into grad_seed_table; writes dL/dz_bar into grad_z_bar (zero
// for seed nodes).
void referencing_backward(const Matrix& seed_table, std::size_t row0, std::int32_t slot,
                          std::span<const double> weights, std::span<const double> grad_out,
                          Matrix& grad_seed_table, std::span<double> grad_z_bar);

struct AggregateTrace {
  std::vector<double> s1;  // sigmoid(W_c v* + b_c)
  std::vector<double> s2;  // sigmoid(W_c t* + b_c)
  double c1 = 0.0;
  double c2 = 0.0;
  double w1 = 0.5;  // weight on v*
  double w2 = 0.5;  // weight on t*
};

// v+ = softmax(c1, c2) . (v*, t*), c = q . sigmoid(W_c x + b_c).
void gated_aggregate(const ModelParameters& params, std::span<const double> v_star,
                     std::span<const double> t_star, std::span<double> out,
                     AggregateTrace& trace);

std::vector<double> gated_aggregate(const ModelParameters& params,
                                    std::span<const double> v_star,
                                    std::span<const double> t_star);

void gated_aggregate_backward(const ModelParameters& params, std::span<const double> v_star,
                              std::span<const double> t_star, const AggregateTrace& trace,
                              std::span<const double> grad_out, ModelParameters& grads,
                              std::span<double> grad_v_star, std::span<double> grad_t_star);

}  // namespace kper
