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
#include <span>
#include <vector>

#include "kper/ckg.hpp"
#include "kper/config.hpp"
#include "kper/encoders.hpp"
#include "kper/neighborhood.hpp"
#include "kper/params.hpp"
#include "kper/scorer.hpp"
#include "kper/seed_referencing.hpp"

namespace kper {

struct ModelOptions {
  std::size_t depth = 2;
  double tau = 2.0 / 3.0;
  double eta = -0.5;
  bool use_referencing = true;
  bool masked = false;

  static ModelOptions from(const TrainConfig& config);
};

ModelDims model_dims(const CollaborativeKnowledgeGraph& graph, const SeedPool& pool,
                     std::size_t dim);

// Logistic noise for the gates. Deterministic mode is xi = 0.5 (zero noise).
// Sampled mode draws xi per (stream, node, seed entry) with a counter-based
// generator, so a node shares one gate draw across every pair of a batch.
struct GateNoise {
  bool sampled = false;
  std::uint64_t stream = 0;

  static GateNoise deterministic() { return {}; }
  static GateNoise for_batch(std::uint64_t seed, std::uint64_t epoch, std::uint64_t batch);

  double logit(NodeKind kind, Id node, std::size_t x) const;
};

// Hop encodings of one node, K consecutive d-vectors.
struct NodeHops {
  std::vector<double> hops;
  std::vector<HopTrace> traces;
};

void compute_node_hops(const ModelParameters& params, const TripleNeighborhoods& nb,
                       NodeKind kind, Id node, std::size_t depth, NodeHops& out);

void compute_node_hops(const ModelParameters& params, const HopProjections& proj,
                       const TripleNeighborhoods& nb, NodeKind kind, Id node, std::size_t depth,
                       NodeHops& out);

// Everything one side of a pair keeps for its backward pass.
struct SideTrace {
  std::vector<double> alpha;
  std::vector<double> v;
  std::vector<double> v_star;
  std::vector<double> pre;       // unclamped W v* + b
  std::vector<double> log_beta;  // clamped
  std::vector<double> gamma;
  std::vector<double> gamma_rescaled;
  std::vector<double> z_bar;
  std::vector<double> weights;
  std::vector<double> t_star;
  std::vector<double> v_plus;
  AggregateTrace agg;
};

// Encodes `node` against its partner's embedding `target` and writes
// h = v || hops || v+ into `h`.
void side_forward(const ModelParameters& params, const SeedPool& pool, const ModelOptions& opts,
                  NodeKind kind, Id node, std::span<const Id> neighbors,
                  std::span<const double> target, std::span<const double> hops,
                  const GateNoise& noise, SideTrace& tr, std::span<double> h);

// `sp_weight` scales the node's sparsity term (0 when it is not counted).
// Writes gradients into `grads`, `grad_target` and accumulates `grad_hops`.
void side_backward(const ModelParameters& params, const SeedPool& pool, const ModelOptions& opts,
                   NodeKind kind, Id node, std::span<const Id> neighbors,
                   std::span<const double> target, const SideTrace& tr,
                   std::span<const double> grad_h, double sp_weight, ModelParameters& grads,
                   std::span<double> grad_target, std::span<double> grad_hops);

// Sum over entries of the node's gate-open probabilities, from tr.log_beta.
double side_sparsity(const ModelOptions& opts, const SideTrace& tr);

inline std::size_t representation_size(std::size_t dim, std::size_t depth) {
  return (depth + 3) * dim;
}

struct BatchContext {
  const ModelParameters& params;
  const SeedPool& pool;
  const ModelOptions& opts;
  const TripleNeighborhoods& nb;
  GateNoise noise;
  double lambda1 = 0.0;
  std::size_t threads = 1;
};

struct BatchOutput {
  double ce = 0.0;  // mean over the batch
  double sp = 0.0;  // summed over distinct nodes
  std::vector<double> probs;
};

// Forward pass over a batch; when `grads` is non-null also accumulates the
// gradient of ce + lambda1 * sp (no L2 term) into it.
BatchOutput batch_forward_backward(const BatchContext& ctx, std::span<const Interaction> batch,
                                   ModelParameters* grads);

// Scores pairs with deterministic gates over fixed neighbourhoods. Hop
// encodings and every linear map of the neighbour rows are computed once up
// front; per pair only the target-dependent attention, gates and seed
// mixtures remain. `score_reference` runs the plain per-pair forward pass.
class ModelScorer : public Scorer {
 public:
  ModelScorer(const ModelParameters& params, const SeedPool& pool, const ModelOptions& opts,
              const TripleNeighborhoods& nb);

  // Raw inner-product scores of `user` against `items`.
  void score(Id user, std::span<const Id> items, std::span<double> out) const override;
  double score(Id user, Id item) const;
  double probability(Id user, Id item) const override;

  void score_reference(Id user, std::span<const Id> items, std::span<double> out) const;

 private:
  struct SideCache {
    NodeKind kind;
    std::size_t seeds = 0;       // this side's block size
    std::size_t row0 = 0;
    std::size_t other_seeds = 0;  // partner block size
    Matrix P;  // neighbour row -> probe_w[block, :d] row
    Matrix Q;  // neighbour row -> gate_w[:, :d] row
    Matrix X;  // neighbour row -> partner seed_table[:, :d] row
    Matrix R;  // this block's seed rows through gate_w, seeds x d
    Matrix c;  // per node: probe_w[block, d:] m + probe_b
    Matrix q;  // per node: gate_w[:, d:] m + gate_b
    Matrix x;  // per node: partner seed_table[:, d:] m
  };
  struct SideState;

  void side_state(const SideCache& side, Id node, std::span<const double> target,
                  std::span<const double> hops, SideState& st) const;

  const ModelParameters& params_;
  const SeedPool& pool_;
  ModelOptions opts_;
  const TripleNeighborhoods& nb_;
  std::vector<double> user_hops_;
  std::vector<double> item_hops_;
  SideCache users_;
  SideCache items_;
  Matrix seed_gram_;  // user seed rows . item seed rows
};

// Neighbourhood sample used whenever the model is evaluated.
TripleNeighborhoods evaluation_neighborhoods(const CollaborativeKnowledgeGraph& train_graph,
                                             const TrainConfig& config);

}  // namespace kper
