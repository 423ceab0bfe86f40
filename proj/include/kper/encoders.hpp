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
#include "kper/matrix.hpp"
#include "kper/params.hpp"

namespace kper {

// --- interactive encoding --------------------------------------------------
//
// out = sum_j alpha_j * table[n_j],  alpha = softmax_j(target . table[n_j]).
// An empty neighbour list encodes to zero.

void encode_interactive(const Matrix& neighbor_table, std::span<const double> target,
                        std::span<const Id> neighbors, std::span<double> out,
                        std::span<double> alpha);

std::vector<double> encode_interactive(const Matrix& neighbor_table,
                                       std::span<const double> target,
                                       std::span<const Id> neighbors);

// Accumulates into grad_table rows and grad_target. `scratch` needs
// neighbors.size() entries.
void encode_interactive_backward(const Matrix& neighbor_table, std::span<const double> target,
                                 std::span<const Id> neighbors, std::span<const double> alpha,
                                 std::span<const double> grad_out, Matrix& grad_table,
                                 std::span<double> grad_target, std::span<double> scratch);

// --- knowledge hop encoding ------------------------------------------------
//
// out = sum_j pi_j * v_tail_j, pi = softmax_j(MLP(v_head_j || v_rel_j)),
// MLP(x) = w2 . relu(W1 x + b1) + b2.

struct HopTrace {
  std::vector<double> pre;  // triples x hidden, W1 x + b1
  std::vector<double> pi;   // attention weights

  void resize(std::size_t triples, std::size_t hidden) {
    pre.resize(triples * hidden);
    pi.resize(triples);
  }
};

void encode_hop(const ModelParameters& params, std::span<const Triple> triples,
                std::span<double> out, HopTrace& trace);

std::vector<double> encode_hop(const ModelParameters& params, std::span<const Triple> triples);

// Accumulates parameter gradients into `grads`.
void encode_hop_backward(const ModelParameters& params, std::span<const Triple> triples,
                         const HopTrace& trace, std::span<const double> grad_out,
                         ModelParameters& grads);

// Per-batch cache of the first attention layer: W1[:, :d] v_h for each
// distinct head and W1[:, d:] v_r for every relation. A triple's
// pre-activation is then head + rel + b1, the same sum in the same order as
// the direct path.
struct HopProjections {
  Matrix head;                          // slots x hidden
  Matrix rel;                           // relations x hidden
  std::vector<std::int32_t> head_slot;  // entity -> slot, -1 if absent
  std::vector<Id> heads;                // slot -> entity
};

HopProjections project_hops(const ModelParameters& params, std::span<const Id> heads);

void encode_hop(const ModelParameters& params, const HopProjections& proj,
                std::span<const Triple> triples, std::span<double> out, HopTrace& trace);

// Gradient w.r.t. the cached projections, folded into parameters by
// finish_hop_backward.
struct HopGradAccum {
  Matrix head;
  Matrix rel;

  static HopGradAccum zeros_like(const HopProjections& proj);
};

void encode_hop_backward(const ModelParameters& params, const HopProjections& proj,
                         std::span<const Triple> triples, const HopTrace& trace,
                         std::span<const double> grad_out, ModelParameters& grads,
                         HopGradAccum& accum);

void finish_hop_backward(const ModelParameters& params, const HopProjections& proj,
                         const HopGradAccum& accum, ModelParameters& grads);

// --- fusion ----------------------------------------------------------------
//
// v* = v || mean_k(hops_k); `hops` holds K consecutive d-vectors. K = 0 gives
// a zero second half.

void fuse(std::span<const double> interactive, std::span<const double> hops, std::size_t depth,
          std::span<double> out);

std::vector<double> fuse(std::span<const double> interactive, std::span<const double> hops,
                         std::size_t depth);

// Accumulates into grad_interactive and every hop slot of grad_hops.
void fuse_backward(std::span<const double> grad_out, std::size_t depth,
                   std::span<double> grad_interactive, std::span<double> grad_hops);

}  // namespace kper
