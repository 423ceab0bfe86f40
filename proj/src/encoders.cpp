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

#include "kper/encoders.hpp"

#include <algorithm>
#include <cassert>

namespace kper {

using linalg::axpy;
using linalg::dot;

void encode_interactive(const Matrix& neighbor_table, std::span<const double> target,
                        std::span<const Id> neighbors, std::span<double> out,
                        std::span<double> alpha) {
  std::fill(out.begin(), out.end(), 0.0);
  if (neighbors.empty()) return;
  assert(alpha.size() == neighbors.size());
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    alpha[j] = dot(target, neighbor_table.row(neighbors[j]));
  }
  linalg::softmax(alpha);
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    axpy(alpha[j], neighbor_table.row(neighbors[j]), out);
  }
}

std::vector<double> encode_interactive(const Matrix& neighbor_table,
                                       std::span<const double> target,
                                       std::span<const Id> neighbors) {
  std::vector<double> out(neighbor_table.cols());
  std::vector<double> alpha(neighbors.size());
  encode_interactive(neighbor_table, target, neighbors, out, alpha);
  return out;
}

void encode_interactive_backward(const Matrix& neighbor_table, std::span<const double> target,
                                 std::span<const Id> neighbors, std::span<const double> alpha,
                                 std::span<const double> grad_out, Matrix& grad_table,
                                 std::span<double> grad_target, std::span<double> scratch) {
  if (neighbors.empty()) return;
  std::span<double> g_logit = scratch.first(neighbors.size());
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    g_logit[j] = dot(grad_out, neighbor_table.row(neighbors[j]));
  }
  linalg::softmax_backward(alpha, g_logit);
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    auto row = neighbor_table.row(neighbors[j]);
    auto g_row = grad_table.row(neighbors[j]);
    axpy(alpha[j], grad_out, g_row);
    axpy(g_logit[j], target, g_row);
    axpy(g_logit[j], row, grad_target);
  }
}

void encode_hop(const ModelParameters& params, std::span<const Triple> triples,
                std::span<double> out, HopTrace& trace) {
  std::fill(out.begin(), out.end(), 0.0);
  if (triples.empty()) return;
  const std::size_t hidden = params.attn_w1.rows();
  const std::size_t d = params.entity_table.cols();
  trace.resize(triples.size(), hidden);
  auto b1 = params.attn_b1.row(0);
  auto w2 = params.attn_w2.row(0);
  const double b2 = params.attn_b2(0, 0);
  for (std::size_t j = 0; j < triples.size(); ++j) {
    std::span<double> pre(trace.pre.data() + j * hidden, hidden);
    linalg::gemv(params.attn_w1, params.entity_table.row(triples[j].head), pre, false, 0);
    linalg::gemv(params.attn_w1, params.relation_table.row(triples[j].relation), pre, true, d);
    double score = b2;
    for (std::size_t h = 0; h < hidden; ++h) {
      pre[h] += b1[h];
      if (pre[h] > 0.0) score += w2[h] * pre[h];
    }
    trace.pi[j] = score;
  }
  linalg::softmax(std::span<double>(trace.pi.data(), triples.size()));
  for (std::size_t j = 0; j < triples.size(); ++j) {
    axpy(trace.pi[j], params.entity_table.row(triples[j].tail), out);
  }
}

std::vector<double> encode_hop(const ModelParameters& params, std::span<const Triple> triples) {
  std::vector<double> out(params.entity_table.cols());
  HopTrace trace;
  encode_hop(params, triples, out, trace);
  return out;
}

void encode_hop_backward(const ModelParameters& params, std::span<const Triple> triples,
                         const HopTrace& trace, std::span<const double> grad_out,
                         ModelParameters& grads) {
  if (triples.empty()) return;
  const std::size_t hidden = params.attn_w1.rows();
  const std::size_t d = params.entity_table.cols();
  std::vector<double> g_score(triples.size());
  for (std::size_t j = 0; j < triples.size(); ++j) {
    g_score[j] = dot(grad_out, params.entity_table.row(triples[j].tail));
    axpy(trace.pi[j], grad_out, grads.entity_table.row(triples[j].tail));
  }
  linalg::softmax_backward(std::span<const double>(trace.pi.data(), triples.size()), g_score);

  auto w2 = params.attn_w2.row(0);
  auto g_w2 = grads.attn_w2.row(0);
  auto g_b1 = grads.attn_b1.row(0);
  std::vector<double> g_pre(hidden);
  for (std::size_t j = 0; j < triples.size(); ++j) {
    const double gs = g_score[j];
    grads.attn_b2(0, 0) += gs;
    std::span<const double> pre(trace.pre.data() + j * hidden, hidden);
    for (std::size_t h = 0; h < hidden; ++h) {
      if (pre[h] > 0.0) {
        g_w2[h] += gs * pre[h];
        g_pre[h] = gs * w2[h];
      } else {
        g_pre[h] = 0.0;
      }
      g_b1[h] += g_pre[h];
    }
    auto head = params.entity_table.row(triples[j].head);
    auto rel = params.relation_table.row(triples[j].relation);
    linalg::outer_acc(grads.attn_w1, g_pre, head, 0);
    linalg::outer_acc(grads.attn_w1, g_pre, rel, d);
    linalg::gemv_t_acc(params.attn_w1, g_pre, grads.entity_table.row(triples[j].head), 0);
    linalg::gemv_t_acc(params.attn_w1, g_pre, grads.relation_table.row(triples[j].relation), d);
  }
}

HopProjections project_hops(const ModelParameters& params, std::span<const Id> heads) {
  const std::size_t hidden = params.attn_w1.rows();
  const std::size_t d = params.entity_table.cols();
  HopProjections p;
  p.head_slot.assign(params.entity_table.rows(), -1);
  for (Id h : heads) {
    if (p.head_slot[h] >= 0) continue;
    p.head_slot[h] = static_cast<std::int32_t>(p.heads.size());
    p.heads.push_back(h);
  }
  p.head = Matrix(p.heads.size(), hidden);
  for (std::size_t k = 0; k < p.heads.size(); ++k) {
    linalg::gemv(params.attn_w1, params.entity_table.row(p.heads[k]), p.head.row(k), false, 0);
  }
  p.rel = Matrix(params.relation_table.rows(), hidden);
  for (std::size_t r = 0; r < p.rel.rows(); ++r) {
    linalg::gemv(params.attn_w1, params.relation_table.row(r), p.rel.row(r), false, d);
  }
  return p;
}

void encode_hop(const ModelParameters& params, const HopProjections& proj,
                std::span<const Triple> triples, std::span<double> out, HopTrace& trace) {
  std::fill(out.begin(), out.end(), 0.0);
  if (triples.empty()) return;
  const std::size_t hidden = params.attn_w1.rows();
  trace.resize(triples.size(), hidden);
  auto b1 = params.attn_b1.row(0);
  auto w2 = params.attn_w2.row(0);
  const double b2 = params.attn_b2(0, 0);
  for (std::size_t j = 0; j < triples.size(); ++j) {
    const std::int32_t slot = proj.head_slot[triples[j].head];
    assert(slot >= 0);
    auto hp = proj.head.row(static_cast<std::size_t>(slot));
    auto rp = proj.rel.row(triples[j].relation);
    double* pre = trace.pre.data() + j * hidden;
    double score = b2;
    for (std::size_t h = 0; h < hidden; ++h) {
      pre[h] = (hp[h] + rp[h]) + b1[h];
      if (pre[h] > 0.0) score += w2[h] * pre[h];
    }
    trace.pi[j] = score;
  }
  linalg::softmax(std::span<double>(trace.pi.data(), triples.size()));
  for (std::size_t j = 0; j < triples.size(); ++j) {
    axpy(trace.pi[j], params.entity_table.row(triples[j].tail), out);
  }
}

HopGradAccum HopGradAccum::zeros_like(const HopProjections& proj) {
  return {Matrix(proj.head.rows(), proj.head.cols()), Matrix(proj.rel.rows(), proj.rel.cols())};
}

void encode_hop_backward(const ModelParameters& params, const HopProjections& proj,
                         std::span<const Triple> triples, const HopTrace& trace,
                         std::span<const double> grad_out, ModelParameters& grads,
                         HopGradAccum& accum) {
  if (triples.empty()) return;
  const std::size_t hidden = params.attn_w1.rows();
  std::vector<double> g_score(triples.size());
  for (std::size_t j = 0; j < triples.size(); ++j) {
    g_score[j] = dot(grad_out, params.entity_table.row(triples[j].tail));
    axpy(trace.pi[j], grad_out, grads.entity_table.row(triples[j].tail));
  }
  linalg::softmax_backward(std::span<const double>(trace.pi.data(), triples.size()), g_score);

  auto w2 = params.attn_w2.row(0);
  auto g_w2 = grads.attn_w2.row(0);
  auto g_b1 = grads.attn_b1.row(0);
  for (std::size_t j = 0; j < triples.size(); ++j) {
    const double gs = g_score[j];
    grads.attn_b2(0, 0) += gs;
    const double* pre = trace.pre.data() + j * hidden;
    auto gh = accum.head.row(static_cast<std::size_t>(proj.head_slot[triples[j].head]));
    auto gr = accum.rel.row(triples[j].relation);
    for (std::size_t h = 0; h < hidden; ++h) {
      if (pre[h] > 0.0) {
        g_w2[h] += gs * pre[h];
        const double g = gs * w2[h];
        g_b1[h] += g;
        gh[h] += g;
        gr[h] += g;
      }
    }
  }
}

void finish_hop_backward(const ModelParameters& params, const HopProjections& proj,
                         const HopGradAccum& accum, ModelParameters& grads) {
  const std::size_t d = params.entity_table.cols();
  for (std::size_t k = 0; k < proj.heads.size(); ++k) {
    const Id e = proj.heads[k];
    auto g = accum.head.row(k);
    linalg::outer_acc(grads.attn_w1, g, params.entity_table.row(e), 0);
    linalg::gemv_t_acc(params.attn_w1, g, grads.entity_table.row(e), 0);
  }
  for (std::size_t r = 0; r < accum.rel.rows(); ++r) {
    auto g = accum.rel.row(r);
    linalg::outer_acc(grads.attn_w1, g, params.relation_table.row(r), d);
    linalg::gemv_t_acc(params.attn_w1, g, grads.relation_table.row(r), d);
  }
}

void fuse(std::span<const double> interactive, std::span<const double> hops, std::size_t depth,
          std::span<double> out) {
  const std::size_t d = interactive.size();
  assert(out.size() == 2 * d && hops.size() == depth * d);
  std::copy(interactive.begin(), interactive.end(), out.begin());
  std::span<double> mean = out.subspan(d, d);
  std::fill(mean.begin(), mean.end(), 0.0);
  if (depth == 0) return;
  for (std::size_t k = 0; k < depth; ++k) axpy(1.0, hops.subspan(k * d, d), mean);
  for (double& x : mean) x /= static_cast<double>(depth);
}

std::vector<double> fuse(std::span<const double> interactive, std::span<const double> hops,
                         std::size_t depth) {
  std::vector<double> out(2 * interactive.size());
  fuse(interactive, hops, depth, out);
  return out;
}

void fuse_backward(std::span<const double> grad_out, std::size_t depth,
                   std::span<double> grad_interactive, std::span<double> grad_hops) {
  const std::size_t d = grad_interactive.size();
  axpy(1.0, grad_out.first(d), grad_interactive);
  if (depth == 0) return;
  const double inv = 1.0 / static_cast<double>(depth);
  for (std::size_t k = 0; k < depth; ++k) axpy(inv, grad_out.subspan(d, d), grad_hops.subspan(k * d, d));
}

}  // namespace kper
