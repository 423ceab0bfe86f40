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

#include "kper/model.hpp"

#include <algorithm>
#include <cmath>

#include "kper/parallel.hpp"
#include "kper/rng.hpp"
#include "kper/scoring.hpp"

namespace kper {

namespace {

constexpr std::uint64_t kGateSalt = 0x9a7e;
constexpr std::uint64_t kEvalSalt = 0xe7a1;

const Matrix& neighbor_table(const ModelParameters& p, NodeKind kind) {
  return kind == NodeKind::kUser ? p.entity_table : p.user_table;
}
Matrix& neighbor_table(ModelParameters& p, NodeKind kind) {
  return kind == NodeKind::kUser ? p.entity_table : p.user_table;
}

bool prob_clamped(double p) { return p < kProbFloor || p > 1.0 - kProbFloor; }

}  // namespace

ModelOptions ModelOptions::from(const TrainConfig& config) {
  ModelOptions o;
  o.depth = config.depth;
  o.tau = config.tau;
  o.eta = config.eta;
  o.use_referencing = config.use_referencing;
  o.masked = config.masked_referencing;
  return o;
}

ModelDims model_dims(const CollaborativeKnowledgeGraph& graph, const SeedPool& pool,
                     std::size_t dim) {
  ModelDims d;
  d.num_users = graph.num_users();
  d.num_entities = graph.num_entities();
  d.num_relations = graph.num_relations();
  d.dim = dim;
  d.hidden = dim;
  d.num_seeds = pool.size();
  return d;
}

GateNoise GateNoise::for_batch(std::uint64_t seed, std::uint64_t epoch, std::uint64_t batch) {
  GateNoise n;
  n.sampled = true;
  n.stream = mix_seed({seed, kGateSalt, epoch, batch});
  return n;
}

double GateNoise::logit(NodeKind kind, Id node, std::size_t x) const {
  if (!sampled) return 0.0;
  const double xi = counter_uniform(mix_seed({stream, static_cast<std::uint64_t>(kind), node}), x);
  return std::log(xi) - std::log1p(-xi);
}

void compute_node_hops(const ModelParameters& params, const TripleNeighborhoods& nb,
                       NodeKind kind, Id node, std::size_t depth, NodeHops& out) {
  const std::size_t d = params.entity_table.cols();
  out.hops.assign(depth * d, 0.0);
  out.traces.resize(depth);
  for (std::size_t k = 1; k <= depth; ++k) {
    encode_hop(params, nb.hop(kind, node, k), std::span<double>(out.hops).subspan((k - 1) * d, d),
               out.traces[k - 1]);
  }
}

void compute_node_hops(const ModelParameters& params, const HopProjections& proj,
                       const TripleNeighborhoods& nb, NodeKind kind, Id node, std::size_t depth,
                       NodeHops& out) {
  const std::size_t d = params.entity_table.cols();
  out.hops.assign(depth * d, 0.0);
  out.traces.resize(depth);
  for (std::size_t k = 1; k <= depth; ++k) {
    encode_hop(params, proj, nb.hop(kind, node, k),
               std::span<double>(out.hops).subspan((k - 1) * d, d), out.traces[k - 1]);
  }
}

void side_forward(const ModelParameters& params, const SeedPool& pool, const ModelOptions& opts,
                  NodeKind kind, Id node, std::span<const Id> neighbors,
                  std::span<const double> target, std::span<const double> hops,
                  const GateNoise& noise, SideTrace& tr, std::span<double> h) {
  const std::size_t d = params.entity_table.cols();
  tr.v.resize(d);
  tr.alpha.resize(neighbors.size());
  encode_interactive(neighbor_table(params, kind), target, neighbors, tr.v, tr.alpha);
  tr.v_star.resize(2 * d);
  fuse(tr.v, hops, opts.depth, tr.v_star);

  if (!opts.use_referencing) {
    tr.v_plus = tr.v_star;
  } else {
    const std::size_t count = pool.count(kind);
    const std::size_t row0 = pool.offset(kind);
    tr.pre.resize(count);
    tr.log_beta.resize(count);
    tr.gamma.resize(count);
    tr.gamma_rescaled.resize(count);
    tr.z_bar.resize(count);
    tr.weights.resize(count);
    auto b = params.probe_b.row(0);
    for (std::size_t x = 0; x < count; ++x) {
      tr.pre[x] = linalg::dot(params.probe_w.row(row0 + x), tr.v_star) + b[row0 + x];
      tr.log_beta[x] = std::clamp(tr.pre[x], -kLogBetaClamp, kLogBetaClamp);
      tr.gamma[x] = concrete_sample(tr.log_beta[x], noise.logit(kind, node, x), opts.tau);
      tr.gamma_rescaled[x] = stretch(tr.gamma[x], opts.eta);
      tr.z_bar[x] = std::max(tr.gamma_rescaled[x], 0.0);
    }
    tr.t_star.resize(2 * d);
    referencing_embedding(params.seed_table, row0, pool.slot(kind, node), tr.z_bar, opts.masked,
                          tr.t_star, tr.weights);
    tr.v_plus.resize(2 * d);
    gated_aggregate(params, tr.v_star, tr.t_star, tr.v_plus, tr.agg);
  }
  assemble(tr.v, hops, tr.v_plus, h);
}

double side_sparsity(const ModelOptions& opts, const SideTrace& tr) {
  if (!opts.use_referencing) return 0.0;
  return sparsity_penalty_log(tr.log_beta, opts.tau, opts.eta);
}

void side_backward(const ModelParameters& params, const SeedPool& pool, const ModelOptions& opts,
                   NodeKind kind, Id node, std::span<const Id> neighbors,
                   std::span<const double> target, const SideTrace& tr,
                   std::span<const double> grad_h, double sp_weight, ModelParameters& grads,
                   std::span<double> grad_target, std::span<double> grad_hops) {
  const std::size_t d = params.entity_table.cols();
  const std::size_t K = opts.depth;
  auto g_v_direct = grad_h.first(d);
  auto g_hops_direct = grad_h.subspan(d, K * d);
  auto g_v_plus = grad_h.subspan(d + K * d, 2 * d);

  std::vector<double> g_v_star(2 * d, 0.0);
  if (!opts.use_referencing) {
    linalg::axpy(1.0, g_v_plus, g_v_star);
  } else {
    const std::size_t count = pool.count(kind);
    const std::size_t row0 = pool.offset(kind);
    std::vector<double> g_t_star(2 * d, 0.0);
    gated_aggregate_backward(params, tr.v_star, tr.t_star, tr.agg, g_v_plus, grads, g_v_star,
                             g_t_star);
    std::vector<double> g_z(count);
    referencing_backward(params.seed_table, row0, pool.slot(kind, node), tr.weights, g_t_star,
                         grads.seed_table, g_z);
    const double log_neg_eta = std::log(-opts.eta);
    auto g_b = grads.probe_b.row(0);
    for (std::size_t x = 0; x < count; ++x) {
      double g_lb = 0.0;
      if (tr.gamma_rescaled[x] > 0.0) {
        const double g = tr.gamma[x];
        g_lb = g_z[x] * (1.0 - opts.eta) * g * (1.0 - g) / opts.tau;
      }
      if (sp_weight != 0.0) {
        const double p = linalg::sigmoid(tr.log_beta[x] - opts.tau * log_neg_eta);
        g_lb += sp_weight * p * (1.0 - p);
      }
      if (g_lb == 0.0 || tr.pre[x] <= -kLogBetaClamp || tr.pre[x] >= kLogBetaClamp) continue;
      linalg::axpy(g_lb, tr.v_star, grads.probe_w.row(row0 + x));
      g_b[row0 + x] += g_lb;
      linalg::axpy(g_lb, params.probe_w.row(row0 + x), g_v_star);
    }
  }

  std::vector<double> g_v(g_v_direct.begin(), g_v_direct.end());
  fuse_backward(g_v_star, K, g_v, grad_hops);
  linalg::axpy(1.0, g_hops_direct, grad_hops);
  std::vector<double> scratch(neighbors.size());
  encode_interactive_backward(neighbor_table(params, kind), target, neighbors, tr.alpha, g_v,
                              neighbor_table(grads, kind), grad_target, scratch);
}

BatchOutput batch_forward_backward(const BatchContext& ctx, std::span<const Interaction> batch,
                                   ModelParameters* grads) {
  const ModelParameters& params = ctx.params;
  const std::size_t n = batch.size();
  const std::size_t d = params.entity_table.cols();
  const std::size_t K = ctx.opts.depth;
  const std::size_t hsize = representation_size(d, K);

  // distinct nodes in order of first appearance
  std::vector<std::int32_t> user_index(ctx.nb.num_nodes(NodeKind::kUser), -1);
  std::vector<std::int32_t> item_index(ctx.nb.num_nodes(NodeKind::kItem), -1);
  struct NodeRef {
    NodeKind kind;
    Id node;
  };
  std::vector<NodeRef> nodes;
  std::vector<std::uint32_t> pair_u(n), pair_i(n);
  std::vector<std::uint8_t> u_first(n), i_first(n);
  for (std::size_t p = 0; p < n; ++p) {
    auto& ui = user_index[batch[p].user];
    u_first[p] = ui < 0;
    if (ui < 0) {
      ui = static_cast<std::int32_t>(nodes.size());
      nodes.push_back({NodeKind::kUser, batch[p].user});
    }
    pair_u[p] = static_cast<std::uint32_t>(ui);
    auto& ii = item_index[batch[p].item];
    i_first[p] = ii < 0;
    if (ii < 0) {
      ii = static_cast<std::int32_t>(nodes.size());
      nodes.push_back({NodeKind::kItem, batch[p].item});
    }
    pair_i[p] = static_cast<std::uint32_t>(ii);
  }

  std::vector<Id> heads;
  for (const auto& nd : nodes) {
    for (std::size_t hop = 1; hop <= K; ++hop) {
      for (const Triple& tr : ctx.nb.hop(nd.kind, nd.node, hop)) heads.push_back(tr.head);
    }
  }
  const HopProjections proj = project_hops(params, heads);
  std::vector<NodeHops> hops(nodes.size());
  parallel_for(nodes.size(), ctx.threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t k = b; k < e; ++k) {
      compute_node_hops(params, proj, ctx.nb, nodes[k].kind, nodes[k].node, K, hops[k]);
    }
  });

  const std::size_t threads = effective_threads(n, ctx.threads);
  std::vector<ModelParameters> local;
  if (grads != nullptr && threads > 1) {
    local.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) local.push_back(ModelParameters::zeros(params.dims()));
  }
  auto grads_for = [&](std::size_t t) -> ModelParameters& {
    return t == 0 ? *grads : local[t - 1];
  };

  BatchOutput out;
  out.probs.resize(n);
  std::vector<double> ce_terms(n), sp_terms(n);
  std::vector<double> g_hops_u, g_hops_i;
  if (grads != nullptr) {
    g_hops_u.assign(n * K * d, 0.0);
    g_hops_i.assign(n * K * d, 0.0);
  }

  parallel_for(n, ctx.threads, [&](std::size_t b, std::size_t e, std::size_t t) {
    SideTrace su, si;
    std::vector<double> h_u(hsize), h_i(hsize), gh_u(hsize), gh_i(hsize);
    for (std::size_t p = b; p < e; ++p) {
      const Id u = batch[p].user;
      const Id i = batch[p].item;
      auto nb_u = ctx.nb.interactive(NodeKind::kUser, u);
      auto nb_i = ctx.nb.interactive(NodeKind::kItem, i);
      auto target_u = params.entity_table.row(i);
      auto target_i = params.user_table.row(u);
      const auto& hu = hops[pair_u[p]].hops;
      const auto& hi = hops[pair_i[p]].hops;
      side_forward(params, ctx.pool, ctx.opts, NodeKind::kUser, u, nb_u, target_u, hu, ctx.noise,
                   su, h_u);
      side_forward(params, ctx.pool, ctx.opts, NodeKind::kItem, i, nb_i, target_i, hi, ctx.noise,
                   si, h_i);
      const double raw = linalg::dot(h_u, h_i);
      const double prob = linalg::sigmoid(raw);
      const double pc = clamp_prob(prob);
      const bool y = batch[p].label != 0;
      out.probs[p] = prob;
      ce_terms[p] = y ? -std::log(pc) : -std::log1p(-pc);
      sp_terms[p] = (u_first[p] ? side_sparsity(ctx.opts, su) : 0.0) +
                    (i_first[p] ? side_sparsity(ctx.opts, si) : 0.0);
      if (grads == nullptr) continue;

      ModelParameters& g = grads_for(t);
      const double g_raw = prob_clamped(prob) ? 0.0 : (prob - (y ? 1.0 : 0.0)) / static_cast<double>(n);
      for (std::size_t k = 0; k < hsize; ++k) {
        gh_u[k] = g_raw * h_i[k];
        gh_i[k] = g_raw * h_u[k];
      }
      const double spw_u = u_first[p] ? ctx.lambda1 : 0.0;
      const double spw_i = i_first[p] ? ctx.lambda1 : 0.0;
      side_backward(params, ctx.pool, ctx.opts, NodeKind::kUser, u, nb_u, target_u, su, gh_u,
                    spw_u, g, g.entity_table.row(i),
                    std::span<double>(g_hops_u).subspan(p * K * d, K * d));
      side_backward(params, ctx.pool, ctx.opts, NodeKind::kItem, i, nb_i, target_i, si, gh_i,
                    spw_i, g, g.user_table.row(u),
                    std::span<double>(g_hops_i).subspan(p * K * d, K * d));
    }
  });

  for (std::size_t p = 0; p < n; ++p) {
    out.ce += ce_terms[p];
    out.sp += sp_terms[p];
  }
  if (n > 0) out.ce /= static_cast<double>(n);
  if (grads == nullptr || K == 0) {
    for (auto& m : local) add_scaled(*grads, m);
    return out;
  }

  std::vector<double> node_grad(nodes.size() * K * d, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    linalg::axpy(1.0, std::span<const double>(g_hops_u).subspan(p * K * d, K * d),
                 std::span<double>(node_grad).subspan(pair_u[p] * K * d, K * d));
    linalg::axpy(1.0, std::span<const double>(g_hops_i).subspan(p * K * d, K * d),
                 std::span<double>(node_grad).subspan(pair_i[p] * K * d, K * d));
  }
  parallel_for(nodes.size(), threads, [&](std::size_t b, std::size_t e, std::size_t t) {
    ModelParameters& g = grads_for(t);
    HopGradAccum accum = HopGradAccum::zeros_like(proj);
    for (std::size_t k = b; k < e; ++k) {
      for (std::size_t hop = 1; hop <= K; ++hop) {
        encode_hop_backward(params, proj, ctx.nb.hop(nodes[k].kind, nodes[k].node, hop),
                            hops[k].traces[hop - 1],
                            std::span<const double>(node_grad).subspan((k * K + hop - 1) * d, d),
                            g, accum);
      }
    }
    finish_hop_backward(params, proj, accum, g);
  });
  for (auto& m : local) add_scaled(*grads, m);
  return out;
}

namespace {

void hop_mean(std::span<const double> hops, std::size_t depth, std::size_t d,
              std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (depth == 0) return;
  for (std::size_t k = 0; k < depth; ++k) linalg::axpy(1.0, hops.subspan(k * d, d), out);
  for (double& x : out) x /= static_cast<double>(depth);
}

}  // namespace

struct ModelScorer::SideState {
  std::vector<double> alpha;
  std::vector<double> v;
  std::vector<double> m;
  std::vector<double> pre;
  std::vector<double> z_bar;
  std::vector<double> a;
  std::vector<double> g;
  std::vector<double> cross;  // partner seed rows . v*
  double w1 = 1.0;
  double w2 = 0.0;
};

ModelScorer::ModelScorer(const ModelParameters& params, const SeedPool& pool,
                         const ModelOptions& opts, const TripleNeighborhoods& nb)
    : params_(params), pool_(pool), opts_(opts), nb_(nb) {
  const std::size_t d = params.entity_table.cols();
  const std::size_t K = opts.depth;
  const std::size_t nu = nb.num_nodes(NodeKind::kUser);
  const std::size_t ni = nb.num_nodes(NodeKind::kItem);
  user_hops_.assign(nu * K * d, 0.0);
  item_hops_.assign(ni * K * d, 0.0);
  std::vector<Id> all_entities(params.entity_table.rows());
  for (std::size_t e = 0; e < all_entities.size(); ++e) all_entities[e] = static_cast<Id>(e);
  const HopProjections proj =
      K > 0 ? project_hops(params, all_entities) : HopProjections{};
  NodeHops tmp;
  for (Id u = 0; u < nu; ++u) {
    compute_node_hops(params, proj, nb, NodeKind::kUser, u, K, tmp);
    std::copy(tmp.hops.begin(), tmp.hops.end(), user_hops_.begin() + u * K * d);
  }
  for (Id i = 0; i < ni; ++i) {
    compute_node_hops(params, proj, nb, NodeKind::kItem, i, K, tmp);
    std::copy(tmp.hops.begin(), tmp.hops.end(), item_hops_.begin() + i * K * d);
  }
  users_.kind = NodeKind::kUser;
  items_.kind = NodeKind::kItem;
  if (!opts.use_referencing) return;

  const Matrix& seeds = params.seed_table;
  auto build = [&](SideCache& side, const Matrix& table, std::size_t table_rows,
                   std::size_t nodes, const std::vector<double>& all_hops) {
    const NodeKind other = side.kind == NodeKind::kUser ? NodeKind::kItem : NodeKind::kUser;
    side.seeds = pool.count(side.kind);
    side.row0 = pool.offset(side.kind);
    side.other_seeds = pool.count(other);
    const std::size_t orow0 = pool.offset(other);
    side.P = Matrix(table_rows, side.seeds);
    side.Q = Matrix(table_rows, d);
    side.X = Matrix(table_rows, side.other_seeds);
    for (std::size_t n = 0; n < table_rows; ++n) {
      const double* t = table.row(n).data();
      for (std::size_t x = 0; x < side.seeds; ++x) {
        side.P(n, x) = linalg::dot(t, params.probe_w.row(side.row0 + x).data(), d);
      }
      for (std::size_t h = 0; h < d; ++h) side.Q(n, h) = linalg::dot(t, params.gate_w.row(h).data(), d);
      for (std::size_t y = 0; y < side.other_seeds; ++y) {
        side.X(n, y) = linalg::dot(t, seeds.row(orow0 + y).data(), d);
      }
    }
    side.R = Matrix(side.seeds, d);
    for (std::size_t x = 0; x < side.seeds; ++x) {
      for (std::size_t h = 0; h < d; ++h) {
        side.R(x, h) = linalg::dot(seeds.row(side.row0 + x), params.gate_w.row(h));
      }
    }
    side.c = Matrix(nodes, side.seeds);
    side.q = Matrix(nodes, d);
    side.x = Matrix(nodes, side.other_seeds);
    std::vector<double> m(d);
    auto pb = params.probe_b.row(0);
    auto gb = params.gate_b.row(0);
    for (std::size_t o = 0; o < nodes; ++o) {
      hop_mean(std::span<const double>(all_hops.data() + o * K * d, K * d), K, d, m);
      for (std::size_t x = 0; x < side.seeds; ++x) {
        side.c(o, x) = linalg::dot(params.probe_w.row(side.row0 + x).data() + d, m.data(), d) +
                       pb[side.row0 + x];
      }
      for (std::size_t h = 0; h < d; ++h) {
        side.q(o, h) = linalg::dot(params.gate_w.row(h).data() + d, m.data(), d) + gb[h];
      }
      for (std::size_t y = 0; y < side.other_seeds; ++y) {
        side.x(o, y) = linalg::dot(seeds.row(orow0 + y).data() + d, m.data(), d);
      }
    }
  };
  build(users_, params.entity_table, ni, nu, user_hops_);
  build(items_, params.user_table, nu, ni, item_hops_);

  const std::size_t su = pool.count(NodeKind::kUser);
  const std::size_t si = pool.count(NodeKind::kItem);
  seed_gram_ = Matrix(su, si);
  for (std::size_t x = 0; x < su; ++x) {
    for (std::size_t y = 0; y < si; ++y) {
      seed_gram_(x, y) = linalg::dot(seeds.row(x), seeds.row(su + y));
    }
  }
}

void ModelScorer::side_state(const SideCache& side, Id node, std::span<const double> target,
                             std::span<const double> hops, SideState& st) const {
  const std::size_t d = params_.entity_table.cols();
  auto neighbors = nb_.interactive(side.kind, node);
  const Matrix& table = side.kind == NodeKind::kUser ? params_.entity_table : params_.user_table;
  const std::size_t l = neighbors.size();
  st.alpha.resize(l);
  st.v.assign(d, 0.0);
  for (std::size_t j = 0; j < l; ++j) st.alpha[j] = linalg::dot(target, table.row(neighbors[j]));
  linalg::softmax(st.alpha);
  for (std::size_t j = 0; j < l; ++j) linalg::axpy(st.alpha[j], table.row(neighbors[j]), st.v);
  st.m.resize(d);
  hop_mean(hops, opts_.depth, d, st.m);
  if (!opts_.use_referencing) return;

  // selection confidence and gates, with the v part of v* taken through P
  const std::size_t S = side.seeds;
  st.pre.assign(side.c.row(node).begin(), side.c.row(node).end());
  for (std::size_t j = 0; j < l; ++j) linalg::axpy(st.alpha[j], side.P.row(neighbors[j]), st.pre);
  st.z_bar.resize(S);
  for (std::size_t x = 0; x < S; ++x) {
    const double lb = std::clamp(st.pre[x], -kLogBetaClamp, kLogBetaClamp);
    st.z_bar[x] = std::max(stretch(concrete_sample(lb, 0.0, opts_.tau), opts_.eta), 0.0);
  }
  st.a.resize(S);
  const std::int32_t slot = pool_.slot(side.kind, node);
  std::fill(st.a.begin(), st.a.end(), 0.0);
  if (slot >= 0) {
    st.a[static_cast<std::size_t>(slot)] = 1.0;
  } else if (opts_.masked) {
    bool any = false;
    double top = 0.0;
    for (double z : st.z_bar) {
      if (z > 0.0) {
        top = any ? std::max(top, z) : z;
        any = true;
      }
    }
    if (any) {
      double total = 0.0;
      for (std::size_t x = 0; x < S; ++x) {
        if (st.z_bar[x] > 0.0) {
          st.a[x] = std::exp(st.z_bar[x] - top);
          total += st.a[x];
        }
      }
      for (double& w : st.a) w /= total;
    }
  } else {
    std::copy(st.z_bar.begin(), st.z_bar.end(), st.a.begin());
    linalg::softmax(st.a);
  }

  // gate signals for v* and t*
  auto q = params_.gate_q.row(0);
  st.g.assign(side.q.row(node).begin(), side.q.row(node).end());
  for (std::size_t j = 0; j < l; ++j) linalg::axpy(st.alpha[j], side.Q.row(neighbors[j]), st.g);
  double c1 = 0.0;
  for (std::size_t h = 0; h < d; ++h) c1 += q[h] * linalg::sigmoid(st.g[h]);
  auto gb = params_.gate_b.row(0);
  st.g.assign(gb.begin(), gb.end());
  for (std::size_t x = 0; x < S; ++x) {
    if (st.a[x] != 0.0) linalg::axpy(st.a[x], side.R.row(x), st.g);
  }
  double c2 = 0.0;
  for (std::size_t h = 0; h < d; ++h) c2 += q[h] * linalg::sigmoid(st.g[h]);
  st.w1 = linalg::sigmoid(c1 - c2);
  st.w2 = 1.0 - st.w1;

  st.cross.assign(side.x.row(node).begin(), side.x.row(node).end());
  for (std::size_t j = 0; j < l; ++j) linalg::axpy(st.alpha[j], side.X.row(neighbors[j]), st.cross);
}

void ModelScorer::score(Id user, std::span<const Id> items, std::span<double> out) const {
  const std::size_t d = params_.entity_table.cols();
  const std::size_t K = opts_.depth;
  std::span<const double> hu(user_hops_.data() + user * K * d, K * d);
  auto target_i = params_.user_table.row(user);
  SideState su, si;
  std::vector<double> gram_ai(pool_.count(NodeKind::kUser));
  for (std::size_t k = 0; k < items.size(); ++k) {
    const Id i = items[k];
    std::span<const double> hi(item_hops_.data() + i * K * d, K * d);
    side_state(users_, user, params_.entity_table.row(i), hu, su);
    side_state(items_, i, target_i, hi, si);
    const double vv = linalg::dot(su.v, si.v);
    const double mm = linalg::dot(su.m, si.m);
    double s = vv + linalg::dot(hu, hi);
    if (!opts_.use_referencing) {
      s += vv + mm;
    } else {
      const double vt = linalg::dot(si.a, su.cross);
      const double tv = linalg::dot(su.a, si.cross);
      linalg::gemv(seed_gram_, si.a, gram_ai);
      const double tt = linalg::dot(su.a, gram_ai);
      s += su.w1 * si.w1 * (vv + mm) + su.w1 * si.w2 * vt + su.w2 * si.w1 * tv +
           su.w2 * si.w2 * tt;
    }
    out[k] = s;
  }
}

void ModelScorer::score_reference(Id user, std::span<const Id> items,
                                  std::span<double> out) const {
  const std::size_t d = params_.entity_table.cols();
  const std::size_t K = opts_.depth;
  const std::size_t hsize = representation_size(d, K);
  const GateNoise noise = GateNoise::deterministic();
  SideTrace su, si;
  std::vector<double> h_u(hsize), h_i(hsize);
  std::span<const double> hu(user_hops_.data() + user * K * d, K * d);
  auto nb_u = nb_.interactive(NodeKind::kUser, user);
  auto target_i = params_.user_table.row(user);
  for (std::size_t k = 0; k < items.size(); ++k) {
    const Id i = items[k];
    std::span<const double> hi(item_hops_.data() + i * K * d, K * d);
    side_forward(params_, pool_, opts_, NodeKind::kUser, user, nb_u, params_.entity_table.row(i),
                 hu, noise, su, h_u);
    side_forward(params_, pool_, opts_, NodeKind::kItem, i, nb_.interactive(NodeKind::kItem, i),
                 target_i, hi, noise, si, h_i);
    out[k] = linalg::dot(h_u, h_i);
  }
}

double ModelScorer::score(Id user, Id item) const {
  double s = 0.0;
  score(user, std::span<const Id>(&item, 1), std::span<double>(&s, 1));
  return s;
}

double ModelScorer::probability(Id user, Id item) const {
  return linalg::sigmoid(score(user, item));
}

TripleNeighborhoods evaluation_neighborhoods(const CollaborativeKnowledgeGraph& train_graph,
                                             const TrainConfig& config) {
  return build_neighborhoods(train_graph, config.sample_size, config.depth,
                             mix_seed({config.seed, kEvalSalt}), 0, config.threads);
}

}  // namespace kper
