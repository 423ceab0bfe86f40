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

#include "kper/seed_referencing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "kper/errors.hpp"

namespace kper {

namespace {

std::vector<Id> pick_side(std::size_t n, const std::vector<std::size_t>& degree,
                          std::size_t size_per_side, double exclusion_quantile,
                          const char* side, std::vector<std::string>* warnings) {
  std::vector<Id> order(n);
  std::iota(order.begin(), order.end(), Id{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Id a, Id b) { return degree[a] > degree[b]; });
  const auto excluded = static_cast<std::size_t>(
      std::floor(std::clamp(exclusion_quantile, 0.0, 1.0) * static_cast<double>(n)));
  std::size_t eligible = n - excluded;
  if (eligible < size_per_side && warnings != nullptr) {
    warnings->push_back(std::string("seed pool: only ") + std::to_string(eligible) + " " + side +
                        " nodes eligible, wanted " + std::to_string(size_per_side));
  }
  order.resize(std::min(eligible, size_per_side));
  return order;
}

std::vector<std::int32_t> slots_for(std::size_t n, const std::vector<Id>& seeds) {
  std::vector<std::int32_t> slot(n, -1);
  for (std::size_t a = 0; a < seeds.size(); ++a) slot[seeds[a]] = static_cast<std::int32_t>(a);
  return slot;
}

}  // namespace

SeedPool build_seed_pool(const CollaborativeKnowledgeGraph& graph, std::size_t size_per_side,
                         double exclusion_quantile, std::vector<std::string>* warnings) {
  std::vector<std::size_t> user_degree(graph.num_users());
  std::vector<std::size_t> item_degree(graph.num_items());
  for (Id u = 0; u < graph.num_users(); ++u) user_degree[u] = graph.user_items(u).size();
  for (Id i = 0; i < graph.num_items(); ++i) item_degree[i] = graph.item_users(i).size();

  SeedPool pool;
  pool.user_seeds = pick_side(graph.num_users(), user_degree, size_per_side,
                              exclusion_quantile, "user", warnings);
  pool.item_seeds = pick_side(graph.num_items(), item_degree, size_per_side,
                              exclusion_quantile, "item", warnings);
  for (Id u : pool.user_seeds) pool.user_degrees.push_back(user_degree[u]);
  for (Id i : pool.item_seeds) pool.item_degrees.push_back(item_degree[i]);
  pool.user_slot = slots_for(graph.num_users(), pool.user_seeds);
  pool.item_slot = slots_for(graph.num_items(), pool.item_seeds);
  return pool;
}

void write_seeds(const std::filesystem::path& path, const SeedPool& pool) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# kind\tinternal_id\tdegree\n";
  for (std::size_t a = 0; a < pool.user_seeds.size(); ++a) {
    out << "user\t" << pool.user_seeds[a] << '\t' << pool.user_degrees[a] << '\n';
  }
  for (std::size_t a = 0; a < pool.item_seeds.size(); ++a) {
    out << "item\t" << pool.item_seeds[a] << '\t' << pool.item_degrees[a] << '\n';
  }
}

SeedPool read_seeds(const std::filesystem::path& path, std::size_t num_users,
                    std::size_t num_items) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  SeedPool pool;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string kind;
    std::uint64_t id = 0;
    std::size_t degree = 0;
    if (!(fields >> kind >> id >> degree)) {
      throw ParseError(path.string(), lineno, "expected kind, id, degree");
    }
    if (kind == "user") {
      if (id >= num_users) throw ParseError(path.string(), lineno, "user id out of range");
      pool.user_seeds.push_back(static_cast<Id>(id));
      pool.user_degrees.push_back(degree);
    } else if (kind == "item") {
      if (id >= num_items) throw ParseError(path.string(), lineno, "item id out of range");
      pool.item_seeds.push_back(static_cast<Id>(id));
      pool.item_degrees.push_back(degree);
    } else {
      throw ParseError(path.string(), lineno, "unknown kind '" + kind + "'");
    }
  }
  pool.user_slot = slots_for(num_users, pool.user_seeds);
  pool.item_slot = slots_for(num_items, pool.item_seeds);
  return pool;
}

void selection_log_scores(const ModelParameters& params, std::size_t row0,
                          std::span<const double> v_star, std::span<double> log_beta) {
  auto b = params.probe_b.row(0);
  for (std::size_t x = 0; x < log_beta.size(); ++x) {
    const double pre = linalg::dot(params.probe_w.row(row0 + x), v_star) + b[row0 + x];
    log_beta[x] = std::clamp(pre, -kLogBetaClamp, kLogBetaClamp);
  }
}

std::vector<double> selection_scores(const ModelParameters& params,
                                     std::span<const double> v_star) {
  std::vector<double> beta(params.probe_w.rows());
  selection_log_scores(params, 0, v_star, beta);
  for (double& b : beta) b = std::exp(b);
  return beta;
}

double gate_open_probability(double log_beta, double tau, double eta) {
  return linalg::sigmoid(log_beta - tau * std::log(-eta));
}

namespace {

void check_gate_args(double tau, double eta) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(eta < 0.0)) throw std::invalid_argument("eta must be negative");
}

GateState make_state(std::span<const double> beta, double tau, double eta) {
  GateState s;
  s.beta.assign(beta.begin(), beta.end());
  s.gamma.resize(beta.size());
  s.gamma_rescaled.resize(beta.size());
  s.z_bar.resize(beta.size());
  s.tau = tau;
  s.eta = eta;
  return s;
}

void fill_gate(GateState& s, std::size_t x, double noise_logit) {
  s.gamma[x] = concrete_sample(std::log(s.beta[x]), noise_logit, s.tau);
  s.gamma_rescaled[x] = stretch(s.gamma[x], s.eta);
  s.z_bar[x] = std::max(s.gamma_rescaled[x], 0.0);
}

}  // namespace

GateState sample_gates(std::span<const double> beta, double tau, double eta,
                       std::span<const double> xi) {
  check_gate_args(tau, eta);
  if (xi.size() != beta.size()) throw std::invalid_argument("xi and beta differ in length");
  GateState s = make_state(beta, tau, eta);
  for (std::size_t x = 0; x < beta.size(); ++x) {
    if (!(xi[x] > 0.0 && xi[x] < 1.0)) throw std::invalid_argument("xi must lie in (0, 1)");
    fill_gate(s, x, std::log(xi[x]) - std::log1p(-xi[x]));
  }
  return s;
}

GateState sample_gates(std::span<const double> beta, double tau, double eta, Rng& rng) {
  std::vector<double> xi(beta.size());
  for (double& v : xi) v = rng.uniform_open();
  return sample_gates(beta, tau, eta, xi);
}

std::vector<double> deterministic_gates(std::span<const double> beta, double tau, double eta) {
  check_gate_args(tau, eta);
  GateState s = make_state(beta, tau, eta);
  for (std::size_t x = 0; x < beta.size(); ++x) fill_gate(s, x, 0.0);
  return s.z_bar;
}

void referencing_embedding(const Matrix& seed_table, std::size_t row0, std::int32_t slot,
                           std::span<const double> z_bar, bool masked, std::span<double> out,
                           std::span<double> weights) {
  const std::size_t count = z_bar.size();
  std::fill(weights.begin(), weights.end(), 0.0);
  if (slot >= 0) {
    auto row = seed_table.row(row0 + static_cast<std::size_t>(slot));
    std::copy(row.begin(), row.end(), out.begin());
    weights[static_cast<std::size_t>(slot)] = 1.0;
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  if (count == 0) return;
  if (masked) {
    // softmax restricted to open gates; closed ones keep weight 0
    double top = 0.0;
    bool any = false;
    for (double z : z_bar) {
      if (z > 0.0) {
        top = any ? std::max(top, z) : z;
        any = true;
      }
    }
    if (!any) return;
    double total = 0.0;
    for (std::size_t x = 0; x < count; ++x) {
      if (z_bar[x] > 0.0) {
        weights[x] = std::exp(z_bar[x] - top);
        total += weights[x];
      }
    }
    for (std::size_t x = 0; x < count; ++x) weights[x] /= total;
  } else {
    std::copy(z_bar.begin(), z_bar.end(), weights.begin());
    linalg::softmax(weights.first(count));
  }
  for (std::size_t x = 0; x < count; ++x) {
    if (weights[x] != 0.0) linalg::axpy(weights[x], seed_table.row(row0 + x), out);
  }
}

std::vector<double> referencing_embedding(const ModelParameters& params, const SeedPool& pool,
                                          NodeKind kind, Id node, std::span<const double> z_bar,
                                          bool masked) {
  if (z_bar.size() != pool.count(kind)) {
    throw std::invalid_argument("z_bar length does not match the seed block");
  }
  std::vector<double> out(params.seed_table.cols());
  std::vector<double> weights(z_bar.size());
  referencing_embedding(params.seed_table, pool.offset(kind), pool.slot(kind, node), z_bar,
                        masked, out, weights);
  return out;
}

void referencing_backward(const Matrix& seed_table, std::size_t row0, std::int32_t slot,
                          std::span<const double> weights, std::span<const double> grad_out,
                          Matrix& grad_seed_table, std::span<double> grad_z_bar) {
  const std::size_t count = weights.size();
  if (slot >= 0) {
    linalg::axpy(1.0, grad_out, grad_seed_table.row(row0 + static_cast<std::size_t>(slot)));
    std::fill(grad_z_bar.begin(), grad_z_bar.end(), 0.0);
    return;
  }
  for (std::size_t x = 0; x < count; ++x) {
    grad_z_bar[x] = linalg::dot(grad_out, seed_table.row(row0 + x));
    if (weights[x] != 0.0) linalg::axpy(weights[x], grad_out, grad_seed_table.row(row0 + x));
  }
  // closed entries in the masked variant have weight 0 and so get no gradient
  linalg::softmax_backward(weights, grad_z_bar.first(count));
}

namespace {

double gate_signal(const ModelParameters& params, std::span<const double> x,
                   std::vector<double>& s) {
  s.resize(params.gate_w.rows());
  linalg::gemv(params.gate_w, x, s);
  auto b = params.gate_b.row(0);
  for (std::size_t h = 0; h < s.size(); ++h) s[h] = linalg::sigmoid(s[h] + b[h]);
  return linalg::dot(params.gate_q.row(0), s);
}

void gate_signal_backward(const ModelParameters& params, std::span<const double> x,
                          const std::vector<double>& s, double g_c, ModelParameters& grads,
                          std::span<double> grad_x) {
  auto q = params.gate_q.row(0);
  linalg::axpy(g_c, s, grads.gate_q.row(0));
  std::vector<double> g_pre(s.size());
  for (std::size_t h = 0; h < s.size(); ++h) g_pre[h] = g_c * q[h] * s[h] * (1.0 - s[h]);
  linalg::axpy(1.0, g_pre, grads.gate_b.row(0));
  linalg::outer_acc(grads.gate_w, g_pre, x);
  linalg::gemv_t_acc(params.gate_w, g_pre, grad_x);
}

}  // namespace

void gated_aggregate(const ModelParameters& params, std::span<const double> v_star,
                     std::span<const double> t_star, std::span<double> out,
                     AggregateTrace& trace) {
  trace.c1 = gate_signal(params, v_star, trace.s1);
  trace.c2 = gate_signal(params, t_star, trace.s2);
  trace.w1 = linalg::sigmoid(trace.c1 - trace.c2);
  trace.w2 = 1.0 - trace.w1;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = trace.w1 * v_star[k] + trace.w2 * t_star[k];
  }
}

std::vector<double> gated_aggregate(const ModelParameters& params,
                                    std::span<const double> v_star,
                                    std::span<const double> t_star) {
  std::vector<double> out(v_star.size());
  AggregateTrace trace;
  gated_aggregate(params, v_star, t_star, out, trace);
  return out;
}

void gated_aggregate_backward(const ModelParameters& params, std::span<const double> v_star,
                              std::span<const double> t_star, const AggregateTrace& trace,
                              std::span<const double> grad_out, ModelParameters& grads,
                              std::span<double> grad_v_star, std::span<double> grad_t_star) {
  linalg::axpy(trace.w1, grad_out, grad_v_star);
  linalg::axpy(trace.w2, grad_out, grad_t_star);
  // d out / d c1 = w1 w2 (v* - t*), d out / d c2 = -(same)
  double g_diff = 0.0;
  for (std::size_t k = 0; k < grad_out.size(); ++k) {
    g_diff += grad_out[k] * (v_star[k] - t_star[k]);
  }
  const double g_c1 = trace.w1 * trace.w2 * g_diff;
  gate_signal_backward(params, v_star, trace.s1, g_c1, grads, grad_v_star);
  gate_signal_backward(params, t_star, trace.s2, -g_c1, grads, grad_t_star);
}

}  // namespace kper
