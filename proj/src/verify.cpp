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

#include "kper/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

#include "kper/evaluation.hpp"
#include "kper/scoring.hpp"
#include "kper/synthetic.hpp"

namespace kper {

namespace {

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double total_objective(const GradCheckInput& in, const ModelParameters& params) {
  BatchContext ctx{params, in.pool, in.opts, in.nb, GateNoise::deterministic(), in.lambda1, 1};
  const BatchOutput out = batch_forward_backward(ctx, in.batch, nullptr);
  return out.ce + in.lambda1 * out.sp + in.lambda2 * l2_squared(params);
}

ModelParameters total_gradient(const GradCheckInput& in, const ModelParameters& params) {
  ModelParameters grads = ModelParameters::zeros(params.dims());
  BatchContext ctx{params, in.pool, in.opts, in.nb, GateNoise::deterministic(), in.lambda1, 1};
  batch_forward_backward(ctx, in.batch, &grads);
  add_scaled(grads, params, 2.0 * in.lambda2);
  return grads;
}

std::vector<GroupError> gradient_check(const GradCheckInput& in, const ModelParameters& params,
                                       const ModelParameters& analytic, double step) {
  ModelParameters probe = params;
  std::vector<Matrix*> tensors;
  std::vector<std::string> names;
  probe.for_each([&](std::string_view n, Matrix& m) {
    tensors.push_back(&m);
    names.emplace_back(n);
  });
  std::vector<const Matrix*> grads;
  analytic.for_each([&](std::string_view, const Matrix& m) { grads.push_back(&m); });

  std::vector<GroupError> out;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    GroupError g;
    g.name = names[t];
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    auto flat = tensors[t]->flat();
    for (std::size_t j = 0; j < flat.size(); ++j) {
      const double saved = flat[j];
      flat[j] = saved + step;
      const double up = total_objective(in, probe);
      flat[j] = saved - step;
      const double down = total_objective(in, probe);
      flat[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grads[t]->flat()[j];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    g.analytic_norm = std::sqrt(a2);
    g.numeric_norm = std::sqrt(n2);
    // small-norm floor: a group whose true gradient vanishes (e.g. a bias
    // under softmax shift invariance) leaves only finite-difference noise
    g.rel_error = std::sqrt(diff2) / std::max(g.analytic_norm + g.numeric_norm, 1e-6);
    out.push_back(g);
  }
  return out;
}

GradFixture make_grad_fixture(std::uint64_t seed) {
  const SyntheticData data = generate_synthetic(SyntheticSpec::tiny(seed));
  GradFixture f;
  f.graph = synthetic_graph(data);
  f.pool = build_seed_pool(f.graph, 4, 0.0);
  f.opts.depth = 2;
  f.nb = build_neighborhoods(f.graph, 4, 2, seed, 0);
  f.batch = data.ratings;
  f.dims = model_dims(f.graph, f.pool, 8);
  return f;
}

ModelParameters random_parameters(const ModelDims& dims, std::uint64_t seed, double scale) {
  ModelParameters p = ModelParameters::zeros(dims);
  std::mt19937_64 rng(mix_seed({seed, 0x9a4}));
  std::uniform_real_distribution<double> dist(-scale, scale);
  p.for_each([&](std::string_view, Matrix& m) {
    for (double& x : m.flat()) x = dist(rng);
  });
  return p;
}

SuiteResult verify_gradients(const VerifyOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult r;
  r.name = "gradients";
  const GradFixture f = make_grad_fixture(options.seed);
  const GradCheckInput in{f.pool, f.opts, f.nb, f.batch, 0.1, 1e-3};
  for (std::size_t p = 0; p < options.grad_points; ++p) {
    const ModelParameters params = random_parameters(f.dims, mix_seed({options.seed, p}));
    ModelParameters analytic = total_gradient(in, params);
    if (options.corrupt_gradient) {
      for (double& x : analytic.probe_w.flat()) x *= 1.5;
    }
    double worst = 0.0;
    std::string worst_name;
    for (const auto& g : gradient_check(in, params, analytic)) {
      if (g.rel_error >= worst) {
        worst = g.rel_error;
        worst_name = g.name;
      }
    }
    const bool ok = worst < 1e-4;
    r.passed = r.passed && ok;
    r.lines.push_back(std::string(ok ? "PASS" : "FAIL") + " point " + std::to_string(p) +
                      ": worst relative error " + fmt("%.3g", worst) + " (" + worst_name + ")");
  }
  r.seconds = elapsed(t0);
  return r;
}

SuiteResult verify_gates(const VerifyOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult r;
  r.name = "gates";
  const std::size_t n = options.draws;
  std::uint64_t cell = 0;
  for (double beta : {0.5, 1.0, 2.0}) {
    for (double tau : {0.5, 1.0}) {
      for (double eta : {-1.0, -0.5, -0.1}) {
        Rng rng(mix_seed({options.seed, 0x6a7e, cell++}));
        const std::vector<double> betas(n, beta);
        const GateState s = sample_gates(betas, tau, eta, rng);
        const auto open = static_cast<double>(
            std::count_if(s.z_bar.begin(), s.z_bar.end(), [](double z) { return z > 0.0; }));
        const double p = gate_open_probability(std::log(beta), tau, eta);
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        const double emp = open / static_cast<double>(n);
        const bool ok_p = std::abs(emp - p) <= 3.0 * se;

        std::vector<double> z = s.z_bar;
        std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n / 2), z.end());
        const double median = z[n / 2];
        const double det = deterministic_gates(std::vector<double>{beta}, tau, eta)[0];
        const bool ok_m = std::abs(median - det) <= 1e-2;

        r.passed = r.passed && ok_p && ok_m;
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "%s beta=%g tau=%g eta=%g: P(open) %.4f vs %.4f (3se %.4f), median %.4f vs %.4f",
                      ok_p && ok_m ? "PASS" : "FAIL", beta, tau, eta, emp, p, 3.0 * se, median, det);
        r.lines.emplace_back(buf);
      }
    }
  }

  // summed sparsity term of a real batch against sampled gate openings
  const GradFixture f = make_grad_fixture(options.seed);
  const ModelParameters params = random_parameters(f.dims, mix_seed({options.seed, 0x5b}));
  BatchContext ctx{params, f.pool, f.opts, f.nb, GateNoise::deterministic(), 0.0, 1};
  const double sp = batch_forward_backward(ctx, f.batch, nullptr).sp;

  const std::size_t d = f.dims.dim;
  std::vector<char> seen_u(f.graph.num_users()), seen_i(f.graph.num_items());
  std::vector<double> log_betas;
  SideTrace tr;
  NodeHops hops;
  std::vector<double> h(representation_size(d, f.opts.depth));
  for (const auto& pair : f.batch) {
    for (NodeKind kind : {NodeKind::kUser, NodeKind::kItem}) {
      const bool user = kind == NodeKind::kUser;
      auto& seen = user ? seen_u : seen_i;
      const Id node = user ? pair.user : pair.item;
      if (seen[node]) continue;
      seen[node] = 1;
      compute_node_hops(params, f.nb, kind, node, f.opts.depth, hops);
      auto target = user ? params.entity_table.row(pair.item) : params.user_table.row(pair.user);
      side_forward(params, f.pool, f.opts, kind, node, f.nb.interactive(kind, node), target,
                   hops.hops, GateNoise::deterministic(), tr, h);
      log_betas.insert(log_betas.end(), tr.log_beta.begin(), tr.log_beta.end());
    }
  }
  double mc = 0.0, var = 0.0;
  Rng rng(mix_seed({options.seed, 0x5e}));
  std::vector<double> betas(n);
  for (double lb : log_betas) {
    std::fill(betas.begin(), betas.end(), std::exp(lb));
    const GateState s = sample_gates(betas, f.opts.tau, f.opts.eta, rng);
    mc += static_cast<double>(std::count_if(s.z_bar.begin(), s.z_bar.end(),
                                            [](double z) { return z > 0.0; })) /
          static_cast<double>(n);
    const double p = gate_open_probability(lb, f.opts.tau, f.opts.eta);
    var += p * (1.0 - p) / static_cast<double>(n);
  }
  const bool ok = std::abs(mc - sp) <= 3.0 * std::sqrt(var);
  r.passed = r.passed && ok;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s batch sparsity %.4f vs sampled %.4f over %zu entries (3se %.4f)",
                ok ? "PASS" : "FAIL", sp, mc, log_betas.size(), 3.0 * std::sqrt(var));
  r.lines.emplace_back(buf);
  r.seconds = elapsed(t0);
  return r;
}

namespace {

// Explicit score table, rows are users.
class TableScorer : public Scorer {
 public:
  TableScorer(std::size_t items, std::vector<double> scores)
      : items_(items), scores_(std::move(scores)) {}
  void score(Id user, std::span<const Id> items, std::span<double> out) const override {
    for (std::size_t k = 0; k < items.size(); ++k) out[k] = scores_[user * items_ + items[k]];
  }
  double probability(Id user, Id item) const override { return scores_[user * items_ + item]; }

 private:
  std::size_t items_;
  std::vector<double> scores_;
};

struct MetricFixture {
  std::string name;
  RankingTask task;
  std::vector<double> scores;
  std::vector<std::size_t> train_degree;
  std::vector<Interaction> pairs;  // labelled, for AUC
};

// Integer-valued scores with many ties; target and exclusion sizes chosen so
// every macro average is a dyadic rational.
MetricFixture random_fixture(const std::string& name, std::uint64_t seed, std::size_t users,
                             std::size_t items, int levels) {
  std::mt19937_64 rng(seed);
  MetricFixture f;
  f.name = name;
  f.task.num_items = items;
  f.scores.resize(users * items);
  for (double& s : f.scores) s = static_cast<double>(rng() % static_cast<unsigned>(levels));
  f.train_degree.resize(items);
  for (auto& n : f.train_degree) n = rng() % 5;
  for (Id u = 0; u < users; ++u) {
    std::vector<Id> perm(items);
    std::iota(perm.begin(), perm.end(), Id{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t t = std::size_t{1} << (rng() % 3);
    const std::size_t x = rng() % 3;
    std::vector<Id> targets(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(t));
    std::vector<Id> excluded(perm.begin() + static_cast<std::ptrdiff_t>(t),
                             perm.begin() + static_cast<std::ptrdiff_t>(t + x));
    std::sort(targets.begin(), targets.end());
    std::sort(excluded.begin(), excluded.end());
    f.task.users.push_back(u);
    f.task.targets.push_back(targets);
    f.task.excluded.push_back(excluded);
    for (Id i : targets) f.pairs.push_back({u, i, 1});
    f.pairs.push_back({u, perm[items - 1], 0});
    f.pairs.push_back({u, perm[items - 2], 0});
  }
  return f;
}

MetricFixture hand_fixture() {
  MetricFixture f;
  f.name = "hand";
  f.task.num_items = 8;
  // user 0 ranks 3 > {1, 4} tied > 6 ...; user 1 puts its target last
  f.scores = {0, 5, 2, 9, 5, 1, 7, 0,   //
              3, 3, 3, 3, 3, 3, 3, 1};
  f.train_degree = {0, 1, 100, 3, 1, 10, 2, 0};
  f.task.users = {0, 1};
  f.task.targets = {{2, 4}, {7}};
  f.task.excluded = {{6}, {0}};
  f.pairs = {{0, 2, 1}, {0, 4, 1}, {0, 0, 0}, {0, 5, 0}, {1, 7, 1}, {1, 3, 0}};
  return f;
}

// Brute force: item i is in the top k iff fewer than k candidates beat it.
bool in_top(const MetricFixture& f, std::size_t u, Id i, std::size_t k) {
  const auto& ex = f.task.excluded[u];
  const Id user = f.task.users[u];
  const double si = f.scores[user * f.task.num_items + i];
  std::size_t better = 0;
  for (Id j = 0; j < f.task.num_items; ++j) {
    if (std::find(ex.begin(), ex.end(), j) != ex.end()) continue;
    const double sj = f.scores[user * f.task.num_items + j];
    if (sj > si || (sj == si && j < i)) ++better;
  }
  return better < k;
}

struct Ratio {
  long long num = 0;
  long long den = 1;
  void add(long long n, long long d) {  // this += n / d
    num = num * d + n * den;
    den *= d;
    const long long g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

}  // namespace

SuiteResult verify_metrics(const VerifyOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult r;
  r.name = "metrics";
  std::vector<MetricFixture> fixtures = {hand_fixture(),
                                         random_fixture("ties", options.seed, 4, 16, 3),
                                         random_fixture("spread", options.seed + 1, 8, 32, 50)};
  const std::vector<std::size_t> ks = {1, 2, 4, 8, 16};
  for (const auto& f : fixtures) {
    const TableScorer scorer(f.task.num_items, f.scores);
    const auto rankings = rank_top(scorer, f.task, ks.back());
    const TopKMetrics m = topk_metrics(f.task, rankings, ks);
    bool ok = true;
    const long long users = static_cast<long long>(f.task.users.size());
    for (std::size_t j = 0; j < ks.size(); ++j) {
      Ratio rec, prec;
      long long hits_total = 0, targets_total = 0;
      for (std::size_t u = 0; u < f.task.users.size(); ++u) {
        long long hits = 0;
        for (Id i : f.task.targets[u]) hits += in_top(f, u, i, ks[j]) ? 1 : 0;
        rec.add(hits, static_cast<long long>(f.task.targets[u].size()) * users);
        prec.add(hits, static_cast<long long>(ks[j]) * users);
        hits_total += hits;
        targets_total += static_cast<long long>(f.task.targets[u].size());
      }
      const double micro = static_cast<double>(hits_total) / static_cast<double>(targets_total);
      const double psr0 = psr_at_k(f.task, rankings, ks[j], 0.0, f.train_degree);
      ok = ok && m.recall[j] == rec.value() && m.precision[j] == prec.value() && psr0 == micro;

      // weighted form, accumulated in a different order than the fast path
      double num = 0.0, den = 0.0;
      for (std::size_t u = 0; u < f.task.users.size(); ++u) {
        for (Id i : f.task.targets[u]) {
          const double w = std::pow(1.0 / std::max<double>(1.0, static_cast<double>(f.train_degree[i])), 0.1);
          den += w;
          if (in_top(f, u, i, ks[j])) num += w;
        }
      }
      ok = ok && std::abs(psr_at_k(f.task, rankings, ks[j], 0.1, f.train_degree) - num / den) <= 1e-12;
    }

    long long conc2 = 0, pos = 0, neg = 0;
    for (const auto& a : f.pairs) {
      if (a.label == 0) {
        ++neg;
        continue;
      }
      ++pos;
      for (const auto& b : f.pairs) {
        if (b.label != 0) continue;
        const double sa = scorer.probability(a.user, a.item);
        const double sb = scorer.probability(b.user, b.item);
        conc2 += sa > sb ? 2 : (sa == sb ? 1 : 0);
      }
    }
    const double oracle_auc = static_cast<double>(conc2) / static_cast<double>(2 * pos * neg);
    ok = ok && ctr_auc(scorer, f.pairs) == oracle_auc;
    r.passed = r.passed && ok;
    r.lines.push_back(std::string(ok ? "PASS" : "FAIL") + " fixture " + f.name +
                      ": recall, precision, psr(0), psr(0.1), auc");
  }
  r.seconds = elapsed(t0);
  return r;
}

std::vector<SuiteResult> run_verify(const std::vector<std::string>& suites,
                                    const VerifyOptions& options) {
  std::vector<std::string> names = suites;
  if (names.empty() || std::find(names.begin(), names.end(), "all") != names.end()) {
    names.assign(std::begin(kSuiteNames), std::end(kSuiteNames));
  }
  std::vector<SuiteResult> out;
  for (const auto& n : names) {
    if (n == "gradients") out.push_back(verify_gradients(options));
    else if (n == "gates") out.push_back(verify_gates(options));
    else if (n == "metrics") out.push_back(verify_metrics(options));
    else throw std::invalid_argument("unknown suite '" + n + "'");
  }
  return out;
}

}  // namespace kper
