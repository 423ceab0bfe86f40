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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kper/encoders.hpp"
#include "kper/rng.hpp"
#include "kper/verify.hpp"
#include "test_support.hpp"

namespace kper {
namespace {

ModelDims small_dims() {
  ModelDims d;
  d.num_users = 4;
  d.num_entities = 9;
  d.num_relations = 3;
  d.dim = 5;
  d.hidden = 5;
  d.num_seeds = 4;
  return d;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform_open() - 0.5;
  return v;
}

TEST(Interactive, EqualNeighboursGiveUniformWeights) {
  Matrix table(3, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    table(r, 0) = 0.3;
    table(r, 1) = -1.2;
  }
  std::vector<Id> nb = {0, 1, 2, 1};
  std::vector<double> target = {2.0, 5.0}, out(2), alpha(4);
  encode_interactive(table, target, nb, out, alpha);
  for (double a : alpha) EXPECT_NEAR(a, 0.25, 1e-15);
  EXPECT_NEAR(out[0], 0.3, 1e-15);
  EXPECT_NEAR(out[1], -1.2, 1e-15);
}

TEST(Interactive, TwoNeighbourHandSoftmax) {
  Matrix table(2, 2);
  table(0, 0) = 0.0;
  table(0, 1) = 1.0;
  table(1, 0) = std::log(3.0);
  table(1, 1) = 2.0;
  std::vector<double> target = {1.0, 0.0}, out(2), alpha(2);
  std::vector<Id> nb = {0, 1};
  encode_interactive(table, target, nb, out, alpha);
  EXPECT_NEAR(alpha[0], 0.25, 1e-15);
  EXPECT_NEAR(alpha[1], 0.75, 1e-15);
  EXPECT_NEAR(out[0], 0.75 * std::log(3.0), 1e-15);
  EXPECT_NEAR(out[1], 0.25 * 1.0 + 0.75 * 2.0, 1e-15);
}

TEST(Interactive, EmptyNeighbourhoodIsZero) {
  Matrix table(2, 3, 1.0);
  auto out = encode_interactive(table, std::vector<double>{1, 2, 3}, {});
  EXPECT_EQ(out, std::vector<double>(3, 0.0));
}

TEST(Interactive, WeightsSumToOneAndOrderInvariant) {
  Matrix table(6, 4);
  auto flat = random_vector(24, 3);
  std::copy(flat.begin(), flat.end(), table.flat().begin());
  auto target = random_vector(4, 4);
  std::vector<Id> nb = {5, 0, 3, 3, 1};
  std::vector<double> out(4), alpha(5);
  encode_interactive(table, target, nb, out, alpha);
  EXPECT_NEAR(std::accumulate(alpha.begin(), alpha.end(), 0.0), 1.0, 1e-9);
  for (double a : alpha) {
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  std::vector<Id> perm = {3, 1, 5, 3, 0};
  auto out2 = encode_interactive(table, target, perm);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(out[k], out2[k], 1e-12);
}

TEST(Interactive, GradientMatchesFiniteDifferences) {
  const std::size_t d = 4;
  Matrix table(5, d);
  auto flat = random_vector(5 * d, 10);
  std::copy(flat.begin(), flat.end(), table.flat().begin());
  auto target = random_vector(d, 11);
  auto c = random_vector(d, 12);
  std::vector<Id> nb = {4, 1, 1, 2};
  auto objective = [&](const Matrix& t, const std::vector<double>& tg) {
    auto out = encode_interactive(t, tg, nb);
    return std::inner_product(out.begin(), out.end(), c.begin(), 0.0);
  };
  std::vector<double> out(d), alpha(nb.size()), g_target(d, 0.0), scratch(nb.size());
  encode_interactive(table, target, nb, out, alpha);
  Matrix g_table(5, d);
  encode_interactive_backward(table, target, nb, alpha, c, g_table, g_target, scratch);

  const double h = 1e-5;
  double diff = 0, an = 0, nu = 0;
  for (std::size_t k = 0; k < table.size(); ++k) {
    Matrix up = table, down = table;
    up.flat()[k] += h;
    down.flat()[k] -= h;
    const double num = (objective(up, target) - objective(down, target)) / (2 * h);
    diff += std::pow(num - g_table.flat()[k], 2);
    an += std::pow(g_table.flat()[k], 2);
    nu += num * num;
  }
  for (std::size_t k = 0; k < d; ++k) {
    auto up = target, down = target;
    up[k] += h;
    down[k] -= h;
    const double num = (objective(table, up) - objective(table, down)) / (2 * h);
    diff += std::pow(num - g_target[k], 2);
    an += g_target[k] * g_target[k];
    nu += num * num;
  }
  EXPECT_LT(std::sqrt(diff) / (std::sqrt(an) + std::sqrt(nu)), 1e-4);
}

// Scalar-by-scalar forward pass for one hop, sharing no code with the library.
std::vector<double> hop_oracle(const ModelParameters& p, const std::vector<Triple>& triples) {
  const std::size_t d = p.entity_table.cols();
  const std::size_t hidden = p.attn_w1.rows();
  std::vector<double> scores;
  for (const Triple& t : triples) {
    double s = p.attn_b2(0, 0);
    for (std::size_t h = 0; h < hidden; ++h) {
      double a = p.attn_b1(0, h);
      for (std::size_t c = 0; c < d; ++c) a += p.attn_w1(h, c) * p.entity_table(t.head, c);
      for (std::size_t c = 0; c < d; ++c) a += p.attn_w1(h, d + c) * p.relation_table(t.relation, c);
      s += p.attn_w2(0, h) * std::max(a, 0.0);
    }
    scores.push_back(s);
  }
  double z = 0;
  for (double s : scores) z += std::exp(s);
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < triples.size(); ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      out[c] += std::exp(scores[j]) / z * p.entity_table(triples[j].tail, c);
    }
  }
  return out;
}

TEST(Hop, EqualScoresGiveMeanOfTails) {
  ModelParameters p = random_parameters(small_dims(), 5);
  p.attn_w2.set_zero();
  std::vector<Triple> tr = {{0, 0, 3}, {1, 2, 4}, {2, 1, 8}};
  auto out = encode_hop(p, tr);
  for (std::size_t c = 0; c < 5; ++c) {
    const double mean = (p.entity_table(3, c) + p.entity_table(4, c) + p.entity_table(8, c)) / 3;
    EXPECT_NEAR(out[c], mean, 1e-15);
  }
}

TEST(Hop, SingleTripleReturnsTail) {
  ModelParameters p = random_parameters(small_dims(), 6);
  auto out = encode_hop(p, std::vector<Triple>{{2, 1, 7}});
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(out[c], p.entity_table(7, c));
}

TEST(Hop, EmptyIsZero) {
  ModelParameters p = random_parameters(small_dims(), 6);
  EXPECT_EQ(encode_hop(p, std::vector<Triple>{}), std::vector<double>(5, 0.0));
}

TEST(Hop, ThreeTripleFixtureMatchesScalarOracle) {
  ModelParameters p = random_parameters(small_dims(), 8, 1.0);
  std::vector<Triple> tr = {{0, 0, 5}, {3, 1, 6}, {0, 2, 2}};
  auto out = encode_hop(p, tr);
  auto ref = hop_oracle(p, tr);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(out[c], ref[c], 1e-12);
}

TEST(Hop, AttentionSumsToOneAndOrderInvariant) {
  ModelParameters p = random_parameters(small_dims(), 9, 1.0);
  std::vector<Triple> tr = {{0, 0, 5}, {3, 1, 6}, {0, 2, 2}, {7, 1, 1}};
  HopTrace trace;
  std::vector<double> out(5);
  encode_hop(p, tr, out, trace);
  EXPECT_NEAR(std::accumulate(trace.pi.begin(), trace.pi.end(), 0.0), 1.0, 1e-9);
  for (double w : trace.pi) {
    EXPECT_GT(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
  std::vector<Triple> perm = {tr[2], tr[0], tr[3], tr[1]};
  auto out2 = encode_hop(p, perm);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(out[c], out2[c], 1e-12);
}

TEST(Hop, GradientMatchesFiniteDifferences) {
  const ModelDims dims = small_dims();
  std::vector<Triple> tr = {{0, 0, 5}, {3, 1, 6}, {0, 2, 2}, {7, 1, 1}, {3, 0, 3}};
  auto c = random_vector(dims.dim, 21);
  auto f = [&](const ModelParameters& p) {
    auto out = encode_hop(p, tr);
    return std::inner_product(out.begin(), out.end(), c.begin(), 0.0);
  };
  for (std::uint64_t seed : {1, 2, 3}) {
    ModelParameters p = random_parameters(dims, seed, 1.0);
    HopTrace trace;
    std::vector<double> out(dims.dim);
    encode_hop(p, tr, out, trace);
    ModelParameters g = ModelParameters::zeros(dims);
    encode_hop_backward(p, tr, trace, c, g);
    auto r = testing::finite_difference_check(p, f, g);
    EXPECT_LT(r.worst, 1e-4) << r.group;
  }
}

TEST(Hop, CachedProjectionPathAgrees) {
  const ModelDims dims = small_dims();
  ModelParameters p = random_parameters(dims, 31, 1.0);
  std::vector<Triple> a = {{0, 0, 5}, {3, 1, 6}, {0, 2, 2}};
  std::vector<Triple> b = {{7, 1, 1}, {3, 0, 3}, {3, 2, 0}};
  std::vector<Id> heads;
  for (const auto* set : {&a, &b}) {
    for (const Triple& t : *set) heads.push_back(t.head);
  }
  HopProjections proj = project_hops(p, heads);
  EXPECT_EQ(proj.heads.size(), 3u);

  auto ga = random_vector(dims.dim, 41), gb = random_vector(dims.dim, 42);
  ModelParameters direct = ModelParameters::zeros(dims), cached = ModelParameters::zeros(dims);
  HopGradAccum accum = HopGradAccum::zeros_like(proj);
  for (auto [set, grad] : {std::pair{&a, &ga}, std::pair{&b, &gb}}) {
    HopTrace t1, t2;
    std::vector<double> o1(dims.dim), o2(dims.dim);
    encode_hop(p, *set, o1, t1);
    encode_hop(p, proj, *set, o2, t2);
    EXPECT_EQ(o1, o2);  // same sums in the same order
    encode_hop_backward(p, *set, t1, *grad, direct);
    encode_hop_backward(p, proj, *set, t2, *grad, cached, accum);
  }
  finish_hop_backward(p, proj, accum, cached);
  std::vector<const Matrix*> lhs;
  direct.for_each([&](std::string_view, const Matrix& m) { lhs.push_back(&m); });
  std::size_t k = 0;
  cached.for_each([&](std::string_view name, const Matrix& m) {
    const Matrix& l = *lhs[k++];
    for (std::size_t j = 0; j < m.size(); ++j) {
      EXPECT_NEAR(m.flat()[j], l.flat()[j], 1e-12) << name << "[" << j << "]";
    }
  });
}

TEST(Fuse, SingleHop) {
  std::vector<double> v = {1, 2}, hops = {3, 4};
  EXPECT_EQ(fuse(v, hops, 1), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Fuse, TwoHopsAreAveraged) {
  std::vector<double> v = {9, 9, 9}, hops = {1, 0, 0, 0, 1, 0};
  EXPECT_EQ(fuse(v, hops, 2), (std::vector<double>{9, 9, 9, 0.5, 0.5, 0}));
}

TEST(Fuse, NoHopsGiveZeroSecondHalf) {
  std::vector<double> v = {1, -1};
  EXPECT_EQ(fuse(v, {}, 0), (std::vector<double>{1, -1, 0, 0}));
  std::vector<double> gv(2, 0.0);
  fuse_backward(std::vector<double>{1, 2, 3, 4}, 0, gv, {});
  EXPECT_EQ(gv, (std::vector<double>{1, 2}));
}

TEST(Fuse, BackwardSpreadsMeanGradient) {
  std::vector<double> gv(2, 0.0), gh(6, 0.0);
  fuse_backward(std::vector<double>{1, 2, 3, 6}, 3, gv, gh);
  EXPECT_EQ(gv, (std::vector<double>{1, 2}));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(gh[2 * k], 1.0);
    EXPECT_DOUBLE_EQ(gh[2 * k + 1], 2.0);
  }
}

}  // namespace
}  // namespace kper
