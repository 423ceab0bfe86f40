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

#include "kper/params.hpp"

#include <cmath>
#include <random>

#include "kper/rng.hpp"

namespace kper {

ModelParameters ModelParameters::zeros(const ModelDims& dims) {
  const std::size_t d = dims.dim;
  ModelParameters p;
  p.user_table = Matrix(dims.num_users, d);
  p.entity_table = Matrix(dims.num_entities, d);
  p.relation_table = Matrix(dims.num_relations, d);
  p.attn_w1 = Matrix(dims.hidden, 2 * d);
  p.attn_b1 = Matrix(1, dims.hidden);
  p.attn_w2 = Matrix(1, dims.hidden);
  p.attn_b2 = Matrix(1, 1);
  p.seed_table = Matrix(dims.num_seeds, 2 * d);
  p.probe_w = Matrix(dims.num_seeds, 2 * d);
  p.probe_b = Matrix(1, dims.num_seeds);
  p.gate_w = Matrix(d, 2 * d);
  p.gate_b = Matrix(1, d);
  p.gate_q = Matrix(1, d);
  return p;
}

ModelDims ModelParameters::dims() const {
  ModelDims dims;
  dims.num_users = user_table.rows();
  dims.num_entities = entity_table.rows();
  dims.num_relations = relation_table.rows();
  dims.dim = gate_w.rows();
  dims.hidden = attn_w1.rows();
  dims.num_seeds = seed_table.rows();
  return dims;
}

void ModelParameters::set_zero() {
  for_each([](std::string_view, Matrix& m) { m.set_zero(); });
}

std::size_t ModelParameters::num_scalars() const {
  std::size_t n = 0;
  for_each([&n](std::string_view, const Matrix& m) { n += m.size(); });
  return n;
}

bool ModelParameters::all_finite() const {
  bool ok = true;
  for_each([&ok](std::string_view, const Matrix& m) {
    for (double x : m.flat()) ok = ok && std::isfinite(x);
  });
  return ok;
}

ModelParameters init_parameters(const ModelDims& dims, std::uint64_t seed) {
  ModelParameters p = ModelParameters::zeros(dims);
  std::uint64_t tensor_index = 0;
  p.for_each([&](std::string_view name, Matrix& m) {
    ++tensor_index;
    if (is_bias(name) || m.empty()) return;
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::mt19937_64 engine(mix_seed({seed, 0x1417ULL, tensor_index}));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : m.flat()) x = dist(engine);
  });
  return p;
}

double l2_squared(const ModelParameters& params) {
  double s = 0.0;
  params.for_each([&s](std::string_view, const Matrix& m) { s += linalg::squared_norm(m.flat()); });
  return s;
}

void add_scaled(ModelParameters& a, const ModelParameters& b, double scale) {
  for_each_pair(a, b, [scale](std::string_view, Matrix& x, const Matrix& y) {
    linalg::axpy(scale, y.flat(), x.flat());
  });
}

}  // namespace kper
