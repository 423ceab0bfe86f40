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
#include <string_view>
#include <vector>

#include "kper/matrix.hpp"

namespace kper {

struct ModelDims {
  std::size_t num_users = 0;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t dim = 64;      // d
  std::size_t hidden = 64;   // attention MLP width
  std::size_t num_seeds = 0; // |S|, user block then item block

  bool operator==(const ModelDims&) const = default;
};

// Every trainable tensor. Also used as the gradient / optimizer-moment
// container, since those mirror the parameter layout exactly.
struct ModelParameters {
  Matrix user_table;      // users x d
  Matrix entity_table;    // entities x d, items first
  Matrix relation_table;  // relations x d
  Matrix attn_w1;         // hidden x 2d
  Matrix attn_b1;         // 1 x hidden
  Matrix attn_w2;         // 1 x hidden
  Matrix attn_b2;         // 1 x 1
  Matrix seed_table;      // |S| x 2d, reference features
  Matrix probe_w;         // |S| x 2d, selection confidence
  Matrix probe_b;         // 1 x |S|
  Matrix gate_w;          // d x 2d
  Matrix gate_b;          // 1 x d
  Matrix gate_q;          // 1 x d

  static ModelParameters zeros(const ModelDims& dims);

  ModelDims dims() const;

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(std::string_view("user_table"), user_table);
    fn(std::string_view("entity_table"), entity_table);
    fn(std::string_view("relation_table"), relation_table);
    fn(std::string_view("attn_w1"), attn_w1);
    fn(std::string_view("attn_b1"), attn_b1);
    fn(std::string_view("attn_w2"), attn_w2);
    fn(std::string_view("attn_b2"), attn_b2);
    fn(std::string_view("seed_table"), seed_table);
    fn(std::string_view("probe_w"), probe_w);
    fn(std::string_view("probe_b"), probe_b);
    fn(std::string_view("gate_w"), gate_w);
    fn(std::string_view("gate_b"), gate_b);
    fn(std::string_view("gate_q"), gate_q);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    const_cast<ModelParameters*>(this)->for_each(
        [&fn](std::string_view name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
  }

  void set_zero();
  std::size_t num_scalars() const;
  bool all_finite() const;

  bool operator==(const ModelParameters&) const = default;
};

// fn(name, a_tensor, b_tensor) over matching tensors of two containers.
template <typename Fn>
void for_each_pair(ModelParameters& a, const ModelParameters& b, Fn&& fn) {
  std::vector<const Matrix*> rhs;
  b.for_each([&rhs](std::string_view, const Matrix& m) { rhs.push_back(&m); });
  std::size_t k = 0;
  a.for_each([&](std::string_view name, Matrix& m) { fn(name, m, *rhs[k++]); });
}

// a += scale * b
void add_scaled(ModelParameters& a, const ModelParameters& b, double scale = 1.0);

inline bool is_bias(std::string_view name) {
  return name == "attn_b1" || name == "attn_b2" || name == "probe_b" || name == "gate_b";
}

// Xavier-uniform weights, bound sqrt(6 / (fan_in + fan_out)) with
// fan_in = cols and fan_out = rows; zero biases.
ModelParameters init_parameters(const ModelDims& dims, std::uint64_t seed);

// Sum of squares over every tensor.
double l2_squared(const ModelParameters& params);

}  // namespace kper
