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
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kper/ckg.hpp"
#include "kper/model.hpp"
#include "kper/neighborhood.hpp"
#include "kper/params.hpp"
#include "kper/seed_referencing.hpp"

namespace kper {

struct GroupError {
  std::string name;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  double rel_error = 0.0;  // |a - n| / (|a| + |n|), 0 when both vanish
};

struct GradCheckInput {
  const SeedPool& pool;
  const ModelOptions& opts;
  const TripleNeighborhoods& nb;
  std::span<const Interaction> batch;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

// ce + lambda1 * sp + lambda2 * |theta|^2 with deterministic gates.
double total_objective(const GradCheckInput& in, const ModelParameters& params);
// Gradient of total_objective.
ModelParameters total_gradient(const GradCheckInput& in, const ModelParameters& params);

// Central differences over every scalar; one entry per tensor.
std::vector<GroupError> gradient_check(const GradCheckInput& in, const ModelParameters& params,
                                       const ModelParameters& analytic, double step = 1e-5);

struct VerifyOptions {
  std::uint64_t seed = 7;
  std::size_t draws = 100000;
  std::size_t grad_points = 5;
  bool corrupt_gradient = false;  // negative control for the gradient suite
};

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> lines;  // one per check
  double seconds = 0.0;
};

SuiteResult verify_gradients(const VerifyOptions& options);
// Hard-concrete open probability, deterministic gate median, and the summed
// sparsity term against Monte Carlo.
SuiteResult verify_gates(const VerifyOptions& options);
SuiteResult verify_metrics(const VerifyOptions& options);

inline constexpr const char* kSuiteNames[] = {"gradients", "gates", "metrics"};

// Runs the named suites ("all" for every suite). Throws std::invalid_argument
// for an unknown name.
std::vector<SuiteResult> run_verify(const std::vector<std::string>& suites,
                                    const VerifyOptions& options);

// Fixed tiny problem used by the gradient suite: 10 users, 10 items, 20
// entities, 30 triples, d = 8, K = 2, l = 4, 4 seeds per side.
struct GradFixture {
  CollaborativeKnowledgeGraph graph;
  SeedPool pool;
  ModelOptions opts;
  TripleNeighborhoods nb;
  std::vector<Interaction> batch;
  ModelDims dims;
};
GradFixture make_grad_fixture(std::uint64_t seed);

// Uniform(-scale, scale) entries in every tensor, biases included.
ModelParameters random_parameters(const ModelDims& dims, std::uint64_t seed, double scale = 0.5);

}  // namespace kper
