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

#include <cstdint>

#include "kper/params.hpp"

namespace kper {

struct AdamState {
  ModelParameters m;
  ModelParameters v;
  std::uint64_t step = 0;

  static AdamState zeros(const ModelDims& dims);

  bool operator==(const AdamState&) const = default;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of every tensor.
void adam_step(ModelParameters& params, const ModelParameters& grads, AdamState& state,
               const AdamOptions& options);

}  // namespace kper
