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

#include "kper/adam.hpp"

#include <cmath>
#include <vector>

namespace kper {

AdamState AdamState::zeros(const ModelDims& dims) {
  return {ModelParameters::zeros(dims), ModelParameters::zeros(dims), 0};
}

void adam_step(ModelParameters& params, const ModelParameters& grads, AdamState& state,
               const AdamOptions& o) {
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));

  std::vector<double*> m_rows, v_rows;
  std::vector<const double*> g_rows;
  state.m.for_each([&](std::string_view, Matrix& x) { m_rows.push_back(x.flat().data()); });
  state.v.for_each([&](std::string_view, Matrix& x) { v_rows.push_back(x.flat().data()); });
  grads.for_each([&](std::string_view, const Matrix& x) { g_rows.push_back(x.flat().data()); });
  std::size_t k = 0;
  params.for_each([&](std::string_view, Matrix& p) {
    double* w = p.flat().data();
    double* m = m_rows[k];
    double* v = v_rows[k];
    const double* g = g_rows[k];
    ++k;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  });
}

}  // namespace kper
