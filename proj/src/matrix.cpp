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

#include "kper/matrix.hpp"

#include <algorithm>
#include <limits>

namespace kper {

void Matrix::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

namespace linalg {

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return dot(a.data(), b.data(), a.size());
}

double dot(const double* a, const double* b, std::size_t n) {
  // four independent partial sums, so the loop vectorises without
  // reassociation flags; the summation order is fixed
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void gemv(const Matrix& w, std::span<const double> x, std::span<double> y,
          bool accumulate, std::size_t col0) {
  assert(y.size() == w.rows() && col0 + x.size() <= w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double s = dot(w.row(r).data() + col0, x.data(), x.size());
    y[r] = accumulate ? y[r] + s : s;
  }
}

void gemv_t_acc(const Matrix& w, std::span<const double> g, std::span<double> y,
                std::size_t col0) {
  assert(g.size() == w.rows() && col0 + y.size() <= w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* wr = w.row(r).data() + col0;
    for (std::size_t c = 0; c < y.size(); ++c) y[c] += gr * wr[c];
  }
}

void outer_acc(Matrix& grad, std::span<const double> g, std::span<const double> x,
               std::size_t col0) {
  assert(g.size() == grad.rows() && col0 + x.size() <= grad.cols());
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* out = grad.row(r).data() + col0;
    for (std::size_t c = 0; c < x.size(); ++c) out[c] += gr * x[c];
  }
}

void softmax(std::span<double> v) {
  if (v.empty()) return;
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : v) x /= z;
}

void softmax_backward(std::span<const double> p, std::span<double> g) {
  assert(p.size() == g.size());
  const double inner = dot(p, g);
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (g[i] - inner);
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

}  // namespace linalg
}  // namespace kper
