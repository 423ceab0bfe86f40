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

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace kper {

// Dense row-major matrix of doubles. Vectors are stored as 1 x n.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    assert(r < rows_);
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    assert(r < rows_);
    return {data_.data() + r * cols_, cols_};
  }

  // Rows [first, first + count) as a flat span.
  std::span<const double> rows_span(std::size_t first, std::size_t count) const {
    assert(first + count <= rows_);
    return {data_.data() + first * cols_, count * cols_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void set_zero();

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace linalg {

double dot(std::span<const double> a, std::span<const double> b);
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// y = W[:, col0:col0+x.size()] * x  (+ y when accumulate)
void gemv(const Matrix& w, std::span<const double> x, std::span<double> y,
          bool accumulate = false, std::size_t col0 = 0);

// y += W[:, col0:col0+y.size()]^T * g
void gemv_t_acc(const Matrix& w, std::span<const double> g, std::span<double> y,
                std::size_t col0 = 0);

// G[:, col0:col0+x.size()] += g * x^T
void outer_acc(Matrix& grad, std::span<const double> g, std::span<const double> x,
               std::size_t col0 = 0);

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// In-place softmax with max subtraction. Empty input is a no-op.
void softmax(std::span<double> v);

// Given softmax output p and upstream dL/dp, overwrite g with dL/dlogits.
void softmax_backward(std::span<const double> p, std::span<double> g);

double squared_norm(std::span<const double> v);

}  // namespace linalg
}  // namespace kper
