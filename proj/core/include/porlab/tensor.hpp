// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace porlab {

/// Dense row-major matrix of doubles. Vectors are 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b            (n x k) * (k x m)
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * b         (k x n)^T * (k x m) -> n x m
void matmul_at_acc(const Matrix& a, const Matrix& b, Matrix& out);
// out = a * b^T          (n x k) * (m x k)^T -> n x m
void matmul_bt(const Matrix& a, const Matrix& b, Matrix& out);
// Adds a 1 x m row vector to every row of out.
void add_row_bias(Matrix& out, const Matrix& bias);
// bias_grad(0, j) += sum_i g(i, j)
void acc_column_sums(const Matrix& g, Matrix& bias_grad);

void axpy(double alpha, const Matrix& x, Matrix& y);
double dot(std::span<const double> a, std::span<const double> b);
double max_abs(const Matrix& m);
bool all_finite(const Matrix& m);

}  // namespace porlab
