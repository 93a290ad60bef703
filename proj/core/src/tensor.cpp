// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "porlab/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace porlab {

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.rows());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (out.rows() != n || out.cols() != m)
    out = Matrix(n, m);
  else
    out.fill(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data() + i * m;
    const double* ar = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

void matmul_at_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.rows() == b.rows());
  assert(out.rows() == a.cols() && out.cols() == b.cols());
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const double* ar = a.data() + p * n;
    const double* br = b.data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double* o = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

void matmul_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (out.rows() != n || out.cols() != m) out = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      out(i, j) = s;
    }
  }
}

void add_row_bias(Matrix& out, const Matrix& bias) {
  assert(bias.cols() == out.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* o = out.data() + i * out.cols();
    for (std::size_t j = 0; j < out.cols(); ++j) o[j] += bias[j];
  }
}

void acc_column_sums(const Matrix& g, Matrix& bias_grad) {
  assert(bias_grad.cols() == g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double* r = g.data() + i * g.cols();
    for (std::size_t j = 0; j < g.cols(); ++j) bias_grad[j] += r[j];
  }
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  assert(x.same_shape(y));
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double v : m.values()) r = std::max(r, std::abs(v));
  return r;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace porlab
