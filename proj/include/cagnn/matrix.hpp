#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace cagnn {

// Dense row-major matrix of doubles. Value type for features, activations
// and model parameters.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  double& operator()(int r, int c) {
    return data[static_cast<size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
  double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row_ptr(int r) const {
    return data.data() + static_cast<size_t>(r) * cols;
  }
  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// out = a * b, cache-friendly ikj order.
inline void matmul_into(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols == b.rows);
  if (out.rows != a.rows || out.cols != b.cols) out = Matrix(a.rows, b.cols);
  else out.fill(0.0);
  const int n = a.rows, k = a.cols, m = b.cols;
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row_ptr(p);
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out;
  matmul_into(a, b, out);
  return out;
}

// out += a^T * b  (a: n x r, b: n x c, out: r x c)
inline void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.rows == b.rows && out.rows == a.cols && out.cols == b.cols);
  const int n = a.rows, r = a.cols, c = b.cols;
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    const double* brow = b.row_ptr(i);
    for (int p = 0; p < r; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* orow = out.row_ptr(p);
      for (int j = 0; j < c; ++j) orow[j] += av * brow[j];
    }
  }
}

// out += a * b^T  (a: n x k, b: m x k, out: n x m)
inline void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols == b.cols && out.rows == a.rows && out.cols == b.rows);
  const int n = a.rows, k = a.cols, m = b.rows;
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (int j = 0; j < m; ++j) {
      const double* brow = b.row_ptr(j);
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      orow[j] += s;
    }
  }
}

inline void add_scaled(Matrix& dst, const Matrix& src, double c) {
  assert(dst.same_shape(src));
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += c * src.data[i];
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  assert(a.same_shape(b));
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace cagnn
