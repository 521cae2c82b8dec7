#pragma once

#include <cmath>
#include <vector>

#include "cagnn/graph.hpp"
#include "cagnn/matrix.hpp"

namespace cagnn {

// CSR sparse matrix. Used for propagation operators, which are fixed data as
// far as training is concerned (never differentiated through).
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> offsets;  // rows + 1
  std::vector<int> targets;
  std::vector<double> values;

  // out = S * x
  void multiply_into(const Matrix& x, Matrix& out) const {
    if (out.rows != rows || out.cols != x.cols) out = Matrix(rows, x.cols);
    else out.fill(0.0);
    for (int i = 0; i < rows; ++i) {
      double* orow = out.row_ptr(i);
      for (int e = offsets[i]; e < offsets[i + 1]; ++e) {
        const double v = values[e];
        const double* xrow = x.row_ptr(targets[e]);
        for (int j = 0; j < x.cols; ++j) orow[j] += v * xrow[j];
      }
    }
  }

  // acc += S^T * g, written as a scatter over the rows of S.
  void multiply_transpose_acc(const Matrix& g, Matrix& acc) const {
    for (int i = 0; i < rows; ++i) {
      const double* grow = g.row_ptr(i);
      for (int e = offsets[i]; e < offsets[i + 1]; ++e) {
        const double v = values[e];
        double* arow = acc.row_ptr(targets[e]);
        for (int j = 0; j < g.cols; ++j) arow[j] += v * grow[j];
      }
    }
  }
};

// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
inline SparseMatrix normalized_adjacency(const Graph& g) {
  const int n = g.num_nodes;
  SparseMatrix s;
  s.rows = s.cols = n;
  s.offsets.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) s.offsets[i + 1] = s.offsets[i] + g.degree(i) + 1;
  s.targets.resize(s.offsets.back());
  s.values.resize(s.offsets.back());
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(g.degree(i) + 1.0);
  for (int i = 0; i < n; ++i) {
    int e = s.offsets[i];
    bool self_written = false;
    for (int j : g.neighbors(i)) {
      if (!self_written && j > i) {  // keep targets sorted with the self loop in place
        s.targets[e] = i;
        s.values[e] = inv_sqrt[i] * inv_sqrt[i];
        self_written = true;
        ++e;
      }
      s.targets[e] = j;
      s.values[e] = inv_sqrt[i] * inv_sqrt[j];
      ++e;
    }
    if (!self_written) {
      s.targets[e] = i;
      s.values[e] = inv_sqrt[i] * inv_sqrt[i];
      ++e;
    }
  }
  return s;
}

// Plain adjacency, all entries 1.
inline SparseMatrix plain_adjacency(const Graph& g) {
  SparseMatrix s;
  s.rows = s.cols = g.num_nodes;
  s.offsets = g.offsets;
  s.targets = g.targets;
  s.values.assign(s.targets.size(), 1.0);
  return s;
}

// A + I as structure only (values 1); rows enumerate the attention support.
inline SparseMatrix self_loop_structure(const Graph& g) {
  const int n = g.num_nodes;
  SparseMatrix s;
  s.rows = s.cols = n;
  s.offsets.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) s.offsets[i + 1] = s.offsets[i] + g.degree(i) + 1;
  s.targets.resize(s.offsets.back());
  for (int i = 0; i < n; ++i) {
    int e = s.offsets[i];
    bool self_written = false;
    for (int j : g.neighbors(i)) {
      if (!self_written && j > i) {
        s.targets[e++] = i;
        self_written = true;
      }
      s.targets[e++] = j;
    }
    if (!self_written) s.targets[e++] = i;
  }
  s.values.assign(s.targets.size(), 1.0);
  return s;
}

}  // namespace cagnn
