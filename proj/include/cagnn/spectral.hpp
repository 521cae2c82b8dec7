#pragma once

#include <stdexcept>
#include <vector>

#include "cagnn/matrix.hpp"
#include "cagnn/sparse.hpp"

namespace cagnn {

// Compares the two evaluation orders of the linearized gated stack (no
// nonlinearity, no normalization, per-layer scalar weights folded into
// cumulative gamma):
//
//   recursive:    U^l = P U^{l-1}, U^0 = X
//                 S^0 = gamma_0 X
//                 S^l = (1 - alpha_l) * S^{l-1} + alpha_l * (gamma_l U^l)
//
//   closed form:  S^K = sum_l theta_l * (P^l X), per node
//                 theta_l = gamma_l * alpha_l * prod_{k>l} (1 - alpha_k)
//
// with the order-0 gate fixed to 1, so theta_0 = gamma_0 * prod_{k>=1}(1-alpha_k).
// alphas[l-1] holds the per-node gate of layer l (size N each); gammas has
// K + 1 entries. Returns the max absolute deviation between the two results.
inline double spectral_check(const SparseMatrix& p, const Matrix& x,
                             const std::vector<std::vector<double>>& alphas,
                             const std::vector<double>& gammas) {
  const int k = static_cast<int>(alphas.size());
  const int n = x.rows;
  if (static_cast<int>(gammas.size()) != k + 1)
    throw std::invalid_argument("spectral_check: need K+1 gammas for K layers");
  for (const auto& a : alphas)
    if (static_cast<int>(a.size()) != n)
      throw std::invalid_argument("spectral_check: alpha length != num rows");
  if (p.rows != n || p.cols != n)
    throw std::invalid_argument("spectral_check: operator/feature mismatch");

  // Route A: run the recursion.
  Matrix u = x, s(n, x.cols), tmp;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < x.cols; ++j) s(i, j) = gammas[0] * x(i, j);
  for (int l = 1; l <= k; ++l) {
    p.multiply_into(u, tmp);
    u = tmp;
    const auto& a = alphas[l - 1];
    for (int i = 0; i < n; ++i) {
      const double ai = a[i];
      for (int j = 0; j < x.cols; ++j)
        s(i, j) = (1.0 - ai) * s(i, j) + ai * gammas[l] * u(i, j);
    }
  }

  // Route B: accumulate the expanded polynomial coefficients.
  std::vector<std::vector<double>> theta(k + 1, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    double tail = 1.0;  // prod_{k > l} (1 - alpha_k), built from the top down
    for (int l = k; l >= 0; --l) {
      const double gate = (l == 0) ? 1.0 : alphas[l - 1][i];
      theta[l][i] = gammas[l] * gate * tail;
      tail *= (1.0 - gate);
    }
  }
  Matrix acc(n, x.cols);
  u = x;
  for (int l = 0; l <= k; ++l) {
    if (l > 0) {
      p.multiply_into(u, tmp);
      u = tmp;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < x.cols; ++j) acc(i, j) += theta[l][i] * u(i, j);
  }

  return max_abs_diff(s, acc);
}

}  // namespace cagnn
