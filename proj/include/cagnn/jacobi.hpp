#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cagnn/matrix.hpp"

namespace cagnn {

// Eigenvalues of a small dense symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues sorted in descending order. Intended for the class-count
// sized Gram matrices that show up in the entropy metric (C <= a few dozen).
inline std::vector<double> symmetric_eigenvalues(Matrix a, int max_sweeps = 100) {
  if (a.rows != a.cols) throw std::invalid_argument("symmetric_eigenvalues: matrix not square");
  const int n = a.rows;
  if (n == 0) return {};
  if (n == 1) return {a(0, 0)};

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };
  double fro = 0.0;
  for (double v : a.data) fro += v * v;
  fro = std::sqrt(fro);
  const double tol = 1e-15 * std::max(fro, 1.0);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_norm() <= tol) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        double t;
        if (tau >= 0.0)
          t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
        else
          t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end(), std::greater<double>());
  return ev;
}

}  // namespace cagnn
