#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cagnn/autodiff.hpp"
#include "cagnn/matrix.hpp"
#include "cagnn/rng.hpp"

namespace testsupport {

// Central finite differences against the reverse-mode gradient. `fn` must
// rebuild its graph from the params' current values on every invocation and
// return a 1x1 tensor. Returns the worst relative error over all entries.
inline double grad_check(std::vector<cagnn::ad::Tensor> params,
                         const std::function<cagnn::ad::Tensor()>& fn, double h = 1e-4) {
  for (auto& p : params) p.zero_grad();
  cagnn::ad::Tensor loss = fn();
  loss.backward();
  std::vector<cagnn::Matrix> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    cagnn::Matrix& val = params[pi].value();
    for (size_t k = 0; k < val.data.size(); ++k) {
      const double orig = val.data[k];
      val.data[k] = orig + h;
      const double fp = fn().value()(0, 0);
      val.data[k] = orig - h;
      const double fm = fn().value()(0, 0);
      val.data[k] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[pi].data[k];
      const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

inline cagnn::Matrix random_mat(int r, int c, cagnn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  cagnn::Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// Entries bounded away from zero, for kinked activations.
inline cagnn::Matrix random_mat_offzero(int r, int c, cagnn::Rng& rng, double min_abs = 0.1) {
  cagnn::Matrix m(r, c);
  for (double& v : m.data) {
    v = rng.uniform(min_abs, 1.0);
    if (rng.uniform() < 0.5) v = -v;
  }
  return m;
}

}  // namespace testsupport
