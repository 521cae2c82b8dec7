#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cagnn {

struct KendallResult {
  double tau = 0.0;      // tau-b, tie corrected
  double p_value = 1.0;  // two-sided
  int n = 0;
};

namespace kendall_detail {

inline int sgn(double d) { return (d > 0.0) - (d < 0.0); }

// Sum over tie groups of f(t) for t = group size.
template <class F>
long long tie_sum(const std::vector<double>& v, F f) {
  std::map<double, long long> groups;
  for (double x : v) ++groups[x];
  long long acc = 0;
  for (auto& [_, t] : groups) acc += f(t);
  return acc;
}

// concordant minus discordant pairs
inline long long pair_numerator(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  long long num = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) num += sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
  return num;
}

// Exact two-sided permutation p-value: the fraction of the n! orderings of y
// whose |numerator| reaches the observed one. The tau-b denominator is
// invariant under permutations of y, so comparing numerators is equivalent
// to comparing |tau|.
inline double exact_perm_p(const std::vector<double>& x, const std::vector<double>& y,
                           long long num_obs) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<int>> sx(n, std::vector<int>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sx[i][j] = sgn(x[i] - x[j]);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const long long target = std::llabs(num_obs);
  long long hits = 0, total = 0;
  do {
    long long num = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) num += sx[i][j] * sgn(y[idx[i]] - y[idx[j]]);
    hits += (std::llabs(num) >= target);
    ++total;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Tie-corrected normal approximation of the two-sided p-value.
inline double asymptotic_p(const std::vector<double>& x, const std::vector<double>& y,
                           long long num_obs) {
  const double n = static_cast<double>(x.size());
  const double m = n * (n - 1.0);
  auto t1 = [](long long t) { return t * (t - 1) * (2 * t + 5); };
  auto t0 = [](long long t) { return t * (t - 1) * (t - 2); };
  auto tp = [](long long t) { return t * (t - 1) / 2; };
  const double x1 = static_cast<double>(tie_sum(x, t1)), y1 = static_cast<double>(tie_sum(y, t1));
  const double x0 = static_cast<double>(tie_sum(x, t0)), y0 = static_cast<double>(tie_sum(y, t0));
  const double xt = static_cast<double>(tie_sum(x, tp)), yt = static_cast<double>(tie_sum(y, tp));
  const double var =
      (m * (2.0 * n + 5.0) - x1 - y1) / 18.0 + (2.0 * xt * yt) / m + x0 * y0 / (9.0 * m * (n - 2.0));
  if (var <= 0.0) return 1.0;
  const double z = static_cast<double>(num_obs) / std::sqrt(var);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace kendall_detail

// Kendall tau-b rank correlation with a two-sided p-value: exact permutation
// test for n <= 10, tie-corrected normal approximation beyond. Degenerate
// inputs (either vector constant) report tau = 0, p = 1.
inline KendallResult kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  using namespace kendall_detail;
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  const int n = static_cast<int>(x.size());
  if (n < 2) throw std::invalid_argument("kendall_tau: need at least 2 observations");

  const long long num = pair_numerator(x, y);
  const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
  auto tp = [](long long t) { return t * (t - 1) / 2; };
  const long long n1 = tie_sum(x, tp), n2 = tie_sum(y, tp);
  const double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));

  KendallResult r;
  r.n = n;
  if (den == 0.0) {
    r.tau = 0.0;
    r.p_value = 1.0;
    return r;
  }
  r.tau = static_cast<double>(num) / den;
  r.p_value = (n <= 10) ? exact_perm_p(x, y, num) : asymptotic_p(x, y, num);
  return r;
}

}  // namespace cagnn
