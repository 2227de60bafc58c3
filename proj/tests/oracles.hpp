// Independent reference implementations used to freeze expected values.
// These deliberately avoid the library's code paths: the normal quantile
// comes from bisection on std::erfc, binomial tails from direct log-space
// summation, and Clopper-Pearson bounds from bisection on those tails.
#pragma once

#include <cmath>
#include <functional>

namespace oracles {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Quantile by bisection on std::erfc; ~1e-13 accuracy.
inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double z_half_alpha(double alpha) { return normal_quantile(1.0 - alpha / 2.0); }

inline double log_choose(long n, long k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

/// P(Bin(n, p) >= k), exact summation in log space.
inline double binomial_upper_tail(long n, long k, double p) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  double total = 0.0;
  for (long i = k; i <= n; ++i)
    total += std::exp(log_choose(n, i) + static_cast<double>(i) * std::log(p) +
                      static_cast<double>(n - i) * std::log1p(-p));
  return std::min(total, 1.0);
}

/// Exact Clopper-Pearson bounds via bisection on the binomial tails.
inline double cp_lower(long k, long n, double tail_alpha) {
  if (k == 0) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (binomial_upper_tail(n, k, mid) < tail_alpha) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double cp_upper(long k, long n, double tail_alpha) {
  if (k == n) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    // P(Bin(n, p) <= k) = 1 - P(>= k+1)
    if (1.0 - binomial_upper_tail(n, k + 1, mid) > tail_alpha) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Katz interval endpoints straight from the formula.
inline void katz(long n1, long n0, long n, double alpha, double* lower, double* upper) {
  const double center = std::log(static_cast<double>(n1) / static_cast<double>(n0));
  const double half = z_half_alpha(alpha) * std::sqrt(1.0 / static_cast<double>(n1) +
                                                     1.0 / static_cast<double>(n0) -
                                                     2.0 / static_cast<double>(n));
  *lower = center - half;
  *upper = center + half;
}

/// Group-privacy bound through the explicit telescoping sum.
inline double group_bound_telescoping(double eps, double delta, int k, double p_prime) {
  double sum = 0.0;
  for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(j) * eps);
  return std::exp(static_cast<double>(k) * eps) * p_prime + delta * sum;
}

/// P(majority) under the forest leaf rule with excess j.
inline double leaf_majority_prob(long j, double eps) {
  const double e = eps * std::exp(static_cast<double>(j) * eps) / 2.0;
  if (e > 700.0) return 1.0;
  return std::exp(e) / (std::exp(e) + 1.0);
}

}  // namespace oracles
