#pragma once

#include <cstdint>

#include "dpaudit/types.hpp"

namespace dpaudit {

/// Two-sided critical value z_{alpha/2}: inverse_normal_cdf(1 - alpha/2).
double z_critical(double alpha);

/// Group-privacy probability bound for datasets differing in k rows:
/// e^{k eps} p' + delta (1 - e^{k eps}) / (1 - e^{eps}), evaluated through
/// expm1 so the delta term degrades continuously to k*delta as eps -> 0.
/// PrivacySpec rejects eps = 0 at construction, which is where the closed
/// form would be singular for delta > 0.
double group_privacy_bound(const PrivacySpec& spec, int k, double p_prime);

/// 1-alpha confidence interval for ln(p1/p0) from binomial counts
/// (n1, n0) out of N trials each:
///   ln((n1/N)/(n0/N)) +- z_{alpha/2} sqrt(1/n1 + 1/n0 - 2/N).
/// A zero count yields (-inf, +inf); callers clamp upstream.
ConfidenceInterval katz_log_interval(long n1, long n0, long samples_n, double alpha);

/// Exact Clopper-Pearson bounds for a binomial proportion at one-sided tail
/// probability `tail_alpha`, via the beta-quantile construction.
double clopper_pearson_lower(long k, long n, double tail_alpha);
double clopper_pearson_upper(long k, long n, double tail_alpha);

/// Conservative ratio lower bound ln(CP_lower(n1) / CP_upper(n0)) with
/// alpha/2 per side. Returns -inf when n1 = 0. Baseline used only for the
/// coverage comparison against the Katz interval.
double clopper_pearson_ratio_lb(long n1, long n0, long samples_n, double alpha);

/// Both endpoints of the Clopper-Pearson ratio interval (for coverage runs).
ConfidenceInterval clopper_pearson_ratio_interval(long n1, long n0, long samples_n, double alpha);

/// ln(N) - z_{alpha/2} sqrt(1 - 1/N): the largest lower bound the audit can
/// report with N samples (attained at n1 = N, n0 = 1).
double max_detectable_eps(long samples_n, double alpha);

/// Monte Carlo coverage of the chosen interval for ln(p1/p0): draws `trials`
/// pairs of Binomial(N, p) counts and returns the fraction of intervals that
/// contain the true log ratio. Zero counts inside a trial are clamped to 1.
double coverage_simulate(double p1, double p0, long samples_n, double alpha, long trials,
                         IntervalMethod method, std::uint64_t seed);

/// Regularized incomplete beta I_x(a, b) and its inverse, exposed for tests.
double incomplete_beta(double a, double b, double x);
double inverse_incomplete_beta(double a, double b, double p);

}  // namespace dpaudit
