#include "dpaudit/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpaudit/rng.hpp"

namespace dpaudit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lanczos g=7, n=9. Free of the errno/signgam baggage of std::lgamma.
double log_gamma(double x) {
  static const double coef[9] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                 771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                 -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // reflection
    return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
  }
  x -= 1.0;
  double a = coef[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += coef[i] / (x + i);
  return 0.5 * std::log(2.0 * M_PI) + (x + 0.5) * std::log(t) - t + std::log(a);
}

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// Bisection with Newton polish. Monotone in x, so bracketing is safe.
double inverse_incomplete_beta(double a, double b, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("inverse_incomplete_beta: p must be in [0,1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  double lo = 0.0, hi = 1.0, x = 0.5;
  for (int i = 0; i < 200; ++i) {
    x = 0.5 * (lo + hi);
    if (incomplete_beta(a, b, x) < p) lo = x;
    else hi = x;
    if (hi - lo < 1e-15 * std::max(1.0, x)) break;
  }
  // Newton refinement on the bisection result.
  const double ln_beta = log_gamma(a) + log_gamma(b) - log_gamma(a + b);
  for (int i = 0; i < 5; ++i) {
    if (x <= 0.0 || x >= 1.0) break;
    const double f = incomplete_beta(a, b, x) - p;
    const double dens = std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - ln_beta);
    if (dens <= 0.0 || !std::isfinite(dens)) break;
    const double step = f / dens;
    const double nx = x - step;
    if (nx <= lo || nx >= hi) break;
    x = nx;
  }
  return x;
}

double z_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("z_critical: alpha must be in (0,1)");
  return inverse_normal_cdf(1.0 - alpha / 2.0);
}

double group_privacy_bound(const PrivacySpec& spec, int k, double p_prime) {
  if (k < 1) throw std::invalid_argument("group_privacy_bound: k must be >= 1");
  if (!(p_prime >= 0.0 && p_prime <= 1.0))
    throw std::invalid_argument("group_privacy_bound: p_prime must be in [0,1]");
  const double eps = spec.epsilon;
  const double amplified = std::exp(static_cast<double>(k) * eps) * p_prime;
  if (spec.delta == 0.0) return amplified;
  // (1 - e^{k eps}) / (1 - e^{eps}) = expm1(k eps) / expm1(eps); equals the
  // telescoping sum sum_{j<k} e^{j eps} and tends to k as eps -> 0.
  const double geom = std::expm1(static_cast<double>(k) * eps) / std::expm1(eps);
  return amplified + spec.delta * geom;
}

ConfidenceInterval katz_log_interval(long n1, long n0, long samples_n, double alpha) {
  if (samples_n < 1) throw std::invalid_argument("katz_log_interval: samples_n must be >= 1");
  if (n1 < 0 || n0 < 0 || n1 > samples_n || n0 > samples_n)
    throw std::invalid_argument("katz_log_interval: counts must be in [0, samples_n]");
  ConfidenceInterval ci;
  ci.level = 1.0 - alpha;
  ci.method = IntervalMethod::KatzLog;
  if (n1 == 0 || n0 == 0) {
    ci.lower = -kInf;
    ci.upper = kInf;
    return ci;
  }
  const double n = static_cast<double>(samples_n);
  const double center = std::log(static_cast<double>(n1) / static_cast<double>(n0));
  const double var = 1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n0) - 2.0 / n;
  const double half = z_critical(alpha) * std::sqrt(std::max(0.0, var));
  ci.lower = center - half;
  ci.upper = center + half;
  return ci;
}

double clopper_pearson_lower(long k, long n, double tail_alpha) {
  if (n < 1 || k < 0 || k > n) throw std::invalid_argument("clopper_pearson_lower: bad counts");
  if (k == 0) return 0.0;
  return inverse_incomplete_beta(static_cast<double>(k), static_cast<double>(n - k + 1), tail_alpha);
}

double clopper_pearson_upper(long k, long n, double tail_alpha) {
  if (n < 1 || k < 0 || k > n) throw std::invalid_argument("clopper_pearson_upper: bad counts");
  if (k == n) return 1.0;
  return inverse_incomplete_beta(static_cast<double>(k + 1), static_cast<double>(n - k), 1.0 - tail_alpha);
}

double clopper_pearson_ratio_lb(long n1, long n0, long samples_n, double alpha) {
  const double lo1 = clopper_pearson_lower(n1, samples_n, alpha / 2.0);
  const double up0 = clopper_pearson_upper(n0, samples_n, alpha / 2.0);
  if (lo1 <= 0.0) return -kInf;
  return std::log(lo1 / up0);
}

ConfidenceInterval clopper_pearson_ratio_interval(long n1, long n0, long samples_n, double alpha) {
  ConfidenceInterval ci;
  ci.level = 1.0 - alpha;
  ci.method = IntervalMethod::ClopperPearsonRatio;
  ci.lower = clopper_pearson_ratio_lb(n1, n0, samples_n, alpha);
  const double up1 = clopper_pearson_upper(n1, samples_n, alpha / 2.0);
  const double lo0 = clopper_pearson_lower(n0, samples_n, alpha / 2.0);
  ci.upper = (lo0 <= 0.0) ? kInf : std::log(up1 / lo0);
  return ci;
}

double max_detectable_eps(long samples_n, double alpha) {
  if (samples_n < 2) throw std::invalid_argument("max_detectable_eps: samples_n must be >= 2");
  const double n = static_cast<double>(samples_n);
  return std::log(n) - z_critical(alpha) * std::sqrt(1.0 - 1.0 / n);
}

double coverage_simulate(double p1, double p0, long samples_n, double alpha, long trials,
                         IntervalMethod method, std::uint64_t seed) {
  if (!(p1 > 0.0 && p1 < 1.0 && p0 > 0.0 && p0 < 1.0))
    throw std::invalid_argument("coverage_simulate: probabilities must be in (0,1)");
  if (trials < 1000) throw std::invalid_argument("coverage_simulate: need at least 1000 trials");
  const double truth = std::log(p1 / p0);
  Rng rng(derive_seed(seed, 0xC0F));
  long covered = 0;
  for (long t = 0; t < trials; ++t) {
    long n1 = rng.binomial(samples_n, p1);
    long n0 = rng.binomial(samples_n, p0);
    if (n1 == 0) n1 = 1;
    if (n0 == 0) n0 = 1;
    const ConfidenceInterval ci = (method == IntervalMethod::KatzLog)
                                      ? katz_log_interval(n1, n0, samples_n, alpha)
                                      : clopper_pearson_ratio_interval(n1, n0, samples_n, alpha);
    if (ci.lower <= truth && truth <= ci.upper) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(trials);
}

}  // namespace dpaudit
