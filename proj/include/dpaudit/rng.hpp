#pragma once

#include <cstdint>
#include <initializer_list>

namespace dpaudit {

/// SplitMix64 finalizer. Full-period bijective mix of a 64-bit word.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives a stream seed from (base, tags...). Distinct tag tuples map to
/// distinct streams; the estimator relies on this to keep the search and
/// verification phases on disjoint randomness.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t t : tags) s = mix64(s ^ (t + 0xD1B54A32D192ED03ULL));
  return s;
}
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a) { return derive_seed(base, {a}); }
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return derive_seed(base, {a, b});
}
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return derive_seed(base, {a, b, c});
}

/// Inverse of the standard normal CDF (Wichura's AS241, double precision).
double inverse_normal_cdf(double p);

/// Counter-based generator: output i is mix64(key + i*gamma), so draws are a
/// pure function of (seed, counter) and independent of evaluation order
/// elsewhere. All distribution draws advance the counter deterministically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x6A09E667F3BCC909ULL)), counter_(0) {}

  std::uint64_t next_u64() { return mix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); never returns an exact endpoint.
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index uniform on {0, ..., n-1} via rejection (unbiased).
  std::uint64_t uniform_index(std::uint64_t n);

  double normal() { return inverse_normal_cdf(uniform_open()); }

  double exponential() ;          // mean 1
  double laplace(double scale);   // location 0
  double gamma(double shape);     // scale 1, shape > 0
  long binomial(long n, double p);

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace dpaudit
