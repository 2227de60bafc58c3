#include <doctest.h>

#include <cmath>
#include <unordered_set>
#include <vector>

#include "dpaudit/rng.hpp"
#include "oracles.hpp"

using namespace dpaudit;

TEST_CASE("inverse normal cdf matches the erfc-based oracle") {
  for (double p : {1e-9, 1e-4, 0.025, 0.2, 0.5, 0.8, 0.975, 1.0 - 1e-4}) {
    CHECK(inverse_normal_cdf(p) == doctest::Approx(oracles::normal_quantile(p)).epsilon(1e-10));
  }
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963985).epsilon(1e-9));
  CHECK_THROWS(inverse_normal_cdf(0.0));
  CHECK_THROWS(inverse_normal_cdf(1.0));
}

TEST_CASE("rng determinism and stream separation") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t va = a.next_u64();
    all_equal = all_equal && (va == b.next_u64());
    any_diff = any_diff || (va != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("derived seed streams do not collide across phases, arms and indices") {
  std::unordered_set<std::uint64_t> seen;
  const std::uint64_t master = 1234567;
  for (std::uint64_t phase : {0x5EA7C4ULL, 0x7E71F1ULL}) {
    for (std::uint64_t arm : {0ULL, 1ULL}) {
      for (std::uint64_t i = 0; i < 20000; ++i) {
        const auto seed = derive_seed(master, phase, arm, i);
        REQUIRE(seen.insert(seed).second);
      }
    }
  }
  CHECK(seen.size() == 80000);
}

TEST_CASE("uniform moments") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - mean * mean == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("laplace draws: symmetric, variance 2b^2, tail quantile") {
  Rng rng(11);
  const double b = 0.7;
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  long beyond = 0;
  const double cut = b * std::log(20.0);  // P(|X| > b ln 20) = 1/20
  for (int i = 0; i < n; ++i) {
    const double x = rng.laplace(b);
    sum += x;
    sq += x * x;
    beyond += std::fabs(x) > cut ? 1 : 0;
  }
  CHECK(std::fabs(sum / n) < 0.01 * b);
  CHECK(sq / n == doctest::Approx(2.0 * b * b).epsilon(0.02));
  CHECK(static_cast<double>(beyond) / n == doctest::Approx(0.05).epsilon(0.05));
  CHECK(rng.laplace(0.0) == 0.0);
}

TEST_CASE("normal moments and symmetric quantiles") {
  Rng rng(13);
  const int n = 400000;
  double sum = 0.0, sq = 0.0;
  long beyond = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
    beyond += std::fabs(x) > 1.959963985 ? 1 : 0;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(static_cast<double>(beyond) / n == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("gamma moments") {
  Rng rng(17);
  for (double shape : {0.5, 1.0, 4.0}) {
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gamma(shape);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / n;
    CHECK(mean == doctest::Approx(shape).epsilon(0.02));
    CHECK(sq / n - mean * mean == doctest::Approx(shape).epsilon(0.04));
  }
}

TEST_CASE("binomial sampling matches exact tail probabilities") {
  Rng rng(19);
  const long n = 200;
  const double p = 0.03;
  const int trials = 200000;
  double sum = 0.0;
  long at_least_10 = 0;
  for (int i = 0; i < trials; ++i) {
    const long x = rng.binomial(n, p);
    sum += static_cast<double>(x);
    at_least_10 += x >= 10 ? 1 : 0;
  }
  CHECK(sum / trials == doctest::Approx(n * p).epsilon(0.01));
  const double expected_tail = oracles::binomial_upper_tail(n, 10, p);
  CHECK(static_cast<double>(at_least_10) / trials == doctest::Approx(expected_tail).epsilon(0.08));
  CHECK(rng.binomial(50, 0.0) == 0);
  CHECK(rng.binomial(50, 1.0) == 50);
  SUBCASE("large p goes through the complement path") {
    double total = 0.0;
    for (int i = 0; i < 50000; ++i) total += static_cast<double>(rng.binomial(100, 0.9));
    CHECK(total / 50000 == doctest::Approx(90.0).epsilon(0.005));
  }
}

TEST_CASE("uniform_index stays in range and is roughly uniform") {
  Rng rng(23);
  std::vector<long> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (long c : counts) CHECK(std::fabs(c - 10000.0) < 500.0);
}
