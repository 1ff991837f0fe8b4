#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lkgrf/error.hpp"
#include "lkgrf/stats.hpp"

using namespace lkgrf;

namespace {

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("sample moments") {
  const std::vector<double> x{1, 2, 3, 4, 10};
  const Moments m = sample_moments(x);
  CHECK(m.mean == doctest::Approx(4.0));
  CHECK(m.variance == doctest::Approx(12.5));
  CHECK(sample_variance(x) == doctest::Approx(12.5));
  CHECK(m.skewness > 0.0);
  const std::vector<double> z = standardize(x);
  CHECK(sample_moments(z).mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sample_variance(z) == doctest::Approx(1.0));
}

TEST_CASE("Dallal-Wilkinson p-values") {
  // Reference values from an independent implementation (statsmodels pval_lf).
  CHECK(lilliefors_p(0.15, 60) == doctest::Approx(0.0018120404).epsilon(1e-6));
  CHECK(lilliefors_p(0.12, 100) == doctest::Approx(0.0011802654).epsilon(1e-6));
  CHECK(lilliefors_p(0.08, 200) == doctest::Approx(0.0033661733).epsilon(1e-6));
  CHECK(lilliefors_p(0.07, 500) == doctest::Approx(4.00158e-06).epsilon(1e-5));
  CHECK(lilliefors_p(0.10, 80) == doctest::Approx(0.0463554904).epsilon(1e-6));
  CHECK(lilliefors_p(0.01, 100) > 0.1);
  CHECK(lilliefors_p(0.01, 100) <= 1.0);
}

TEST_CASE("normal samples are accepted at the nominal rate") {
  const int runs = 400;
  int rejected = 0;
  for (int r = 0; r < runs; ++r)
    rejected += normality_diagnostics(normal_draws(500, 1000 + r)).ks_p < 0.01;
  const double rate = static_cast<double>(rejected) / runs;
  CHECK(rate <= 0.01 + 3 * std::sqrt(0.01 * 0.99 / runs));
}

TEST_CASE("skewed samples are rejected") {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> x(500);
  for (double& v : x) v = expo(rng);
  const NormalityDiagnostics nd = normality_diagnostics(x);
  CHECK(nd.ks_p < 0.001);
  CHECK(nd.skewness > 1.0);
}

TEST_CASE("degenerate and small samples") {
  CHECK_THROWS_AS(normality_diagnostics(std::vector<double>(100, 2.0)), Error);
  try {
    normality_diagnostics(std::vector<double>(100, 2.0));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_distribution);
  }
  try {
    normality_diagnostics(normal_draws(49, 1));
    FAIL("expected insufficient_sample");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_sample);
  }
}

TEST_CASE("location-scale invariance and Q-Q output") {
  const std::vector<double> x = normal_draws(300, 9);
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return 5.0 - 3.0 * v; });
  const NormalityDiagnostics a = normality_diagnostics(x), b = normality_diagnostics(y);
  CHECK(a.ks_statistic == doctest::Approx(b.ks_statistic).epsilon(1e-10));
  CHECK(a.ks_p == doctest::Approx(b.ks_p).epsilon(1e-10));
  CHECK(a.excess_kurtosis == doctest::Approx(b.excess_kurtosis).epsilon(1e-10));
  CHECK(a.skewness == doctest::Approx(-b.skewness).epsilon(1e-10));
  REQUIRE(a.qq.size() == x.size());
  for (std::size_t i = 1; i < a.qq.size(); ++i) {
    CHECK(a.qq[i].theoretical > a.qq[i - 1].theoretical);
    CHECK(a.qq[i].empirical >= a.qq[i - 1].empirical);
  }
}

TEST_CASE("bootstrap") {
  const std::vector<double> x = normal_draws(400, 17);
  auto var = [](std::span<const double> s) { return sample_variance(s); };
  const BootstrapResult a = bootstrap(x, var, 500, 1), b = bootstrap(x, var, 500, 1);
  CHECK(a.std_error == b.std_error);
  CHECK(a.estimate == doctest::Approx(sample_variance(x)));
  // SE of a normal sample variance is about sqrt(2 / n).
  CHECK(a.std_error == doctest::Approx(std::sqrt(2.0 / 400)).epsilon(0.25));
  CHECK(a.lower < a.estimate);
  CHECK(a.upper > a.estimate);
}

}  // TEST_SUITE
