#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lkgrf/chaos.hpp"
#include "lkgrf/covariance.hpp"
#include "lkgrf/error.hpp"
#include "lkgrf/hermite.hpp"
#include "lkgrf/quadrature.hpp"

using namespace lkgrf;

namespace {

// E[H_n(V) H_n'(W)] by tensor Gauss-Hermite with (V, W) = (A z, B z); exact
// for these polynomial integrands once the node count covers the degree.
double mehler_oracle(const MultiIndex& n, const MultiIndex& np, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     int nodes) {
  const int M = static_cast<int>(A.cols());
  const QuadratureRule gh = gauss_hermite(nodes);
  std::vector<int> idx(M, 0);
  double total = 0.0;
  Eigen::VectorXd z(M);
  while (true) {
    double w = 1.0;
    for (int j = 0; j < M; ++j) {
      z(j) = gh.nodes[idx[j]];
      w *= gh.weights[idx[j]];
    }
    total += w * hermite_multi(n, A * z) * hermite_multi(np, B * z);
    int j = 0;
    while (j < M && ++idx[j] == nodes) idx[j++] = 0;
    if (j == M) break;
  }
  return total;
}

// Loadings with orthonormal rows (V and W each standard), r = A B^T.
Eigen::MatrixXd orthonormal_rows(int D, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd G(2 * D, 2 * D);
  for (int i = 0; i < 2 * D; ++i)
    for (int j = 0; j < 2 * D; ++j) G(i, j) = normal(rng);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  return Q.topRows(D);
}

}  // namespace

TEST_SUITE("chaos") {

TEST_CASE("Hermite values") {
  CHECK(hermite(0, 3.7) == 1.0);
  CHECK(hermite(1, 2.0) == 2.0);
  CHECK(hermite(3, 2.0) == doctest::Approx(2.0));
  CHECK(hermite(4, 1.5) == doctest::Approx(std::pow(1.5, 4) - 6 * 1.5 * 1.5 + 3));
  CHECK(hermite_at_zero(1) == 0.0);
  CHECK(hermite_at_zero(2) == -1.0);
  CHECK(hermite_at_zero(4) == 3.0);
  CHECK(hermite_at_zero(6) == -15.0);
  const MultiIndex n{2, 0, 1};
  CHECK(hermite_multi(n, Eigen::Vector3d(2.0, 5.0, -1.0)) == doctest::Approx(3.0 * -1.0));
  CHECK(multi_indices(3, 2).size() == 6u);
}

TEST_CASE("last-coordinate coefficient matches its closed form") {
  const SigmaMatrix s = build_sigma(make_gaussian_cov(1), 0);
  const double closed = coefficient_c_last_closed_form(s, 1.0);
  CHECK(closed == doctest::Approx(std::sqrt(2.0 / 3.0) * normal_pdf(1.0) / std::sqrt(2 * std::numbers::pi)));
  CHECK(std::abs(closed - 0.078815) < 5e-6);
  const CoefficientResult c = coefficient_c({0, 0, 1}, s, 1.0);
  CHECK(std::abs(c.value - closed) <= std::max(3 * c.std_error, 1e-9));
  CHECK_FALSE(c.precision_warning);
}

TEST_CASE("gradient-block parity zeros") {
  for (int m : {0, 1}) {
    const SigmaMatrix s = build_sigma(make_gaussian_cov(2), m);
    for (int k = 0; k < s.k; ++k) {
      MultiIndex e(s.D, 0);
      e[k] = 1;
      const CoefficientResult c = coefficient_c(e, s, 0.7);
      CHECK(c.value == 0.0);
      CHECK(c.method == "zero");
    }
    MultiIndex odd(s.D, 0);
    odd[0] = 3;
    odd[s.D - 1] = 1;
    CHECK(coefficient_c(odd, s, 0.7).value == 0.0);
  }
  CHECK_THROWS_AS(coefficient_c({0, 1}, build_sigma(make_gaussian_cov(1), 0), 1.0), Error);
}

TEST_CASE("b tensors") {
  const ChaosTable t1 = build_chaos_table(make_gaussian_cov(2), 1, 1.0, 2);
  const BTensor b1 = coefficients_b(1, t1);
  for (int k = 0; k < t1.D(); ++k) {
    MultiIndex e(t1.D(), 0);
    e[k] = 1;
    const int kk[1] = {k};
    CHECK(b1.at(kk) == doctest::Approx(t1.at(e).value));
  }
  const BTensor b2 = coefficients_b(2, t1);
  // n = (0,1,1): both orderings of (1,2) carry c(n) / 2.
  const int a[2] = {1, 2}, b[2] = {2, 1};
  CHECK(b2.at(a) == doctest::Approx(t1.at({0, 1, 1}).value / 2));
  CHECK(b2.at(a) == b2.at(b));
  const int diag[2] = {2, 2};
  CHECK(b2.at(diag) == doctest::Approx(t1.at({0, 0, 2}).value));
}

TEST_CASE("Mehler expectation examples") {
  Eigen::MatrixXd r(1, 1);
  r << 0.3;
  CHECK(mehler_expectation({1}, {1}, r) == doctest::Approx(0.3));
  CHECK(mehler_expectation({4}, {4}, r) == doctest::Approx(24 * std::pow(0.3, 4)));
  CHECK(mehler_expectation({2}, {3}, r) == 0.0);
  CHECK_THROWS_AS(mehler_expectation({13}, {13}, r), Error);
}

TEST_CASE("Mehler expectation against a Gauss-Hermite oracle") {
  std::mt19937_64 rng(2024);
  for (int D = 1; D <= 2; ++D)
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd A = orthonormal_rows(D, rng), B = orthonormal_rows(D, rng);
      const Eigen::MatrixXd r = A * B.transpose();
      for (int q = 0; q <= 3; ++q)
        for (const MultiIndex& n : multi_indices(D, q))
          for (const MultiIndex& np : multi_indices(D, q))
            CHECK(mehler_expectation(n, np, r) == doctest::Approx(mehler_oracle(n, np, A, B, 4)).epsilon(1e-9));
    }
}

TEST_CASE("Monte Carlo orthogonality smoke test") {
  // 2 x 10 x 10 comparisons; 4.5 SE keeps the family-wise false alarm rate small.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  const int draws = 200000;
  for (int D = 1; D <= 2; ++D) {
    std::vector<MultiIndex> all;
    for (int q = 0; q <= 3; ++q)
      for (const MultiIndex& n : multi_indices(D, q)) all.push_back(n);
    const std::size_t P = all.size();
    std::vector<double> sum(P * P, 0.0), sum_sq(P * P, 0.0), h(P);
    Eigen::VectorXd y(D);
    for (int i = 0; i < draws; ++i) {
      for (int j = 0; j < D; ++j) y(j) = normal(rng);
      for (std::size_t a = 0; a < P; ++a) h[a] = hermite_multi(all[a], y);
      for (std::size_t a = 0; a < P; ++a)
        for (std::size_t b = 0; b < P; ++b) {
          const double v = h[a] * h[b];
          sum[a * P + b] += v;
          sum_sq[a * P + b] += v * v;
        }
    }
    for (std::size_t a = 0; a < P; ++a)
      for (std::size_t b = 0; b < P; ++b) {
        const double mean = sum[a * P + b] / draws;
        const double se = std::sqrt((sum_sq[a * P + b] / draws - mean * mean) / draws);
        const double expected = a == b ? multi_factorial(all[a]) : 0.0;
        CHECK(std::abs(mean - expected) <= 4.5 * se + 1e-12);
      }
  }
}

TEST_CASE("Wick moments") {
  Eigen::Matrix2d c2;
  c2 << 1, 0.4, 0.4, 1;
  CHECK(wick_moment(c2) == doctest::Approx(0.4));
  CHECK(wick_moment(Eigen::MatrixXd::Ones(4, 4)) == doctest::Approx(3.0));
  CHECK(wick_moment(Eigen::MatrixXd::Identity(3, 3)) == 0.0);

  Eigen::Matrix4d c;
  c << 1.0, 0.5, 0.2, -0.3,
       0.5, 1.0, 0.1, 0.4,
       0.2, 0.1, 1.0, 0.3,
      -0.3, 0.4, 0.3, 1.0;
  const double pairings = c(0, 1) * c(2, 3) + c(0, 2) * c(1, 3) + c(0, 3) * c(1, 2);
  CHECK(wick_moment(c) == doctest::Approx(pairings));
  const Eigen::Matrix4d L = c.llt().matrixL();
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  const int draws = 10000000;
  double s = 0, s2 = 0;
  for (int i = 0; i < draws; ++i) {
    const Eigen::Vector4d z(normal(rng), normal(rng), normal(rng), normal(rng));
    const Eigen::Vector4d x = L * z;
    const double p = x.prod();
    s += p;
    s2 += p * p;
  }
  const double mean = s / draws, se = std::sqrt((s2 / draws - mean * mean) / draws);
  CHECK(std::abs(mean - wick_moment(c)) < 3 * se);
}

TEST_CASE("Arcones bound") {
  std::mt19937_64 rng(5);
  CHECK(arcones_tau(Eigen::MatrixXd::Zero(2, 2)) == 0.0);
  Eigen::Matrix2d r;
  r << 0.2, -0.3, 0.1, 0.1;
  CHECK(arcones_tau(r) == doctest::Approx(0.5));

  Eigen::MatrixXd rho(1, 1);
  rho << 0.6;
  const ArconesCheck tight = arcones_bound_check([](const Eigen::VectorXd& v) { return hermite(2, v(0)); }, rho,
                                                 2, 400000, rng);
  CHECK(tight.bound == doctest::Approx(2 * 0.36).epsilon(0.02));
  CHECK(tight.covariance == doctest::Approx(2 * 0.36).epsilon(0.03));
  CHECK(tight.holds);

  const ArconesCheck mix = arcones_bound_check(
      [](const Eigen::VectorXd& v) { return hermite(1, v(0)) + hermite(2, v(1)); }, r, 1, 1000000, rng);
  CHECK(mix.holds);

  CHECK_THROWS_AS(arcones_bound_check([](const Eigen::VectorXd& v) { return v(0); },
                                      Eigen::MatrixXd::Identity(1, 1), 1, 100, rng),
                  Error);
}

TEST_CASE("chaos variance by order") {
  // First order in d = 1: besides c(e_3), the Hessian coordinate y_2 carries
  // c(e_2) = -(2 pi)^{-1/2} sqrt(3) E[y_2^2 1{X >= u}], and with
  // X = -y_2 / sqrt(3) + sqrt(2/3) y_3 that expectation is Phibar(u) + u phi(u) / 3.
  auto first_order = [](double u) {
    const double c3 = std::sqrt(2.0 / 3.0) * u * normal_pdf(u) / std::sqrt(2 * std::numbers::pi);
    const double c2 = -std::sqrt(3.0) * (normal_sf(u) + u * normal_pdf(u) / 3.0) / std::sqrt(2 * std::numbers::pi);
    return std::pair{c2, c3};
  };
  const ChaosTable t = build_chaos_table(make_gaussian_cov(1), 0, 1.0, 4);
  const auto [c2, c3] = first_order(1.0);
  CHECK(t.at({0, 1, 0}).value == doctest::Approx(c2).epsilon(1e-6));
  CHECK(t.at({1, 0, 0}).value == 0.0);
  CHECK(chaos_variance_per_order(t, 1) == doctest::Approx(c2 * c2 + c3 * c3).epsilon(1e-5));
  CHECK(t.at({0, 0, 1}).value * t.at({0, 0, 1}).value == doctest::Approx(0.0062118).epsilon(2e-4));
  CHECK(hermite_rank(t) == 1);
  double previous = 0.0, partial = 0.0;
  for (int q = 1; q <= 4; ++q) {
    partial += chaos_variance_per_order(t, q);
    CHECK(partial >= previous);
    previous = partial;
  }

  // At u = 0, H_1(0) = 0 removes c(e_3) but not the Hessian term.
  const ChaosTable t0 = build_chaos_table(make_gaussian_cov(1), 0, 0.0, 2);
  CHECK(std::abs(t0.at({0, 0, 1}).value) < 1e-12);
  CHECK(chaos_variance_per_order(t0, 1) == doctest::Approx(first_order(0.0).first * first_order(0.0).first).epsilon(1e-5));
}

TEST_CASE("coefficient cache round trip") {
  const std::string path = (std::filesystem::temp_directory_path() / "lkgrf_cache_test.csv").string();
  std::filesystem::remove(path);
  CoefficientCache cache(path);
  const ChaosTable t = build_chaos_table(make_gaussian_cov(1), 0, 1.0, 2, {}, &cache);
  cache.save();
  CoefficientCache reloaded(path);
  const auto hit = reloaded.lookup("gaussian", 1, 0, 1.0, {0, 0, 1});
  REQUIRE(hit.has_value());
  CHECK(hit->value == doctest::Approx(t.at({0, 0, 1}).value).epsilon(1e-12));
  const ChaosTable again = build_chaos_table(make_gaussian_cov(1), 0, 1.0, 2, {}, &reloaded);
  CHECK(again.at({0, 0, 1}).value == hit->value);
  CHECK_FALSE(reloaded.lookup("gaussian", 1, 0, 2.0, {0, 0, 1}).has_value());
  std::filesystem::remove(path);
}

}  // TEST_SUITE
