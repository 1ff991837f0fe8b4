#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "lkgrf/covariance.hpp"
#include "lkgrf/error.hpp"

using namespace lkgrf;

TEST_SUITE("covariance") {

TEST_CASE("gaussian model normalizations") {
  const CovarianceModel g = make_gaussian_cov(2);
  CHECK(g.radial(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.radial(0.0, 2) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(g.radial(1.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(g.radial(0.0, 1) == 0.0);
  CHECK(g.radial(0.0, 3) == 0.0);
  CHECK(mu4(g) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(make_gaussian_cov(0), Error);
}

TEST_CASE("gaussian spectral density is nonnegative and matches the closed form") {
  for (int d = 1; d <= 3; ++d) {
    const CovarianceModel g = make_gaussian_cov(d);
    for (double rho : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      CHECK(g.spectral_density(rho) >= 0.0);
      CHECK(g.spectral_density(rho) ==
            doctest::Approx(std::pow(2.0 * M_PI, -0.5 * d) * std::exp(-0.5 * rho * rho)).epsilon(1e-12));
    }
  }
}

TEST_CASE("numerical Hankel transform reproduces the gaussian spectral density") {
  for (int d = 1; d <= 3; ++d) {
    const CovarianceModel g = make_gaussian_cov(d);
    for (double rho : {0.0, 0.7, 1.5}) CHECK(spectral_density_numeric(g, rho) == doctest::Approx(g.spectral_density(rho)).epsilon(1e-6));
  }
}

TEST_CASE("radial derivatives agree with central differences of the next-lower order") {
  // A fourth-order difference of R itself is rounding dominated at step 1e-4,
  // so each order is checked against the difference of the order below.
  const std::vector<CovarianceModel> models{make_gaussian_cov(2), make_cauchy_cov(2, 3.0)};
  const double step = 1e-4;
  for (const auto& model : models) {
    for (int k = 1; k <= 4; ++k) {
      for (int i = 1; i <= 50; ++i) {
        const double r = 0.1 * i;
        const double fd = (model.radial(r + step, k - 1) - model.radial(r - step, k - 1)) / (2 * step);
        const double exact = model.radial(r, k);
        CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
      }
    }
  }
}

TEST_CASE("assumption checks") {
  SUBCASE("gaussian passes") {
    const AssumptionReport rep = check_assumptions(make_gaussian_cov(2), 1);
    CHECK(rep.normalization_ok);
    CHECK(rep.integrable);
    CHECK(rep.nondegenerate);
    CHECK(rep.passed());
    for (const auto& l : rep.lag_eigenvalues) CHECK(l.min_eigenvalue > 0.0);
  }
  SUBCASE("doubled variance fails the normalization") {
    const AssumptionReport rep = check_assumptions(make_scaled_cov(make_gaussian_cov(2), 2.0, 1.0), 1);
    CHECK_FALSE(rep.normalization_ok);
    CHECK_FALSE(rep.passed());
  }
  SUBCASE("heavy cauchy tail is flagged as non-integrable") {
    const AssumptionReport rep = check_assumptions(make_cauchy_cov(2, 0.5), 1);
    CHECK_FALSE(rep.integrable);
  }
  SUBCASE("light cauchy tail is integrable") {
    CHECK(check_assumptions(make_cauchy_cov(2, 3.0), 1).integrable);
  }
}

TEST_CASE("sigma for d=1, m=0") {
  const SigmaMatrix s = build_sigma(make_gaussian_cov(1), 0);
  CHECK(s.D == 3);
  CHECK(s.K == 1);
  Eigen::Matrix3d expected;
  expected << 1, 0, 0, 0, 3, -1, 0, -1, 1;
  CHECK((s.sigma - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(s.alpha() == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(s.alpha() == doctest::Approx(0.816497).epsilon(1e-6));
}

TEST_CASE("sigma structure for all (d, m) with d <= 3") {
  for (int d = 1; d <= 3; ++d) {
    const CovarianceModel g = make_gaussian_cov(d);
    for (int m = 0; m < d; ++m) {
      const SigmaMatrix s = build_sigma(g, m);
      CHECK(s.D == s.k + s.K + 1);
      CHECK((s.lambda * s.lambda.transpose() - s.sigma).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(s.sigma.topLeftCorner(s.k, s.k) == Eigen::MatrixXd::Identity(s.k, s.k));
      CHECK(s.lambda.topRightCorner(s.k, s.D - s.k).isZero());
      CHECK(s.lambda.bottomLeftCorner(s.D - s.k, s.k).isZero());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.sigma);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
      // E[d^2_ii X X] = -1.
      const auto layout = jet_layout(s.k);
      for (int c = 0; c < s.D - 1; ++c)
        if (layout[c].kind == JetComponentKind::hessian && layout[c].i == layout[c].j)
          CHECK(s.sigma(c, s.D - 1) == doctest::Approx(-1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("sigma is basis independent") {
  const CovarianceModel g = make_gaussian_cov(3);
  const SigmaMatrix s = build_sigma(g, 1);
  Eigen::MatrixXd basis(3, 2);
  basis.col(0) = Eigen::Vector3d(1, 1, 0).normalized();
  basis.col(1) = Eigen::Vector3d(-1, 1, 1).normalized();
  const Eigen::MatrixXd rotated = jet_cross_covariance(g, Eigen::VectorXd::Zero(3), basis, basis);
  CHECK((rotated - s.sigma).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("jet cross-covariance matches finite differences of Cov") {
  const CovarianceModel g = make_gaussian_cov(1);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(1, 1);
  const double t0 = 0.8, e = 1e-4;
  const Eigen::MatrixXd c = jet_cross_covariance(g, Eigen::VectorXd::Constant(1, t0), I, I);
  auto C = [&](double t) { return g.cov(Eigen::VectorXd::Constant(1, t)); };
  // E[X(t) X(0)] = C(t); E[X'(t) X(0)] = C'(t); E[X(t) X'(0)] = -C'(t).
  CHECK(c(2, 2) == doctest::Approx(C(t0)).epsilon(1e-12));
  CHECK(c(0, 2) == doctest::Approx((C(t0 + e) - C(t0 - e)) / (2 * e)).epsilon(1e-7));
  CHECK(c(2, 0) == doctest::Approx(-(C(t0 + e) - C(t0 - e)) / (2 * e)).epsilon(1e-7));
}

TEST_CASE("table models") {
  SUBCASE("tabulated gaussian reproduces the closed form") {
    std::vector<double> r;
    std::vector<std::array<double, 5>> rows;
    for (int i = 0; i <= 1200; ++i) {
      const double x = 0.01 * i, e = std::exp(-0.5 * x * x);
      r.push_back(x);
      rows.push_back({e, -x * e, (x * x - 1) * e, (3 * x - x * x * x) * e, (x * x * x * x - 6 * x * x + 3) * e});
    }
    const CovarianceModel t = make_table_cov(2, "tab", r, rows);
    const CovarianceModel g = make_gaussian_cov(2);
    for (double x : {0.0, 0.123, 1.0, 2.345, 4.0})
      for (int k = 0; k <= 2; ++k) CHECK(t.radial(x, k) == doctest::Approx(g.radial(x, k)).epsilon(1e-6));
  }
  SUBCASE("missing columns are a capability error") {
    const std::string path = (std::filesystem::temp_directory_path() / "lkgrf_short_table.csv").string();
    {
      std::FILE* f = std::fopen(path.c_str(), "w");
      REQUIRE(f != nullptr);
      std::fputs("r,R,R1,R2\n0,1,0,-1\n1,0.6,-0.6,0\n", f);
      std::fclose(f);
    }
    try {
      load_table_cov(2, path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::capability);
    }
    std::remove(path.c_str());
  }
  SUBCASE("loaded doubled table fails the normalization") {
    const CovarianceModel t = load_table_cov(2, std::string(LKGRF_TEST_DATA) + "/doubled_gaussian.csv");
    CHECK(t.radial(0.0) == doctest::Approx(2.0));
    CHECK_FALSE(check_assumptions(t, 1).normalization_ok);
  }
}

TEST_CASE("unknown model names are rejected") {
  CHECK_THROWS_AS(make_model("matern", 2), Error);
}

}  // TEST_SUITE
