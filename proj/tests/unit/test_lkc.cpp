#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "lkgrf/fieldsim.hpp"
#include "lkgrf/lkc.hpp"
#include "lkgrf/rng.hpp"
#include "lkgrf/stats.hpp"

using namespace lkgrf;

namespace {

Mask from_rows(const std::vector<const char*>& rows) {
  Mask m;
  for (const char* r : rows)
    for (const char* c = r; *c; ++c) m.push_back(*c == '#');
  return m;
}

std::vector<double> disk_level(const Grid& g, double radius) {
  std::vector<double> level(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) level[p] = radius - g.point(p).norm();
  return level;
}

FieldSample cos_field(double a, double b, double h) {
  Grid g;
  g.d = 1;
  g.h = h;
  g.origin = {a};
  g.shape = {static_cast<int>(std::lround((b - a) / h)) + 1};
  return tabulate_field(g, [](const Eigen::VectorXd& t) {
    PointJet j;
    j.value = std::cos(t(0));
    j.gradient = Eigen::VectorXd::Constant(1, -std::sin(t(0)));
    j.hessian = Eigen::MatrixXd::Constant(1, 1, -std::cos(t(0)));
    return j;
  });
}

Flat line_through(const Eigen::Vector2d& dir, const Eigen::Vector2d& foot) {
  Flat f;
  f.basis = dir.normalized();
  f.foot = foot;
  f.complement = Eigen::Vector2d(-f.basis(1, 0), f.basis(0, 0));
  return f;
}

}  // namespace

TEST_SUITE("lkc") {

TEST_CASE("cubical Euler characteristic examples") {
  const Mask runs{1, 1, 0, 1, 0, 0, 1, 1, 1};
  CHECK(euler_char_1d(runs) == 3);
  CHECK(euler_char_1d(Mask(5, 0)) == 0);

  CHECK(euler_char_2d(from_rows({"###", "#.#", "###"}), 3, 3) == 0);
  CHECK(euler_char_2d(from_rows({"##...", "##...", ".....", "...##"}), 4, 5) == 2);
  // Diagonal contact: closed pixels share a vertex, so the union is connected.
  CHECK(euler_char_2d(from_rows({"#.", ".#"}), 2, 2) == 1);

  Mask hollow(27, 1);
  hollow[13] = 0;
  CHECK(euler_char_3d(hollow, 3, 3, 3) == 2);
  Mask solid(27, 1);
  CHECK(euler_char_3d(solid, 3, 3, 3) == 1);
}

TEST_CASE("lattice geometry of a disk") {
  const double r = 5.0, h = 0.02;
  const Grid g = Grid::centered(2, 5.5, h);
  const std::vector<double> level = disk_level(g, r);
  const int n = g.shape[0];
  CHECK(direct_lk_2d(level, n, n, h, 2) == doctest::Approx(std::numbers::pi * r * r).epsilon(0.005));
  CHECK(direct_lk_2d(level, n, n, h, 1) == doctest::Approx(std::numbers::pi * r).epsilon(0.01));
  CHECK(direct_lk_2d(level, n, n, h, 0) == doctest::Approx(1.0));
}

TEST_CASE("Crofton estimate of the half perimeter") {
  const double r = 5.0;
  const FlatFunctional chi = level_set_chi([r](const Eigen::VectorXd& t) { return r - t.norm(); }, 0.01);
  const LKEstimate e = crofton_lkc(chi, 2, 1, 5.5, 20000, 77);
  REQUIRE(e.mc_std_error.has_value());
  CHECK(std::abs(e.value - std::numbers::pi * r) < std::max(0.02 * std::numbers::pi * r, 3 * *e.mc_std_error));
  CHECK(e.flats_used.value() == 20000u);
  const LKEstimate whole = crofton_lkc(chi, 2, 0, 5.5, 1, 77);
  CHECK(whole.value == doctest::Approx(1.0));
}

TEST_CASE("chi along a line does not depend on its orientation") {
  const FlatFunctional chi =
      level_set_chi([](const Eigen::VectorXd& t) { return std::cos(t(0)) * std::cos(t(1)) - 0.2; }, 0.01);
  const Eigen::Vector2d dir(0.3, 1.0), foot = Eigen::Vector2d(1.0, -0.3).normalized() * 1.7;
  CHECK(chi(line_through(dir, foot), 6.0).value == chi(line_through(-dir, foot), 6.0).value);
}

TEST_CASE("Morse counts of a cosine") {
  const FieldSample f = cos_field(0.5, 6.5, 0.001);
  const MorseCount mc = zeta_morse(f, 0.5);
  CHECK(mc.interior == 1);
  CHECK(mc.total() == 2);
  CHECK_FALSE(mc.suspect());
  const ExcursionSet e = excursion_set(f, 0.5, std::numeric_limits<double>::infinity());
  CHECK(euler_char_1d(e.mask) == mc.total());
}

TEST_CASE("Dirac approximation of a cosine") {
  CHECK(zeta_epsilon(cos_field(0.5, 6.5, 0.001), 0.5, 0.1).value == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(zeta_epsilon(cos_field(0.5, 6.0, 0.001), 0.5, 0.1).value) < 1e-12);
  CHECK(zeta_epsilon(cos_field(0.5, 6.5, 0.01), 0.5, 0.005).resolution_warning);
}

TEST_CASE("monotone fields and high levels have no interior critical points") {
  Grid g;
  g.d = 1;
  g.h = 0.01;
  g.origin = {-1.0};
  g.shape = {201};
  const FieldSample f = tabulate_field(g, [](const Eigen::VectorXd& t) {
    PointJet j;
    j.value = t(0);
    j.gradient = Eigen::VectorXd::Ones(1);
    j.hessian = Eigen::MatrixXd::Zero(1, 1);
    return j;
  });
  CHECK(zeta_morse(f, 0.0).interior == 0);
  CHECK(zeta_morse(f, 0.0).total() == 1);
  CHECK(zeta_epsilon(f, 0.0, 0.1).value == 0.0);

  const FieldSample x = simulate(make_gaussian_cov(2), Grid::centered(2, 4.0, 0.1), 5);
  CHECK(zeta_morse(x, 50.0, 4.0).total() == 0);
  CHECK(zeta_epsilon(x, 50.0, 0.2, 4.0).value == 0.0);
  CHECK(direct_lk_2d(window_level(x, 50.0, 4.0), x.grid.shape[0], x.grid.shape[1], x.grid.h, 1) == 0.0);
}

TEST_CASE("Morse counts agree with run counts in one dimension") {
  const FieldSimulator sim(make_gaussian_cov(1), Grid::centered(1, 10.0, 0.05));
  int agree = 0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    const FieldSample f = sim.sample(derive_seed(3, {static_cast<std::uint64_t>(r)}));
    for (double u : {0.0, 1.0}) {
      const ExcursionSet e = excursion_set(f, u, 10.0);
      agree += zeta_morse(f, u, 10.0).total() == euler_char_1d(e.mask);
    }
  }
  CHECK(agree >= static_cast<int>(0.99 * 2 * reps));
}

TEST_CASE("excursion area decreases with the level") {
  const FieldSample f = simulate(make_gaussian_cov(2), Grid::centered(2, 5.0, 0.1), 12);
  double previous = std::numeric_limits<double>::infinity();
  for (double u = -2.0; u <= 2.0; u += 0.5) {
    const ExcursionSet e = excursion_set(f, u, 5.0);
    const double area = direct_lk_2d(e.mask, f.grid.shape[0], f.grid.shape[1], f.grid.h, 2);
    CHECK(area <= previous);
    previous = area;
  }
}

TEST_CASE("direct and Crofton half perimeters of Gaussian excursions agree") {
  const double N = 5.0, u = 0.5;
  const FieldSimulator sim(make_gaussian_cov(2), Grid::centered(2, N + 0.5, 0.05));
  std::vector<double> direct, crofton;
  for (int r = 0; r < 40; ++r) {
    const FieldSample f = sim.sample(derive_seed(17, {static_cast<std::uint64_t>(r)}));
    direct.push_back(direct_lk_2d(window_level(f, u, N), f.grid.shape[0], f.grid.shape[1], f.grid.h, 1));
    crofton.push_back(crofton_lkc(field_chi(f, u, LineCount::morse), 2, 1, N, 400, 1000 + r).value);
  }
  const double md = sample_moments(direct).mean, mc = sample_moments(crofton).mean;
  CHECK(std::abs(md / mc - 1.0) < 0.05);
  double sdc = 0, sdd = 0, scc = 0;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    sdc += (direct[i] - md) * (crofton[i] - mc);
    sdd += (direct[i] - md) * (direct[i] - md);
    scc += (crofton[i] - mc) * (crofton[i] - mc);
  }
  CHECK(sdc / std::sqrt(sdd * scc) > 0.9);
}

TEST_CASE("interpolation reproduces linear functions") {
  const Grid g = Grid::centered(2, 1.0, 0.25);
  std::vector<double> v(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) v[p] = 2.0 * g.point(p)(0) - g.point(p)(1) + 0.5;
  const Eigen::Vector2d t(0.13, -0.61);
  CHECK(interpolate(g, v, t) == doctest::Approx(2 * 0.13 + 0.61 + 0.5));
}

}  // TEST_SUITE
