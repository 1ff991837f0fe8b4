// Acceptance suite: one PASS/FAIL line per criterion, followed by the
// measured quantities. Exit status is 0 only if every criterion passes.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lkgrf/chaos.hpp"
#include "lkgrf/covariance.hpp"
#include "lkgrf/experiments.hpp"
#include "lkgrf/fieldsim.hpp"
#include "lkgrf/flats.hpp"
#include "lkgrf/hermite.hpp"
#include "lkgrf/lkc.hpp"
#include "lkgrf/quadrature.hpp"
#include "lkgrf/rice.hpp"
#include "lkgrf/rng.hpp"
#include "lkgrf/stats.hpp"
#include "lkgrf/variance.hpp"

using namespace lkgrf;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool passed = true;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what) {
    passed = passed && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

Outcome identities() {
  Outcome o;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int dim = 1 + i % 4;
    const double c1 = unif(rng), c2 = unif(rng);
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v(j) = unif(rng);
    const Eigen::MatrixXd a = c1 * Eigen::MatrixXd::Identity(dim, dim) + c2 * v * v.transpose();
    worst = std::max(worst, std::abs(det_rank_one(c1, c2, v, dim) - a.determinant()));
  }
  o.require(worst <= 1e-10, fmt("det_rank_one vs dense determinant: max abs error %.3g (<= 1e-10)", worst));

  const CovarianceModel g = make_gaussian_cov(3);
  double rel = 0.0;
  for (int k = 1; k <= 3; ++k)
    for (int i = 1; i <= 50; ++i) {
      const double r = 0.1 * i;
      Eigen::VectorXd t = Eigen::VectorXd::Zero(k);
      t(0) = r;
      if (k > 1) t.head(2) << 0.6 * r, 0.8 * r;
      const double dense = d2cov_on_flat(g, k, t).det_identity_value;
      rel = std::max(rel, std::abs(gradient_pair_det_identity(g, k, r) - dense) / std::abs(dense));
    }
  o.require(rel <= 1e-10, fmt("gradient pair identity vs det(I - D2cov^2): max rel error %.3g (<= 1e-10)", rel));
  return o;
}

Outcome taylor() {
  Outcome o;
  const CovarianceModel g = make_gaussian_cov(1);
  const double mu = mu4(g);
  o.require(std::abs(mu - 3.0) <= 1e-10, fmt("mu4 = %.12g (3 to 1e-10)", mu));
  const TaylorReport r = taylor_remainder_check(g);
  o.require(r.first_slope >= 3.9, fmt("R' remainder slope %.4f (>= 3.9)", r.first_slope));
  o.require(r.second_slope >= 2.9, fmt("R'' remainder slope %.4f (>= 2.9)", r.second_slope));
  return o;
}

Outcome kac_rice() {
  Outcome o;
  const double expected = 10 * std::sqrt(3.0) / pi;
  const CovarianceModel g2 = make_gaussian_cov(2);
  const Grid line = Grid::centered(1, 5.0, 0.005);
  Rng rng = make_stream(303);
  const int lines = 2000;
  double sum = 0.0;
  for (int r = 0; r < lines; ++r) {
    const Flat f = sample_linear_flat(2, 1, rng);
    const FieldSample s = restrict_to_flat(g2, f, line, derive_seed(303, {static_cast<std::uint64_t>(r)}));
    const auto& d = s.gradient[0];
    for (std::size_t i = 0; i + 1 < d.size(); ++i) sum += (d[i] >= 0) != (d[i + 1] >= 0);
  }
  const double mean = sum / lines;
  const double formula = kac_rice_first_moment(g2, 1, 10.0, Eigen::VectorXd::Zero(1)).value;
  o.note(fmt("Kac-Rice value %.6f (10 sqrt(3)/pi = %.6f)", formula, expected));
  o.require(std::abs(mean / expected - 1) <= 0.02,
            fmt("mean zero count of X' on %d lines of length 10: %.4f (within 2%% of %.4f)", lines, mean, expected));

  ExperimentConfig c;
  c.d = 1;
  c.m = {0};
  c.u = {1.0};
  c.N = {20.0};
  c.h = 0.05;
  c.replicates = 2000;
  c.bootstrap_resamples = 200;
  c.seed = 304;
  const RadiusResult rr = run_clt(c).cells.front().radii.front();
  const double se = std::sqrt(rr.variance / rr.values.size());
  o.require(std::abs(rr.mean - 4.0204) <= 3 * se,
            fmt("d=1 EC mean at u=1, T=40: %.4f +- %.4f (4.0204 within 3 SE)", rr.mean, se));
  o.note(fmt("exact Phibar(1) + 40 e^{-1/2} / (2 pi) = %.5f", normal_sf(1.0) + 40 * std::exp(-0.5) / (2 * pi)));
  return o;
}

Outcome chaos_anchor() {
  Outcome o;
  const SigmaMatrix s = build_sigma(make_gaussian_cov(1), 0);
  const double closed = coefficient_c_last_closed_form(s, 1.0);
  CoefficientOptions base, doubled;
  doubled.gh_nodes = 2 * base.gh_nodes;
  const CoefficientResult a = coefficient_c({0, 0, 1}, s, 1.0, base);
  const CoefficientResult b = coefficient_c({0, 0, 1}, s, 1.0, doubled);
  o.require(std::abs(a.value - closed) <= 3 * a.std_error + 1e-12,
            fmt("c(e_D) = %.10f +- %.2g vs closed form %.10f", a.value, a.std_error, closed));
  o.note(fmt("closed form minus quoted 0.078815: %.3g", closed - 0.078815));
  o.require(std::abs(b.value / a.value - 1) <= 0.01,
            fmt("node doubling %d -> %d: relative change %.3g (<= 1%%)", base.gh_nodes, doubled.gh_nodes,
                std::abs(b.value / a.value - 1)));
  bool zeros = true;
  for (auto [d, m] : {std::pair{1, 0}, {2, 1}, {2, 0}}) {
    const SigmaMatrix sm = build_sigma(make_gaussian_cov(d), m);
    for (int k = 0; k < sm.k; ++k) {
      MultiIndex e(sm.D, 0);
      e[k] = 1;
      zeros = zeros && coefficient_c(e, sm, 1.0).value == 0.0;
    }
  }
  o.require(zeros, "c(e_k) = 0 exactly for k <= d - m, (d,m) in {(1,0),(2,1),(2,0)}");
  return o;
}

Eigen::MatrixXd orthonormal_rows(int D, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd G(2 * D, 2 * D);
  for (int i = 0; i < 2 * D; ++i)
    for (int j = 0; j < 2 * D; ++j) G(i, j) = normal(rng);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  return Q.topRows(D);
}

// E[H_n(V) H_n'(W)] for all pairs at once by tensor Gauss-Hermite, with
// (V, W) = (A z, B z) for z standard normal in R^M (so r = A B^T and the joint
// law is valid by construction, singular or not).
std::vector<double> hermite_pair_oracle(const std::vector<MultiIndex>& idx, const Eigen::MatrixXd& A,
                                        const Eigen::MatrixXd& B, int nodes) {
  const int M = static_cast<int>(A.cols());
  const QuadratureRule gh = gauss_hermite(nodes);
  const std::size_t P = idx.size();
  std::vector<double> acc(P * P, 0.0), hv(P), hw(P);
  std::vector<int> pos(M, 0);
  Eigen::VectorXd z(M);
  while (true) {
    double w = 1.0;
    for (int j = 0; j < M; ++j) {
      z(j) = gh.nodes[pos[j]];
      w *= gh.weights[pos[j]];
    }
    const Eigen::VectorXd v = A * z, x = B * z;
    for (std::size_t a = 0; a < P; ++a) {
      hv[a] = hermite_multi(idx[a], v);
      hw[a] = hermite_multi(idx[a], x);
    }
    for (std::size_t a = 0; a < P; ++a)
      for (std::size_t b = 0; b < P; ++b) acc[a * P + b] += w * hv[a] * hw[b];
    int j = 0;
    while (j < M && ++pos[j] == nodes) pos[j++] = 0;
    if (j == M) break;
  }
  return acc;
}

Outcome mehler() {
  Outcome o;
  std::mt19937_64 rng(505);
  double worst = 0.0, worst_orth = 0.0;
  bool ok = true, orth_ok = true;
  std::size_t comparisons = 0;
  for (int D = 1; D <= 3; ++D) {
    std::vector<MultiIndex> idx;
    for (int q = 0; q <= 3; ++q)
      for (const MultiIndex& n : multi_indices(D, q)) idx.push_back(n);
    const std::size_t P = idx.size();
    for (int s = 0; s < 20; ++s) {
      // Orthonormal rows keep V and W standard; r = A B^T is a generic cross-covariance.
      const Eigen::MatrixXd A = orthonormal_rows(D, rng), B = orthonormal_rows(D, rng);
      const Eigen::MatrixXd r = A * B.transpose();
      const std::vector<double> q4 = hermite_pair_oracle(idx, A, B, 4), q5 = hermite_pair_oracle(idx, A, B, 5);
      for (std::size_t a = 0; a < P; ++a)
        for (std::size_t b = 0; b < P; ++b) {
          const double oracle = q5[a * P + b];
          const double se = std::max({std::abs(q5[a * P + b] - q4[a * P + b]), 1e-12, 1e-12 * std::abs(oracle)});
          const double err = std::abs(mehler_expectation(idx[a], idx[b], r) - oracle);
          worst = std::max(worst, err);
          ok = ok && err <= 3 * se;
          ++comparisons;
        }
    }
    // Orthogonality: V = W = z.
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(D, D);
    const std::vector<double> id = hermite_pair_oracle(idx, I, I, 5);
    for (std::size_t a = 0; a < P; ++a)
      for (std::size_t b = 0; b < P; ++b) {
        const double expected = a == b ? multi_factorial(idx[a]) : 0.0;
        const double err = std::abs(id[a * P + b] - expected);
        worst_orth = std::max(worst_orth, err);
        orth_ok = orth_ok && err <= 1e-12 * std::max(1.0, expected);
      }
  }
  o.require(ok, fmt("Mehler vs Gauss-Hermite oracle: %zu comparisons, max abs error %.3g (3 SE)", comparisons, worst));
  o.require(orth_ok, fmt("orthogonality E[H_n H_n'] = n! delta, |n| <= 3, D <= 3: max error %.3g", worst_orth));
  return o;
}

Outcome variance_consistency() {
  Outcome o;
  for (auto [d, m] : {std::pair{1, 0}, {2, 1}, {2, 0}}) {
    const CovarianceModel g = make_gaussian_cov(d);
    const ChaosTable t = build_chaos_table(g, m, 1.0, 1);
    const Q1Report r = sigma2_q1_integral(g, t);
    const double lb = lower_bound(d, m, 1.0, g.spectral_density(0.0));
    const double gap = std::max(std::abs(r.reduction - lb), std::abs(r.brute_force - lb));
    o.require(gap <= 1e-8 + r.error,
              fmt("(d,m,u)=(%d,%d,1): sigma2_1 %.10f, brute force %.10f, lower bound %.10f", d, m, r.reduction,
                  r.brute_force, lb));
  }
  const double lb21 = lower_bound(2, 1, 1.0, 1 / (2 * pi));
  o.require(std::abs(lb21 - 0.577896) <= 1e-6,
            fmt("lower_bound(2,1,1,1/(2pi)) = %.7f vs 0.577896 +- 1e-6", lb21));
  o.note(fmt("flag(2,1) = %.7f (unit-ball volumes); pi^2 phi(1)^2 = %.7f", flag_coefficient(2, 1),
             pi * pi * normal_pdf(1.0) * normal_pdf(1.0)));
  return o;
}

Outcome geometry() {
  Outcome o;
  const double r = 5.0, h = 0.02;
  const Grid g = Grid::centered(2, 5.5, h);
  const int n = g.shape[0];
  std::vector<double> level(g.size());
  Mask disk(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    level[p] = r - g.point(p).norm();
    disk[p] = level[p] >= 0;
  }
  const double area = direct_lk_2d(disk, n, n, h, 2);
  o.require(std::abs(area / (25 * pi) - 1) <= 0.005, fmt("LK2 %.5f vs 25 pi = %.5f", area, 25 * pi));

  // Crofton lines read the set through the lattice level function r - |t|
  // (bilinear interpolation between nodes), the same lattice data the direct
  // estimators use. The nearest-node staircase is reported for reference: its
  // boundary length is that of a staircase, not of the disk.
  auto inside = [&](const Eigen::VectorXd& t) { return t.cwiseAbs().maxCoeff() < 5.5 - h; };
  const FlatFunctional chi = level_set_chi(
      [&](const Eigen::VectorXd& t) { return inside(t) ? interpolate(g, level, t) : -1.0; }, h / 2);
  const LKEstimate lk1 = crofton_lkc(chi, 2, 1, 5.5, 100000, 707);
  o.require(std::abs(lk1.value / (5 * pi) - 1) <= 0.02,
            fmt("LK1 (Crofton, 1e5 lines) %.4f +- %.3f vs 5 pi = %.4f", lk1.value, lk1.mc_std_error.value_or(0), 5 * pi));
  const FlatFunctional stair = level_set_chi(
      [&](const Eigen::VectorXd& t) {
        const int i = static_cast<int>(std::lround((t(0) - g.origin[0]) / h));
        const int j = static_cast<int>(std::lround((t(1) - g.origin[1]) / h));
        if (i < 0 || j < 0 || i >= n || j >= n) return -1.0;
        return disk[static_cast<std::size_t>(i) * n + j] ? 1.0 : -1.0;
      },
      h / 2);
  o.note(fmt("nearest-node staircase reading: %.4f (10^4 lines)", crofton_lkc(stair, 2, 1, 5.5, 10000, 708).value));
  const int chi_disk = euler_char_2d(disk, n, n);
  o.require(chi_disk == 1, fmt("LK0 of the disk = %d", chi_disk));
  Mask annulus(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double rho = g.point(p).norm();
    annulus[p] = rho >= 2.0 && rho <= 4.0;
  }
  const int chi_ann = euler_char_2d(annulus, n, n);
  o.require(chi_ann == 0, fmt("chi of the annulus 2 <= |t| <= 4 = %d", chi_ann));
  return o;
}

ExperimentConfig clt_1d() {
  ExperimentConfig c;
  c.d = 1;
  c.m = {0};
  c.u = {1.0};
  c.N = {10.0, 20.0, 40.0};
  c.h = 0.05;
  c.replicates = 500;
  c.seed = 808;
  return c;
}

double jittered_ks_p(const std::vector<double>& values, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  std::vector<double> x(values);
  for (double& v : x) v += unif(rng);
  return normality_diagnostics(x).ks_p;
}

Outcome clt(const fs::path& out, ExperimentResult& first) {
  Outcome o;
  first = run_clt(clt_1d());
  const CellResult& cell = first.cells.front();
  const RadiusResult& last = cell.radii.back();
  const double ks = last.diagnostics ? last.diagnostics->ks_p : 0.0;
  o.require(ks > 0.01, fmt("(a) KS p at N=40: %.3g (> 0.01)", ks));
  o.note(fmt("(a) integer-valued counts, mean %.3f, sd %.3f; KS p after uniform(-1/2,1/2) jitter %.3g", last.mean,
             std::sqrt(last.variance), jittered_ks_p(last.values, 809)));
  const double ratio = last.normalized_variance / cell.radii[1].normalized_variance;
  o.require(ratio >= 0.75 && ratio <= 1.25, fmt("(a) normalized variance ratio N=20->40: %.4f", ratio));
  const double se = last.normalized_variance_bootstrap.std_error;
  o.require(last.normalized_variance >= 0.9 * cell.lower_bound - 2 * se,
            fmt("(a) normalized variance %.5f >= 0.9 * %.5f - 2 * %.5f", last.normalized_variance, cell.lower_bound, se));
  write_experiment(first, (out / "clt_1d_run1").string());

  ExperimentConfig c;
  c.d = 2;
  c.m = {0, 1, 2};
  c.u = {0.0, 1.0};
  c.N = {5.0, 10.0};
  c.h = 0.1;
  c.replicates = 200;
  c.seed = 818;
  const ExperimentResult two = run_clt(c);
  write_experiment(two, (out / "clt_2d").string());
  int normal_cells = 0;
  bool bounds = true;
  for (const CellResult& cr : two.cells) {
    const RadiusResult& rr = cr.radii.back();
    const double skew = rr.diagnostics ? rr.diagnostics->skewness : NAN;
    const double p = rr.diagnostics ? rr.diagnostics->ks_p : 0.0;
    const bool normal = rr.diagnostics && std::abs(skew) <= 0.5 && p > 0.01;
    normal_cells += normal;
    const Verdict b = bound_check(cr, c.bound_tolerance);
    bounds = bounds && b.passed;
    o.note(fmt("(b) m=%d u=%g: skewness %.3f, KS p %.3g, Var/|B| %.4f, bound %.4f%s%s", cr.key.m, cr.key.u, skew, p,
               rr.normalized_variance, cr.lower_bound, normal ? "" : " [not normal]", b.passed ? "" : " [bound fails]"));
    if (cr.key.m == 0 && rr.diagnostics)
      o.note(fmt("    integer-valued; KS p after uniform(-1/2,1/2) jitter %.3g", jittered_ks_p(rr.values, 819)));
  }
  o.require(normal_cells >= 5, fmt("(b) cells with |skewness| <= 0.5 and KS p > 0.01: %d of 6 (>= 5)", normal_cells));
  o.require(bounds, "(b) bound_check passes for all cells");
  return o;
}

Outcome dirac_convergence() {
  Outcome o;
  // h = 0.002 resolves the eps-ball transit of X' (width ~ 2 eps / |X''|) by
  // about 20 nodes at eps = 0.1.
  const FieldSimulator sim(make_gaussian_cov(1), Grid::centered(1, 10.0, 0.002));
  const std::vector<double> eps{0.4, 0.2, 0.1};
  std::vector<double> mean(eps.size(), 0.0);
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const FieldSample f = sim.sample(derive_seed(909, {static_cast<std::uint64_t>(r)}));
    const double morse = zeta_morse(f, 1.0).interior;
    for (std::size_t e = 0; e < eps.size(); ++e) mean[e] += std::abs(zeta_epsilon(f, 1.0, eps[e]).value - morse) / reps;
  }
  o.require(mean[0] > mean[1] && mean[1] > mean[2],
            fmt("mean |zeta_eps - zeta_morse| at eps 0.4, 0.2, 0.1: %.4f, %.4f, %.4f (strictly decreasing)", mean[0],
                mean[1], mean[2]));
  return o;
}

Outcome determinism(const fs::path& out) {
  Outcome o;
  const fs::path a = out / "clt_1d_run1", b = out / "clt_1d_run2";
  const auto files = write_experiment(run_clt(clt_1d()), b.string());
  bool same = true;
  for (const std::string& f : files) {
    const bool eq = fs::exists(a / f) && slurp(a / f) == slurp(b / f);
    same = same && eq;
    if (!eq) o.note("differs: " + f);
  }
  o.require(same, fmt("%zu CSV/JSON files byte-identical across two runs of (8a)", files.size()));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out = "acceptance_out";
  app.add_option("--out", out, "Directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);
  fs::remove_all(out);
  fs::create_directories(out);

  ExperimentResult first;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"identity suite", identities},
      {"Taylor exponents", taylor},
      {"Kac-Rice oracle", kac_rice},
      {"chaos closed-form anchor", chaos_anchor},
      {"Mehler and orthogonality", mehler},
      {"variance consistency", variance_consistency},
      {"geometry oracles", geometry},
      {"CLT experiment", [&] { return clt(out, first); }},
      {"approximation convergence", dirac_convergence},
      {"determinism", [&] { return determinism(out); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %zu: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs);
    for (const std::string& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    failed += !o.passed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
