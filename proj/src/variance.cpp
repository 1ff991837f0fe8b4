#include "lkgrf/variance.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "lkgrf/error.hpp"
#include "lkgrf/flats.hpp"
#include "lkgrf/parallel.hpp"
#include "lkgrf/quadrature.hpp"
#include "lkgrf/rng.hpp"

namespace lkgrf {

double lower_bound(int d, int m, double u, double f0) {
  require(d >= 1 && m >= 0 && m <= d, ErrorCode::invalid_dimension, "lower_bound: need 0 <= m <= d");
  require(f0 > 0.0, ErrorCode::invalid_argument, "lower_bound: f0 must be positive");
  const double flag = flag_coefficient(d, d - m);
  const double h = hermite(d - m, u);
  const double p = normal_pdf(u);
  return flag * flag * std::pow(2.0 * std::numbers::pi, m) * f0 * h * h * p * p;
}

BallRule ball_rule(int d, const RadialGrid& grid) {
  require(d >= 1 && d <= 3, ErrorCode::invalid_dimension, "ball_rule: d must be 1, 2 or 3");
  require(grid.nodes >= 2 && grid.radius > 0.0, ErrorCode::invalid_argument, "ball_rule: bad radial grid");
  const QuadratureRule radial = gauss_legendre(grid.nodes, 0.0, grid.radius);
  std::vector<Eigen::VectorXd> directions;
  double sphere = 0.0;
  if (d == 1) {
    directions = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0)};
    sphere = 2.0;
  } else if (d == 2) {
    for (int a = 0; a < grid.angles; ++a) {
      const double th = 2.0 * std::numbers::pi * a / grid.angles;
      Eigen::VectorXd v(2);
      v << std::cos(th), std::sin(th);
      directions.push_back(v);
    }
    sphere = 2.0 * std::numbers::pi;
  } else {
    const int n = grid.angles * grid.angles / 4;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int a = 0; a < n; ++a) {
      const double z = 1.0 - (2.0 * a + 1.0) / n;
      const double rho = std::sqrt(1.0 - z * z);
      Eigen::VectorXd v(3);
      v << rho * std::cos(golden * a), rho * std::sin(golden * a), z;
      directions.push_back(v);
    }
    sphere = 4.0 * std::numbers::pi;
  }
  BallRule rule;
  const double w_dir = sphere / static_cast<double>(directions.size());
  for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
    const double r = radial.nodes[i];
    const double w = radial.weights[i] * std::pow(r, d - 1) * w_dir;
    for (const auto& v : directions) {
      rule.points.push_back(r * v);
      rule.weights.push_back(w);
    }
  }
  return rule;
}

Eigen::MatrixXd decorrelated_cross_covariance(const CovarianceModel& model, const SigmaMatrix& sigma,
                                              const Eigen::VectorXd& t, const Eigen::MatrixXd& basis_t,
                                              const Eigen::MatrixXd& basis_0) {
  const Eigen::MatrixXd c = jet_cross_covariance(model, t, basis_t, basis_0);
  return sigma.lambda_inv * c * sigma.lambda_inv.transpose();
}

namespace {

Eigen::MatrixXd canonical_basis(int d, int k) { return Eigen::MatrixXd::Identity(d, k); }

Eigen::MatrixXd integrate_cross(const CovarianceModel& model, const SigmaMatrix& sigma, const RadialGrid& grid,
                                bool decorrelate) {
  const int d = model.dimension();
  const Eigen::MatrixXd basis = canonical_basis(d, sigma.k);
  const BallRule rule = ball_rule(d, grid);
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(sigma.D, sigma.D);
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    const Eigen::MatrixXd c = decorrelate
                                  ? decorrelated_cross_covariance(model, sigma, rule.points[i], basis, basis)
                                  : jet_cross_covariance(model, rule.points[i], basis, basis);
    total += rule.weights[i] * c;
  }
  return total;
}

}  // namespace

Q1Report sigma2_q1_integral(const CovarianceModel& model, const ChaosTable& table, const RadialGrid& grid) {
  const SigmaMatrix& sigma = table.sigma;
  const int d = model.dimension();
  require(table.max_order >= 1, ErrorCode::dependency, "sigma2_q1_integral: chaos table lacks order 1");
  const double flag = flag_coefficient(d, d - table.m);
  const double f0 = model.spectral_density(0.0);
  const double two_pi_d = std::pow(2.0 * std::numbers::pi, d);
  const int D = sigma.D;

  MultiIndex eD(D, 0);
  eD[D - 1] = 1;
  const double cD = table.at(eD).value;
  const double lid = sigma.lambda_inv(D - 1, D - 1);

  Q1Report rep;
  rep.reduction = flag * flag * cD * cD * lid * lid * two_pi_d * f0;

  Eigen::VectorXd c1(D);
  for (int k = 0; k < D; ++k) {
    MultiIndex e(D, 0);
    e[k] = 1;
    c1(k) = table.at(e).value;
  }
  RadialGrid coarse = grid;
  coarse.nodes = std::max(2, grid.nodes / 2);
  const Eigen::MatrixXd fine_m = integrate_cross(model, sigma, grid, true);
  const Eigen::MatrixXd coarse_m = integrate_cross(model, sigma, coarse, true);
  rep.brute_force = flag * flag * c1.dot(fine_m * c1);
  const double coarse_value = flag * flag * c1.dot(coarse_m * c1);
  rep.error = std::abs(rep.brute_force - coarse_value);

  const Eigen::MatrixXd raw = integrate_cross(model, sigma, grid, false);
  rep.diagonal_integral = raw(D - 1, D - 1);
  for (int k = 0; k < D; ++k)
    for (int l = 0; l < D; ++l)
      if (k != D - 1 || l != D - 1) rep.max_off_diagonal = std::max(rep.max_off_diagonal, std::abs(raw(k, l)));

  require(std::abs(rep.reduction - rep.brute_force) <= 3.0 * rep.error + 1e-8 + 1e-10 * std::abs(rep.reduction),
          ErrorCode::internal_consistency, "sigma2_q1_integral: reduction and quadrature disagree");
  return rep;
}

double order_q_integrand(const BTensor& b, const Eigen::MatrixXd& r) {
  const int D = b.D, q = b.q;
  require(r.rows() == D && r.cols() == D, ErrorCode::invalid_argument, "order_q_integrand: r must be D x D");
  std::vector<double> cur = b.values, next(cur.size());
  // Contract mode i (stride D^{q-1-i}) with r: T'[.., l, ..] = sum_k r(k, l) T[.., k, ..].
  std::size_t stride = cur.size();
  for (int mode = 0; mode < q; ++mode) {
    stride /= D;
    const std::size_t block = stride * D;
    for (std::size_t base = 0; base < cur.size(); base += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        for (int l = 0; l < D; ++l) {
          double s = 0.0;
          for (int k = 0; k < D; ++k) s += r(k, l) * cur[base + k * stride + inner];
          next[base + l * stride + inner] = s;
        }
      }
    }
    std::swap(cur, next);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < cur.size(); ++i) total += cur[i] * b.values[i];
  return factorial(q) * total;
}

VarianceValue sigma2_q_truncated(const CovarianceModel& model, const ChaosTable& table, int q,
                                 const TruncatedOptions& options) {
  require(q >= 2 && q <= 4, ErrorCode::complexity_guard, "sigma2_q_truncated: q must be in [2, 4]");
  require(options.flat_samples >= 2 || table.m == 0, ErrorCode::insufficient_sample,
          "sigma2_q_truncated: need at least 2 flat samples");
  const int d = model.dimension();
  const SigmaMatrix& sigma = table.sigma;
  const BTensor b = coefficients_b(q, table);
  const double flag = flag_coefficient(d, sigma.k);
  const Eigen::MatrixXd basis = canonical_basis(d, sigma.k);

  // With m = 0 the flat is R^d itself and no direction averaging is needed.
  const int n_flats = table.m == 0 ? 1 : options.flat_samples;
  std::vector<Eigen::MatrixXd> flats(n_flats, basis);
  if (table.m != 0) {
    // Same stream for every q: common random numbers across orders.
    Rng rng = make_stream(options.seed, {0xF1A7u, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(table.m)});
    for (int i = 0; i < n_flats; ++i) flats[i] = sample_linear_flat(d, sigma.k, rng).basis;
  }
  RadialGrid coarse = options.grid;
  coarse.nodes = std::max(2, options.grid.nodes / 2);
  const BallRule fine_rule = ball_rule(d, options.grid);
  const BallRule coarse_rule = ball_rule(d, coarse);

  std::vector<double> fine(n_flats), rough(n_flats);
  parallel_for(static_cast<std::size_t>(n_flats), options.threads, [&](std::size_t f) {
    auto integrate = [&](const BallRule& rule) {
      double s = 0.0;
      for (std::size_t i = 0; i < rule.points.size(); ++i) {
        const Eigen::MatrixXd r = decorrelated_cross_covariance(model, sigma, rule.points[i], basis, flats[f]);
        s += rule.weights[i] * order_q_integrand(b, r);
      }
      return s;
    };
    fine[f] = integrate(fine_rule);
    rough[f] = integrate(coarse_rule);
  });
  double mean = 0.0, mean_rough = 0.0;
  for (int f = 0; f < n_flats; ++f) {
    mean += fine[f];
    mean_rough += rough[f];
  }
  mean /= n_flats;
  mean_rough /= n_flats;
  double var = 0.0;
  for (int f = 0; f < n_flats; ++f) var += (fine[f] - mean) * (fine[f] - mean);
  const double se = n_flats > 1 ? std::sqrt(var / (n_flats - 1) / n_flats) : 0.0;
  const double scale = flag * flag;
  return {scale * mean, scale * (se + std::abs(mean - mean_rough))};
}

VarianceBreakdown variance_breakdown(const CovarianceModel& model, const ChaosTable& table, int Q,
                                     const TruncatedOptions& options) {
  require(Q >= 1 && Q <= 4, ErrorCode::complexity_guard, "variance_breakdown: Q must be in [1, 4]");
  require(table.max_order >= Q, ErrorCode::dependency, "variance_breakdown: chaos table too shallow");
  VarianceBreakdown v;
  v.d = model.dimension();
  v.m = table.m;
  v.u = table.u;
  v.Q = Q;
  v.lower_bound = lower_bound(v.d, v.m, v.u, model.spectral_density(0.0));
  const Q1Report q1 = sigma2_q1_integral(model, table, options.grid);
  v.sigma2_by_order[1] = {q1.reduction, q1.error};
  for (int q = 2; q <= Q; ++q) v.sigma2_by_order[q] = sigma2_q_truncated(model, table, q, options);
  for (const auto& [q, val] : v.sigma2_by_order) v.truncated_total += val.value;
  return v;
}

std::string to_json(const VarianceBreakdown& v) {
  nlohmann::json j;
  j["d"] = v.d;
  j["m"] = v.m;
  j["u"] = v.u;
  j["Q"] = v.Q;
  j["lower_bound"] = v.lower_bound;
  j["truncated_total"] = v.truncated_total;
  nlohmann::json orders = nlohmann::json::object();
  for (const auto& [q, val] : v.sigma2_by_order)
    orders[std::to_string(q)] = {{"value", val.value}, {"error", val.error}};
  j["sigma2_by_order"] = orders;
  return j.dump(2);
}

}  // namespace lkgrf
