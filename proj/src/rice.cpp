#include "lkgrf/rice.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "lkgrf/error.hpp"
#include "lkgrf/hermite.hpp"
#include "lkgrf/quadrature.hpp"
#include "lkgrf/rng.hpp"

namespace lkgrf {

double det_rank_one(double c1, double c2, const Eigen::VectorXd& v, int dim) {
  require(dim >= 1 && v.size() == dim, ErrorCode::invalid_argument, "det_rank_one: |v| must equal dim");
  return std::pow(c1, dim) + std::pow(c1, dim - 1) * c2 * v.squaredNorm();
}

FlatCovJet d2cov_on_flat(const CovarianceModel& model, int k, const Eigen::VectorXd& t) {
  require(k >= 1 && t.size() == k, ErrorCode::invalid_argument, "d2cov_on_flat: t must have k entries");
  FlatCovJet j;
  j.k = k;
  j.r = t.norm();
  if (j.r < 1e-8) {
    j.limit = true;
    j.d2cov = -Eigen::MatrixXd::Identity(k, k);
    j.det_identity_value = 0.0;
    return j;
  }
  const double r = j.r;
  const double r1 = model.radial(r, 1), r2 = model.radial(r, 2);
  j.d2cov = (r1 / r) * Eigen::MatrixXd::Identity(k, k) + (r2 / (r * r) - r1 / (r * r * r)) * t * t.transpose();
  j.det_identity_value = (Eigen::MatrixXd::Identity(k, k) - j.d2cov * j.d2cov).determinant();
  return j;
}

double gradient_pair_det_identity(const CovarianceModel& model, int k, double r) {
  require(k >= 1, ErrorCode::invalid_argument, "gradient_pair_det_identity: k must be >= 1");
  if (r < 1e-8) return 0.0;
  const double a = model.radial(r, 1) / r;
  const double b = model.radial(r, 2);
  return std::pow(1.0 - a * a, k - 1) * (1.0 - b * b);
}

namespace {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(std::max(y[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TaylorReport taylor_remainder_check(const CovarianceModel& model, double mu) {
  TaylorReport rep;
  rep.mu = std::isnan(mu) ? model.radial(0.0, 4) : mu;
  constexpr int kPoints = 9;
  bool all_zero_1 = true, all_zero_2 = true;
  for (int i = 0; i < kPoints; ++i) {
    const double r = std::pow(10.0, -3.0 + 2.0 * i / (kPoints - 1));
    rep.radii.push_back(r);
    const double e1 = std::abs(model.radial(r, 1) + r - rep.mu * r * r * r / 6.0);
    const double e2 = std::abs(model.radial(r, 2) + 1.0 - rep.mu * r * r / 2.0);
    rep.first_remainder.push_back(e1);
    rep.second_remainder.push_back(e2);
    all_zero_1 = all_zero_1 && e1 == 0.0;
    all_zero_2 = all_zero_2 && e2 == 0.0;
  }
  rep.first_slope = all_zero_1 ? std::numeric_limits<double>::infinity() : loglog_slope(rep.radii, rep.first_remainder);
  rep.second_slope =
      all_zero_2 ? std::numeric_limits<double>::infinity() : loglog_slope(rep.radii, rep.second_remainder);
  rep.passed = rep.first_slope >= 3.9 && rep.second_slope >= 2.9;
  return rep;
}

namespace {

Eigen::MatrixXd hessian_covariance(const CovarianceModel& model, int k) {
  const CovarianceModel mk = model.with_dimension(k);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
  const Eigen::MatrixXd jet = jet_cross_covariance(mk, Eigen::VectorXd::Zero(k), I, I);
  const int K = k * (k + 1) / 2;
  return jet.block(k, k, K, K);
}

double symmetric_det(const Eigen::VectorXd& h, int k) {
  Eigen::MatrixXd s(k, k);
  int pos = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) s(i, j) = s(j, i) = h(pos++);
  return s.determinant();
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

MomentEstimate expected_abs_det_hessian(const CovarianceModel& model, int k, std::size_t samples,
                                        std::uint64_t seed) {
  require(k >= 1 && k <= model.dimension(), ErrorCode::invalid_dimension,
          "expected_abs_det_hessian: need 1 <= k <= d");
  if (k == 1) return {std::sqrt(2.0 * model.radial(0.0, 4) / std::numbers::pi), 0.0};
  require(samples >= 2, ErrorCode::insufficient_sample, "expected_abs_det_hessian: need >= 2 samples");
  const Eigen::MatrixXd factor = psd_factor(hessian_covariance(model, k));
  const int K = static_cast<int>(factor.rows());
  Rng rng = make_stream(seed, {0xDE7u, static_cast<std::uint64_t>(k)});
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(K);
  // Antithetic pairs (z, -z): |det| is even for k even, so pairs are averaged
  // as a single observation to keep the standard error honest.
  const std::size_t pairs = samples / 2;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    for (int j = 0; j < K; ++j) z(j) = normal(rng);
    const Eigen::VectorXd h = factor * z;
    const double v = 0.5 * (std::abs(symmetric_det(h, k)) + std::abs(symmetric_det(-h, k)));
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(pairs);
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sum2 / n - mean * mean) / (n - 1))};
}

MomentEstimate kac_rice_first_moment(const CovarianceModel& model, int k, double window_measure,
                                     const Eigen::VectorXd& y, std::size_t samples, std::uint64_t seed) {
  require(y.size() == k, ErrorCode::invalid_argument, "kac_rice_first_moment: y must have k entries");
  require(window_measure >= 0.0, ErrorCode::invalid_argument, "kac_rice_first_moment: negative window");
  const MomentEstimate e = expected_abs_det_hessian(model, k, samples, seed);
  const double density = std::pow(2.0 * std::numbers::pi, -0.5 * k) * std::exp(-0.5 * y.squaredNorm());
  return {e.value * density * window_measure, e.std_error * density * window_measure};
}

double gradient_pair_density(const CovarianceModel& model, int k, const Eigen::VectorXd& t,
                             const Eigen::VectorXd& y) {
  const FlatCovJet j = d2cov_on_flat(model, k, t);
  require(!j.limit, ErrorCode::singularity, "gradient_pair_density: coincident points");
  Eigen::MatrixXd c(2 * k, 2 * k);
  c.setIdentity();
  c.topRightCorner(k, k) = -j.d2cov;
  c.bottomLeftCorner(k, k) = -j.d2cov.transpose();
  Eigen::VectorXd yy(2 * k);
  yy << y, y;
  // Dense determinant on purpose: the closed form is checked against this.
  const double det = c.determinant();
  require(det > 0.0, ErrorCode::singularity, "gradient_pair_density: singular gradient covariance");
  const double quad = yy.dot(c.ldlt().solve(yy));
  return std::pow(2.0 * std::numbers::pi, -static_cast<double>(k)) / std::sqrt(det) * std::exp(-0.5 * quad);
}

MomentEstimate kac_rice_second_moment_integrand(const CovarianceModel& model, int k, const Eigen::VectorXd& t,
                                                const Eigen::VectorXd& y, std::size_t samples,
                                                std::uint64_t seed) {
  require(k == 1 || k == 2, ErrorCode::capability, "second-moment integrand implemented for k in {1, 2}");
  require(t.size() == k && y.size() == k, ErrorCode::invalid_argument,
          "kac_rice_second_moment_integrand: t and y must have k entries");
  require(t.norm() >= 1e-8, ErrorCode::singularity, "kac_rice_second_moment_integrand: t = 0");
  const CovarianceModel mk = model.with_dimension(k);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
  const Eigen::MatrixXd same = jet_cross_covariance(mk, Eigen::VectorXd::Zero(k), I, I);
  const Eigen::MatrixXd cross = jet_cross_covariance(mk, t, I, I);  // E[J(t) J(0)^T]
  const int K = k * (k + 1) / 2;
  // Joint order: grad(t), grad(0), hess(t), hess(0).
  const int n = 2 * k + 2 * K;
  Eigen::MatrixXd c(n, n);
  c.setZero();
  auto grad = [&](const Eigen::MatrixXd& m) { return m.block(0, 0, k, k); };
  auto gh = [&](const Eigen::MatrixXd& m) { return m.block(0, k, k, K); };
  auto hg = [&](const Eigen::MatrixXd& m) { return m.block(k, 0, K, k); };
  auto hh = [&](const Eigen::MatrixXd& m) { return m.block(k, k, K, K); };
  c.block(0, 0, k, k) = grad(same);
  c.block(k, k, k, k) = grad(same);
  c.block(0, k, k, k) = grad(cross);
  c.block(k, 0, k, k) = grad(cross).transpose();
  c.block(2 * k, 2 * k, K, K) = hh(same);
  c.block(2 * k + K, 2 * k + K, K, K) = hh(same);
  c.block(2 * k, 2 * k + K, K, K) = hh(cross);
  c.block(2 * k + K, 2 * k, K, K) = hh(cross).transpose();
  // Hessian/gradient blocks: same-point blocks vanish for isotropic fields.
  c.block(2 * k, 0, K, k) = hg(same);
  c.block(2 * k, k, K, k) = hg(cross);
  c.block(2 * k + K, 0, K, k) = gh(cross).transpose();
  c.block(2 * k + K, k, K, k) = hg(same);
  c.block(0, 2 * k, 2 * k, 2 * K) = c.block(2 * k, 0, 2 * K, 2 * k).transpose();

  const Eigen::MatrixXd cgg = c.topLeftCorner(2 * k, 2 * k);
  const Eigen::MatrixXd chg = c.block(2 * k, 0, 2 * K, 2 * k);
  const Eigen::MatrixXd chh = c.bottomRightCorner(2 * K, 2 * K);
  Eigen::LDLT<Eigen::MatrixXd> solver(cgg);
  require(solver.info() == Eigen::Success && (solver.vectorD().array() > 1e-14).all(), ErrorCode::singularity,
          "kac_rice_second_moment_integrand: singular gradient covariance");
  Eigen::VectorXd yy(2 * k);
  yy << y, y;
  const Eigen::VectorXd mean = chg * solver.solve(yy);
  const Eigen::MatrixXd cond = chh - chg * solver.solve(chg.transpose());
  const double density = gradient_pair_density(model, k, t, y);

  if (samples == 0) {
    require(k == 1 && y.isZero(), ErrorCode::capability,
            "closed form only for k = 1 and y = 0; pass a sample count");
    const double s1 = std::sqrt(std::max(cond(0, 0), 0.0)), s2 = std::sqrt(std::max(cond(1, 1), 0.0));
    if (s1 == 0.0 || s2 == 0.0) return {0.0, 0.0};
    const double rho = std::clamp(cond(0, 1) / (s1 * s2), -1.0, 1.0);
    const double e = 2.0 / std::numbers::pi * s1 * s2 * (std::sqrt(1.0 - rho * rho) + rho * std::asin(rho));
    return {e * density, 0.0};
  }
  require(samples >= 4, ErrorCode::insufficient_sample, "kac_rice_second_moment_integrand: too few samples");
  const Eigen::MatrixXd factor = psd_factor(cond);
  Rng rng = make_stream(seed, {0x5EC0u});
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(2 * K);
  const std::size_t pairs = samples / 2;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    for (int j = 0; j < 2 * K; ++j) z(j) = normal(rng);
    const Eigen::VectorXd dz = factor * z;
    double v = 0.0;
    for (int sgn : {1, -1}) {
      const Eigen::VectorXd h = mean + sgn * dz;
      v += 0.5 * std::abs(symmetric_det(h.head(K), k) * symmetric_det(h.tail(K), k));
    }
    sum += v;
    sum2 += v * v;
  }
  const double np = static_cast<double>(pairs);
  const double m = sum / np;
  const double se = std::sqrt(std::max(0.0, sum2 / np - m * m) / (np - 1));
  return {m * density, se * density};
}

MomentEstimate second_factorial_moment_1d(const CovarianceModel& model, double T, int nodes,
                                          std::size_t samples, std::uint64_t seed) {
  require(T > 0.0 && nodes >= 2, ErrorCode::invalid_argument, "second_factorial_moment_1d: bad arguments");
  const QuadratureRule rule = gauss_legendre(nodes, 0.0, T);
  double total = 0.0, var = 0.0;
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
  for (int i = 0; i < nodes; ++i) {
    const Eigen::VectorXd t = Eigen::VectorXd::Constant(1, rule.nodes[i]);
    const MomentEstimate e = kac_rice_second_moment_integrand(model, 1, t, y, samples, derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    const double w = 2.0 * (T - rule.nodes[i]) * rule.weights[i];
    total += w * e.value;
    var += w * w * e.std_error * e.std_error;
  }
  return {total, std::sqrt(var)};
}

}  // namespace lkgrf
