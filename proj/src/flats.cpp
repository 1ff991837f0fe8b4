#include "lkgrf/flats.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "lkgrf/error.hpp"

namespace lkgrf {

double omega(int n) {
  require(n >= 1, ErrorCode::domain, "omega: n must be >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

double kappa(int n) {
  require(n >= 1, ErrorCode::domain, "kappa: n must be >= 1");
  return omega(n) / n;
}

double flag_coefficient(int d, int k) {
  require(d >= 1 && k >= 0 && k <= d, ErrorCode::domain, "flag_coefficient: need 0 <= k <= d");
  if (k == 0 || k == d) return 1.0;
  const double binom = std::exp(std::lgamma(d + 1.0) - std::lgamma(k + 1.0) - std::lgamma(d - k + 1.0));
  return binom * kappa(d) / (kappa(k) * kappa(d - k));
}

FlatMeasureWeights flat_measure_weights(int d, int k) {
  return {d, k, flag_coefficient(d, k)};
}

Eigen::VectorXd Flat::rho(const Eigen::VectorXd& s) const { return basis * s + foot; }

Eigen::VectorXd Flat::sigma_map(const Eigen::VectorXd& s) const { return basis * s; }

namespace {

Eigen::MatrixXd haar_orthogonal(int d, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

Flat sample_linear_flat(int d, int k, Rng& rng) {
  require(d >= 1 && k >= 1 && k <= d, ErrorCode::invalid_dimension,
          "sample_linear_flat: need 1 <= k <= d");
  Eigen::MatrixXd q = haar_orthogonal(d, rng);
  Flat flat;
  flat.basis = q.leftCols(k);
  flat.complement = q.rightCols(d - k);
  flat.foot = Eigen::VectorXd::Zero(d);
  return flat;
}

WeightedFlat sample_affine_flat_hitting(int d, int k, double N, Rng& rng) {
  require(N > 0.0, ErrorCode::invalid_argument, "sample_affine_flat_hitting: N must be > 0");
  WeightedFlat out;
  out.flat = sample_linear_flat(d, k, rng);
  const double nu_total = flag_coefficient(d, k);
  const int codim = d - k;
  if (codim == 0) {
    out.weight = nu_total;
    return out;
  }
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::VectorXd dir(codim);
  do {
    for (int i = 0; i < codim; ++i) dir(i) = normal(rng);
  } while (dir.norm() == 0.0);
  dir.normalize();
  const double radius = N * std::pow(uniform(rng), 1.0 / codim);
  out.flat.foot = out.flat.complement * (radius * dir);
  out.weight = nu_total * kappa(codim) * std::pow(N, codim);
  return out;
}

}  // namespace lkgrf
