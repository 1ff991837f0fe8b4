#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "lkgrf/covariance.hpp"

namespace lkgrf {

/// det(c1 I + c2 v v^T) = c1^dim + c1^{dim-1} c2 |v|^2.
double det_rank_one(double c1, double c2, const Eigen::VectorXd& v, int dim);

struct FlatCovJet {
  int k = 0;
  double r = 0.0;
  Eigen::MatrixXd d2cov;             // D^2 Cov at lag t on R^k
  double det_identity_value = 0.0;   // det(I - d2cov^2), computed densely
  bool limit = false;                // r below 1e-8: d2cov = -I, value 0
};

/// R'(r)/r I + (R''(r)/r^2 - R'(r)/r^3) t t^T.
FlatCovJet d2cov_on_flat(const CovarianceModel& model, int k, const Eigen::VectorXd& t);

/// (1 - (R'(r)/r)^2)^{k-1} (1 - R''(r)^2), the determinant of the covariance
/// of (grad X(t), grad X(0)) on a k-flat.
double gradient_pair_det_identity(const CovarianceModel& model, int k, double r);

struct TaylorReport {
  double mu = 0.0;
  std::vector<double> radii;
  std::vector<double> first_remainder;   // |R'(r) + r - mu r^3 / 6|
  std::vector<double> second_remainder;  // |R''(r) + 1 - mu r^2 / 2|
  double first_slope = 0.0;
  double second_slope = 0.0;
  bool passed = false;  // slopes >= 3.9 and >= 2.9
};

/// Log-log slopes of the Taylor remainders on r in [1e-3, 1e-1]; mu defaults
/// to mu4(model).
TaylorReport taylor_remainder_check(const CovarianceModel& model,
                                    double mu = std::numeric_limits<double>::quiet_NaN());

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// E|det D^2 X(0)| on a k-flat: sqrt(2 mu / pi) for k = 1, antithetic Monte
/// Carlo over the Hessian law otherwise.
MomentEstimate expected_abs_det_hessian(const CovarianceModel& model, int k, std::size_t samples = 1000000,
                                        std::uint64_t seed = 1);

/// E|det D^2 X(0)| p_{grad X(0)}(y) |W cap F|.
MomentEstimate kac_rice_first_moment(const CovarianceModel& model, int k, double window_measure,
                                     const Eigen::VectorXd& y, std::size_t samples = 1000000,
                                     std::uint64_t seed = 1);

/// Joint density of (grad X(t), grad X(0)) at (y, y) on a k-flat.
double gradient_pair_density(const CovarianceModel& model, int k, const Eigen::VectorXd& t,
                             const Eigen::VectorXd& y);

/// E[|det D^2 X(t) det D^2 X(0)| | grad X(t) = grad X(0) = y] p(y, y) for
/// k in {1, 2}, by Gaussian regression and Monte Carlo over the conditional
/// Hessian law. samples = 0 with k = 1 and y = 0 uses the closed form
/// E|UV| = (2/pi) s1 s2 (sqrt(1 - rho^2) + rho asin rho).
MomentEstimate kac_rice_second_moment_integrand(const CovarianceModel& model, int k, const Eigen::VectorXd& t,
                                                const Eigen::VectorXd& y, std::size_t samples = 100000,
                                                std::uint64_t seed = 1);

/// E[N(N-1)] for the zero count N of X' on an interval of length T:
/// 2 int_0^T (T - tau) I(tau) d tau by Gauss-Legendre.
MomentEstimate second_factorial_moment_1d(const CovarianceModel& model, double T, int nodes = 200,
                                          std::size_t samples = 0, std::uint64_t seed = 1);

}  // namespace lkgrf
