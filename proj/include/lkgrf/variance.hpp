#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "lkgrf/chaos.hpp"
#include "lkgrf/covariance.hpp"

namespace lkgrf {

struct VarianceValue {
  double value = 0.0;
  double error = 0.0;
};

struct VarianceBreakdown {
  int d = 0;
  int m = 0;
  double u = 0.0;
  double lower_bound = 0.0;
  std::map<int, VarianceValue> sigma2_by_order;
  double truncated_total = 0.0;
  int Q = 0;
};

/// flag(d, d-m)^2 (2 pi)^m f0 H_{d-m}(u)^2 phi(u)^2. For m = d the same
/// expression (H_0 = 1) is the q = 1 variance of the volume.
double lower_bound(int d, int m, double u, double f0);

struct RadialGrid {
  int nodes = 256;
  double radius = 10.0;
  int angles = 64;  // d = 2: equispaced angles; d = 3: Fibonacci sphere points
};

/// Points and weights for integrals over the ball of radius grid.radius in
/// R^d (radial Gauss-Legendre times an angular rule; d = 1 uses both signs).
struct BallRule {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> weights;
};
BallRule ball_rule(int d, const RadialGrid& grid);

/// Decorrelated cross-covariance Lambda^-1 E[J^F(t) J^{F'}(0)^T] Lambda^-T.
Eigen::MatrixXd decorrelated_cross_covariance(const CovarianceModel& model, const SigmaMatrix& sigma,
                                              const Eigen::VectorXd& t, const Eigen::MatrixXd& basis_t,
                                              const Eigen::MatrixXd& basis_0);

struct Q1Report {
  double reduction = 0.0;    // flag^2 c(e_D)^2 (Lambda^-1_DD)^2 (2 pi)^d f0
  double brute_force = 0.0;  // flag^2 sum_{k,l} c(e_k) c(e_l) int r_kl(t) dt
  double error = 0.0;        // radial refinement difference of the brute-force value
  double max_off_diagonal = 0.0;  // max |int E[J_k(t) J_l(0)] dt| over (k,l) != (D,D)
  double diagonal_integral = 0.0; // int E[X(t) X(0)] dt, compare with (2 pi)^d f0
};

/// sigma^2_{m,1} through the exact reduction, cross-checked by radial
/// quadrature of the decorrelated cross-covariance. Throws
/// internal_consistency when the two differ by more than 3 error + 1e-8.
Q1Report sigma2_q1_integral(const CovarianceModel& model, const ChaosTable& table,
                            const RadialGrid& grid = {});

struct TruncatedOptions {
  RadialGrid grid;
  int flat_samples = 1000;
  std::uint64_t seed = 0xF1A7;
  unsigned threads = 0;
};

/// q! sum b(k) b(l) int prod r_{k_i l_i}(t) dt averaged over direction pairs
/// (F fixed, F' Haar; common random numbers across q), times flag^2. The
/// error combines the flat-sampling standard error with the radial
/// refinement difference.
VarianceValue sigma2_q_truncated(const CovarianceModel& model, const ChaosTable& table, int q,
                                 const TruncatedOptions& options = {});

/// Integrand q! B (r^{(x) q}) B of the order-q term for one lag and flat pair.
double order_q_integrand(const BTensor& b, const Eigen::MatrixXd& r);

/// Lower bound, q = 1 reduction and orders 2..Q.
VarianceBreakdown variance_breakdown(const CovarianceModel& model, const ChaosTable& table, int Q,
                                     const TruncatedOptions& options = {});

std::string to_json(const VarianceBreakdown& v);

}  // namespace lkgrf
