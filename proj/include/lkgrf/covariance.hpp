#pragma once

#include <array>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lkgrf {

/// Radial family of an isotropic correlation function. A profile can be
/// given either through phi(s) with Cov(t) = phi(|t|^2 / 2) (closed-form
/// models), or through tabulated radial derivatives R^(k)(r).
struct RadialFamily {
  std::string name;
  /// R^(k)(r) for k = 0..4.
  std::function<double(double r, int order)> radial;
  /// phi^(k)(s) for k = 0..4, where s = r^2 / 2.
  std::function<double(double s, int order)> profile;
  /// Spectral density at frequency radius rho in dimension d; empty when the
  /// family has no closed form (a numerical Hankel transform is used instead).
  std::function<double(double rho, int d)> spectral;
  /// Samples a frequency vector from the normalized spectral measure in
  /// dimension d; empty when unavailable.
  std::function<Eigen::VectorXd(int d, std::mt19937_64& rng)> spectral_sampler;
  /// Highest radial derivative order the family provides.
  int max_order = 4;
};

/// Stationary isotropic covariance on R^d built from a radial family.
class CovarianceModel {
 public:
  CovarianceModel(int dimension, std::shared_ptr<const RadialFamily> family);

  int dimension() const { return dimension_; }
  const std::string& name() const { return family_->name; }
  int max_order() const { return family_->max_order; }

  /// R^(k)(r), k <= 4.
  double radial(double r, int order = 0) const;
  /// phi^(k)(s), k <= 4, Cov(t) = phi(|t|^2 / 2).
  double profile(double s, int order) const;
  /// Spectral density f at frequency radius rho (density per unit d-volume).
  double spectral_density(double rho) const;
  bool has_spectral_sampler() const { return static_cast<bool>(family_->spectral_sampler); }
  Eigen::VectorXd sample_frequency(std::mt19937_64& rng) const;

  double cov(const Eigen::VectorXd& t) const;
  /// Mixed directional derivative d/du_1 ... d/du_k Cov(t), k <= 4.
  double directional_derivative(const Eigen::VectorXd& t,
                                std::span<const Eigen::VectorXd> directions) const;

  /// Same radial family viewed as a covariance on R^k.
  CovarianceModel with_dimension(int k) const;

  const std::shared_ptr<const RadialFamily>& family() const { return family_; }

 private:
  int dimension_;
  std::shared_ptr<const RadialFamily> family_;
};

/// Cov(t) = exp(-|t|^2 / 2), f(lambda) = (2 pi)^(-d/2) exp(-|lambda|^2 / 2).
CovarianceModel make_gaussian_cov(int d);

/// Generalized Cauchy family phi(s) = (1 + s / beta)^(-beta). Satisfies the
/// normalizations for every beta > 0; tails decay like r^(-2 beta), so small
/// beta gives a non-integrable psi.
CovarianceModel make_cauchy_cov(int d, double beta);

/// Cov(t) = variance * base(|t| / length_scale). Only used to build models
/// that violate the normalizations on purpose.
CovarianceModel make_scaled_cov(const CovarianceModel& base, double variance, double length_scale);

/// Radial table with columns r,R,R1,R2,R3,R4 (first row r = 0, increasing r).
/// Column k is interpolated by a cubic Hermite spline whose node slopes are
/// column k+1 (column 4 linearly); beyond the last row all columns are 0.
CovarianceModel make_table_cov(int d, const std::string& name, std::vector<double> r,
                               std::vector<std::array<double, 5>> derivatives);
CovarianceModel load_table_cov(int d, const std::string& csv_path);

/// Looks up a registered model: "gaussian", "cauchy" (param = beta), "table"
/// (path = CSV file).
CovarianceModel make_model(const std::string& name, int d, double param = 1.0,
                           const std::string& path = {});

/// Spectral density by numerical Hankel transform of the radial function.
double spectral_density_numeric(const CovarianceModel& model, double rho);

// ---------------------------------------------------------------------------
// Jets: the vector (grad_v X, (d^2 X / dv_i dv_j)_{i<=j}, X) along a flat.

enum class JetComponentKind { gradient, hessian, value };

struct JetComponent {
  JetComponentKind kind;
  int i = 0;
  int j = 0;
};

/// Component layout (k gradient entries, k(k+1)/2 Hessian entries in
/// lexicographic i<=j order, then X).
std::vector<JetComponent> jet_layout(int k);

/// E[J^F(t) J^{F'}(0)^T] where J^F is the jet along the orthonormal columns of
/// `basis_t` evaluated at t and J^{F'} the jet along `basis_0` at the origin.
Eigen::MatrixXd jet_cross_covariance(const CovarianceModel& model, const Eigen::VectorXd& t,
                                     const Eigen::MatrixXd& basis_t, const Eigen::MatrixXd& basis_0);

// ---------------------------------------------------------------------------

/// Covariance matrix of the jet at a single point and its Cholesky factor.
struct SigmaMatrix {
  int d = 0;
  int m = 0;
  int k = 0;   // d - m
  int K = 0;   // k (k + 1) / 2
  int D = 0;   // k + K + 1
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd lambda_inv;

  /// Bottom-right (K+1)x(K+1) block of lambda.
  Eigen::MatrixXd lambda2() const { return lambda.bottomRightCorner(K + 1, K + 1); }
  /// Lambda_2 = [[L, 0], [l^T, alpha]].
  Eigen::MatrixXd L() const { return lambda.block(k, k, K, K); }
  Eigen::VectorXd l() const { return lambda.block(k + K, k, 1, K).transpose(); }
  double alpha() const { return lambda(D - 1, D - 1); }
};

SigmaMatrix build_sigma(const CovarianceModel& model, int m);

/// Fourth derivative of Cov along an axis at 0, E[(d^2 X / dt_1^2)^2].
double mu4(const CovarianceModel& model);

struct LagEigenvalue {
  double lag = 0.0;
  double min_eigenvalue = 0.0;
};

struct AssumptionReport {
  int d = 0;
  int m = 0;
  double normalization_error = 0.0;  // |R(0) - 1|
  double curvature_error = 0.0;      // |R''(0) + 1|
  bool normalization_ok = false;
  double psi_integral = 0.0;         // integral of psi over the truncation ball
  double psi_tail_estimate = 0.0;    // extrapolated integral outside the ball
  double psi_tail_slope = 0.0;       // -d log psi / d log r at the truncation radius
  double psi_at_radius = 0.0;
  bool integrable = false;
  std::vector<LagEigenvalue> lag_eigenvalues;
  bool nondegenerate = false;
  double mu4 = 0.0;
  double sigma_min_eigenvalue = 0.0;

  bool passed() const { return normalization_ok && integrable && nondegenerate; }
};

/// Numeric checks of the model normalizations, psi integrability (truncation
/// radius 10 plus power-law tail extrapolation) and the lag nondegeneracy.
AssumptionReport check_assumptions(const CovarianceModel& model, int m);

/// psi(r): the largest mixed partial derivative (orders 0..4) of Cov at
/// distance r, maximized over two reference directions.
double psi(const CovarianceModel& model, double r);

}  // namespace lkgrf
