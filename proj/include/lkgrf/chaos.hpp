#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lkgrf/covariance.hpp"
#include "lkgrf/hermite.hpp"

namespace lkgrf {

struct CoefficientResult {
  double value = 0.0;
  double std_error = 0.0;
  std::string method;             // "zero", "gauss-hermite", "qmc" (cache hits keep the stored method)
  bool precision_warning = false; // error estimate above 10% of |value| + 1e-6
};

struct CoefficientOptions {
  int gh_nodes = 40;                         // per axis; the estimate uses 2x nodes
  std::uint64_t qmc_points = 1u << 20;       // total over all shifts
  int qmc_shifts = 8;
  std::uint64_t seed = 0x5EEDC0EFULL;
  bool force_qmc = false;
  unsigned threads = 0;
};

/// c(n) for the jet of (d, m) at level u. The last Gaussian coordinate is
/// integrated in closed form (the indicator only involves it through
/// (Lambda_2 y)_{K+1} = <l, y'> + alpha y_{K+1}); the remaining K-dimensional
/// integrand is smooth and handled by tensor Gauss-Hermite (K <= 3) or
/// randomized Sobol QMC. Indices with an odd entry in the gradient block are
/// exact zeros.
CoefficientResult coefficient_c(const MultiIndex& n, const SigmaMatrix& sigma, double u,
                                const CoefficientOptions& options = {});

/// Batch version; indices share quadrature nodes.
std::vector<CoefficientResult> coefficients_c(const std::vector<MultiIndex>& indices,
                                              const SigmaMatrix& sigma, double u,
                                              const CoefficientOptions& options = {});

/// Closed form (2 pi)^{-(d-m)/2} alpha H_{d-m}(u) phi(u) of c(e_D).
double coefficient_c_last_closed_form(const SigmaMatrix& sigma, double u);

/// Persistent coefficient store, CSV columns d,m,u,model,n,value,std_error,method.
class CoefficientCache {
 public:
  CoefficientCache() = default;
  explicit CoefficientCache(std::string path);

  std::optional<CoefficientResult> lookup(const std::string& model, int d, int m, double u,
                                          const MultiIndex& n) const;
  void insert(const std::string& model, int d, int m, double u, const MultiIndex& n,
              const CoefficientResult& value);
  void save() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::map<std::string, CoefficientResult> entries_;
};

std::string format_multi_index(const MultiIndex& n);

struct ChaosTable {
  int d = 0;
  int m = 0;
  double u = 0.0;
  std::string model;
  SigmaMatrix sigma;
  int max_order = 0;
  std::map<MultiIndex, CoefficientResult> coefficients;

  int D() const { return sigma.D; }
  const CoefficientResult& at(const MultiIndex& n) const;
};

ChaosTable build_chaos_table(const CovarianceModel& model, int m, double u, int max_order,
                             const CoefficientOptions& options = {}, CoefficientCache* cache = nullptr);

/// b(k) on {0..D-1}^q stored densely with k_1 as the most significant digit.
struct BTensor {
  int D = 0;
  int q = 0;
  std::vector<double> values;

  double at(std::span<const int> k) const;
};

BTensor coefficients_b(int q, const ChaosTable& table);

/// E[H~_n(V) H~_n'(W)] for standard Gaussian vectors with r_ij = E[V_i W_j]:
/// sum over nonnegative integer matrices with row sums n and column sums n'.
double mehler_expectation(const MultiIndex& n, const MultiIndex& n_prime, const Eigen::MatrixXd& r);

/// E[Z_1 ... Z_p] by Wick's formula (sum over perfect pairings).
double wick_moment(const Eigen::MatrixXd& cov);

/// max(max row absolute sum, max column absolute sum).
double arcones_tau(const Eigen::MatrixXd& r);

struct ArconesCheck {
  double tau = 0.0;
  double covariance = 0.0;    // MC estimate of E[(h(V)-Eh)(h(W)-Eh)]
  double covariance_se = 0.0;
  double bound = 0.0;         // tau^rank E[h(V)^2]
  bool holds = false;         // |cov| <= bound + 3 SE
};

ArconesCheck arcones_bound_check(const std::function<double(const Eigen::VectorXd&)>& h,
                                 const Eigen::MatrixXd& r, int rank, std::size_t samples,
                                 std::mt19937_64& rng);

/// sum_{|n|=q} c(n)^2 n!.
double chaos_variance_per_order(const ChaosTable& table, int q);

/// Smallest q >= 1 (the centred functional) with a coefficient whose magnitude exceeds max(tol, 3 SE); -1 if none.
int hermite_rank(const ChaosTable& table, double tol = 1e-12);

}  // namespace lkgrf
