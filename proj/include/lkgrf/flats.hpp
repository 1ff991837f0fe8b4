#pragma once

#include <Eigen/Dense>

#include "lkgrf/rng.hpp"

namespace lkgrf {

/// Surface area of the unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2).
double omega(int n);
/// Volume of the unit ball B^n: omega(n) / n.
double kappa(int n);
/// Flag coefficient binom(d,k) kappa_d / (kappa_k kappa_{d-k}); equals 1 for
/// k = 0 and k = d. This is the total mass of the rotation-invariant measure
/// on G(d,k) that makes the Crofton integral of chi over A(d,k) equal LK_{d-k}.
double flag_coefficient(int d, int k);

struct FlatMeasureWeights {
  int d = 0;
  int k = 0;
  double nu_total = 0.0;
};

FlatMeasureWeights flat_measure_weights(int d, int k);

/// k-dimensional affine flat {foot + basis * s : s in R^k}.
struct Flat {
  Eigen::MatrixXd basis;      // d x k, orthonormal columns
  Eigen::VectorXd foot;       // closest point to the origin, orthogonal to basis
  Eigen::MatrixXd complement; // d x (d-k), orthonormal basis of the orthogonal complement

  int d() const { return static_cast<int>(basis.rows()); }
  int k() const { return static_cast<int>(basis.cols()); }

  /// Affine parametrization s -> sum s_i v_i + foot.
  Eigen::VectorXd rho(const Eigen::VectorXd& s) const;
  /// Linear part of rho (the foot is omitted).
  Eigen::VectorXd sigma_map(const Eigen::VectorXd& s) const;
};

/// Haar-distributed linear flat: first k columns of the sign-fixed QR factor
/// of a standard Gaussian d x d matrix.
Flat sample_linear_flat(int d, int k, Rng& rng);

struct WeightedFlat {
  Flat flat;
  double weight = 0.0;
};

/// Direction from `sample_linear_flat`, foot uniform in the (d-k)-ball of
/// radius N inside the orthogonal complement. Weighted averages of the
/// returned flats estimate integrals over the flats hitting B_N.
WeightedFlat sample_affine_flat_hitting(int d, int k, double N, Rng& rng);

}  // namespace lkgrf
