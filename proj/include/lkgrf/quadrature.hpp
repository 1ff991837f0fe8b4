#pragma once

#include <cstdint>
#include <vector>

namespace lkgrf {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Hermite rule for the standard normal weight (weights sum
/// to 1), by Golub-Welsch on the probabilists' Jacobi matrix.
QuadratureRule gauss_hermite(int n);

/// n-point Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

/// Sobol sequence (Joe-Kuo direction numbers, up to 10 dimensions) with an
/// optional digital shift; point i is returned in (0, 1)^dim.
class SobolSequence {
 public:
  static constexpr int kMaxDimension = 10;

  explicit SobolSequence(int dimension, std::uint64_t shift_seed = 0);

  int dimension() const { return dimension_; }
  /// Writes point `index` (Gray-code free, direct construction) into out.
  void point(std::uint64_t index, double* out) const;

 private:
  int dimension_;
  std::vector<std::vector<std::uint32_t>> directions_;  // [dim][bit]
  std::vector<std::uint32_t> shift_;
};

}  // namespace lkgrf
