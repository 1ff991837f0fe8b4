#include "lkgrf/quadrature.hpp"

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "lkgrf/error.hpp"
#include "lkgrf/rng.hpp"

namespace lkgrf {

QuadratureRule gauss_hermite(int n) {
  require(n >= 1, ErrorCode::invalid_argument, "gauss_hermite: n must be >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = eig.eigenvalues()(i);
    const double v = eig.eigenvectors()(0, i);
    rule.weights[i] = v * v;
  }
  return rule;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  require(n >= 1, ErrorCode::invalid_argument, "gauss_legendre: n must be >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double di = i;
    jacobi(i, i - 1) = jacobi(i - 1, i) = di / std::sqrt(4.0 * di * di - 1.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * eig.eigenvalues()(i);
    const double v = eig.eigenvectors()(0, i);
    rule.weights[i] = 2.0 * v * v * half;
  }
  return rule;
}

namespace {

struct JoeKuo {
  int degree;
  std::uint32_t a;
  std::array<std::uint32_t, 5> m;
};

// new-joe-kuo-6.21201, dimensions 2..10.
constexpr std::array<JoeKuo, 9> kJoeKuo{{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
}};

constexpr int kBits = 32;

}  // namespace

SobolSequence::SobolSequence(int dimension, std::uint64_t shift_seed) : dimension_(dimension) {
  require(dimension >= 1 && dimension <= kMaxDimension, ErrorCode::capability,
          "SobolSequence: dimension must be in [1, 10]");
  directions_.assign(dimension, std::vector<std::uint32_t>(kBits));
  for (int b = 0; b < kBits; ++b) directions_[0][b] = 1u << (kBits - 1 - b);
  for (int j = 1; j < dimension; ++j) {
    const JoeKuo& jk = kJoeKuo[j - 1];
    const int s = jk.degree;
    auto& v = directions_[j];
    for (int b = 0; b < std::min(s, kBits); ++b) v[b] = jk.m[b] << (kBits - 1 - b);
    for (int b = s; b < kBits; ++b) {
      std::uint32_t value = v[b - s] ^ (v[b - s] >> s);
      for (int q = 1; q < s; ++q)
        if ((jk.a >> (s - 1 - q)) & 1u) value ^= v[b - q];
      v[b] = value;
    }
  }
  shift_.assign(dimension, 0);
  if (shift_seed != 0) {
    Rng rng = make_stream(shift_seed, {0x50B0u});
    for (auto& s : shift_) s = static_cast<std::uint32_t>(rng() >> 32);
  }
}

void SobolSequence::point(std::uint64_t index, double* out) const {
  // Gray-code index makes consecutive points differ in one direction number;
  // direct evaluation keeps points independent of iteration order.
  const std::uint64_t gray = index ^ (index >> 1);
  for (int j = 0; j < dimension_; ++j) {
    std::uint32_t x = 0;
    for (int b = 0; b < kBits && (gray >> b) != 0; ++b)
      if ((gray >> b) & 1u) x ^= directions_[j][b];
    x ^= shift_[j];
    out[j] = (static_cast<double>(x) + 0.5) / 4294967296.0;
  }
}

}  // namespace lkgrf
