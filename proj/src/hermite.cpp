#include "lkgrf/hermite.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "lkgrf/error.hpp"

namespace lkgrf {

double hermite(int k, double x) {
  require(k >= 0, ErrorCode::domain, "hermite: order must be >= 0");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = x * cur - j * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

void hermite_all(int kmax, double x, double* out) {
  out[0] = 1.0;
  if (kmax >= 1) out[1] = x;
  for (int j = 1; j < kmax; ++j) out[j + 1] = x * out[j] - j * out[j - 1];
}

double hermite_multi(std::span<const int> n, const Eigen::VectorXd& x) {
  require(static_cast<Eigen::Index>(n.size()) == x.size(), ErrorCode::invalid_argument,
          "hermite_multi: index and point lengths differ");
  double value = 1.0;
  for (std::size_t i = 0; i < n.size(); ++i) value *= hermite(n[i], x(static_cast<Eigen::Index>(i)));
  return value;
}

double hermite_at_zero(int k) {
  require(k >= 0, ErrorCode::domain, "hermite_at_zero: order must be >= 0");
  if (k % 2 == 1) return 0.0;
  double value = 1.0;
  for (int j = k - 1; j > 1; j -= 2) value *= j;
  return (k / 2) % 2 == 0 ? value : -value;
}

double factorial(int k) {
  require(k >= 0, ErrorCode::domain, "factorial: argument must be >= 0");
  return std::tgamma(k + 1.0);
}

double multi_factorial(std::span<const int> n) {
  double value = 1.0;
  for (int ni : n) value *= factorial(ni);
  return value;
}

int total_order(std::span<const int> n) {
  int q = 0;
  for (int ni : n) q += ni;
  return q;
}

namespace {

void enumerate(int pos, int remaining, MultiIndex& current, std::vector<MultiIndex>& out) {
  const int D = static_cast<int>(current.size());
  if (pos == D - 1) {
    current[pos] = remaining;
    out.push_back(current);
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    current[pos] = v;
    enumerate(pos + 1, remaining - v, current, out);
  }
}

}  // namespace

std::vector<MultiIndex> multi_indices(int D, int q) {
  require(D >= 1 && q >= 0, ErrorCode::invalid_argument, "multi_indices: need D >= 1, q >= 0");
  std::vector<MultiIndex> out;
  MultiIndex current(D, 0);
  enumerate(0, q, current, out);
  return out;
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::domain, "normal_quantile: p must be in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace lkgrf
