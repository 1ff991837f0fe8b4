#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lkgrf {

using MultiIndex = std::vector<int>;

/// Probabilists' Hermite polynomial H_k(x) by the three-term recurrence
/// H_{k+1} = x H_k - k H_{k-1}. Overflows for k beyond ~300.
double hermite(int k, double x);

/// Writes H_0(x), ..., H_kmax(x) into out (size kmax + 1).
void hermite_all(int kmax, double x, double* out);

/// Tensor product prod_i H_{n_i}(x_i).
double hermite_multi(std::span<const int> n, const Eigen::VectorXd& x);

/// H_k(0): 0 for odd k, (-1)^{k/2} (k-1)!! for even k.
double hermite_at_zero(int k);

double factorial(int k);
/// prod_i n_i!.
double multi_factorial(std::span<const int> n);
int total_order(std::span<const int> n);

/// All n in N^D with |n| = q, in lexicographic order (descending first entry).
std::vector<MultiIndex> multi_indices(int D, int q);

/// Upper tail of the standard normal and its density.
double normal_pdf(double x);
double normal_sf(double x);
double normal_quantile(double p);

}  // namespace lkgrf
