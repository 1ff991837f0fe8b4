#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace lkgrf {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;  // g1 = m3 / m2^{3/2}
  double excess_kurtosis = 0.0;  // m4 / m2^2 - 3
};
Moments sample_moments(std::span<const double> x);

struct QQPoint {
  double theoretical = 0.0;
  double empirical = 0.0;
};

struct NormalityDiagnostics {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double ks_statistic = 0.0;  // sup |F_n - Phi((x - mean) / sd)|
  double ks_p = 0.0;          // Lilliefors p (Dallal-Wilkinson approximation)
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::vector<QQPoint> qq;    // normal quantiles vs sorted standardized values
};

/// Throws insufficient_sample for n < 50 and degenerate_distribution for a
/// constant sample.
NormalityDiagnostics normality_diagnostics(std::span<const double> values);

/// Lilliefors p-value for a KS statistic against a fitted normal.
double lilliefors_p(double ks_statistic, std::size_t n);

/// (x - mean) / sd with the unbiased sd.
std::vector<double> standardize(std::span<const double> x);

struct BootstrapResult {
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;  // 2.5% percentile
  double upper = 0.0;  // 97.5% percentile
};

/// Nonparametric bootstrap of a statistic, resamples drawn from the given seed.
BootstrapResult bootstrap(std::span<const double> x, const std::function<double(std::span<const double>)>& stat,
                          int resamples, std::uint64_t seed);

double sample_variance(std::span<const double> x);

}  // namespace lkgrf
