#include "lkgrf/stats.hpp"

#include <algorithm>
#include <cmath>

#include "lkgrf/error.hpp"
#include "lkgrf/hermite.hpp"
#include "lkgrf/rng.hpp"

namespace lkgrf {

Moments sample_moments(std::span<const double> x) {
  require(x.size() >= 2, ErrorCode::insufficient_sample, "sample_moments: need at least 2 values");
  const double n = static_cast<double>(x.size());
  Moments mo;
  for (double v : x) mo.mean += v;
  mo.mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double c = v - mo.mean;
    m2 += c * c;
    m3 += c * c * c;
    m4 += c * c * c * c;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  mo.variance = m2 * n / (n - 1);
  if (m2 > 0) {
    mo.skewness = m3 / std::pow(m2, 1.5);
    mo.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return mo;
}

double sample_variance(std::span<const double> x) { return sample_moments(x).variance; }

double lilliefors_p(double ks, std::size_t n_size) {
  const double n = static_cast<double>(n_size);
  double kd = ks, nd = n;
  if (n > 100) {
    kd = ks * std::pow(n / 100.0, 0.49);
    nd = 100.0;
  }
  double p = std::exp(-7.01256 * kd * kd * (nd + 2.78019) + 2.99587 * kd * std::sqrt(nd + 2.78019) - 0.122119 +
                      0.974598 / std::sqrt(nd) + 1.67997 / nd);
  if (p > 0.1) {
    const double kk = (std::sqrt(n) - 0.01 + 0.85 / std::sqrt(n)) * ks;
    if (kk <= 0.302)
      p = 1.0;
    else if (kk <= 0.5)
      p = 2.76773 - 19.828315 * kk + 80.709644 * kk * kk - 138.55152 * kk * kk * kk + 81.218052 * std::pow(kk, 4);
    else if (kk <= 0.9)
      p = -4.901232 + 40.662806 * kk - 97.490286 * kk * kk + 94.029866 * kk * kk * kk - 32.355711 * std::pow(kk, 4);
    else if (kk <= 1.31)
      p = 6.198765 - 19.558097 * kk + 23.186922 * kk * kk - 12.024094 * kk * kk * kk + 2.355628 * std::pow(kk, 4);
    else
      p = 0.0;
  }
  return std::clamp(p, 0.0, 1.0);
}

std::vector<double> standardize(std::span<const double> x) {
  const Moments mo = sample_moments(x);
  require(mo.variance > 0.0, ErrorCode::degenerate_distribution, "standardize: zero variance");
  const double sd = std::sqrt(mo.variance);
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mo.mean) / sd;
  return z;
}

NormalityDiagnostics normality_diagnostics(std::span<const double> values) {
  require(values.size() >= 50, ErrorCode::insufficient_sample,
          "normality diagnostics need at least 50 values, got " + std::to_string(values.size()));
  for (double v : values) require(std::isfinite(v), ErrorCode::invalid_argument, "normality diagnostics: non-finite value");
  const Moments mo = sample_moments(values);
  require(mo.variance > 0.0, ErrorCode::degenerate_distribution, "normality diagnostics: constant sample");
  NormalityDiagnostics out;
  out.n = values.size();
  out.mean = mo.mean;
  out.variance = mo.variance;
  out.skewness = mo.skewness;
  out.excess_kurtosis = mo.excess_kurtosis;
  std::vector<double> z = standardize(values);
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = 1.0 - normal_sf(z[i]);
    dmax = std::max({dmax, (i + 1) / n - f, f - i / n});
    out.qq.push_back({normal_quantile((i + 0.5) / n), z[i]});
  }
  out.ks_statistic = dmax;
  out.ks_p = lilliefors_p(dmax, z.size());
  return out;
}

BootstrapResult bootstrap(std::span<const double> x, const std::function<double(std::span<const double>)>& stat,
                          int resamples, std::uint64_t seed) {
  require(!x.empty() && resamples >= 2, ErrorCode::insufficient_sample, "bootstrap: empty sample or too few resamples");
  Rng rng = make_stream(seed, {0xB007u});
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> buf(x.size()), stats(resamples);
  for (int b = 0; b < resamples; ++b) {
    for (auto& v : buf) v = x[pick(rng)];
    stats[b] = stat(buf);
  }
  BootstrapResult r;
  r.estimate = stat(x);
  double mean = 0.0;
  for (double s : stats) mean += s;
  mean /= resamples;
  double var = 0.0;
  for (double s : stats) var += (s - mean) * (s - mean);
  r.std_error = std::sqrt(var / (resamples - 1));
  std::sort(stats.begin(), stats.end());
  auto quant = [&](double p) {
    const double pos = p * (resamples - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min<std::size_t>(lo + 1, stats.size() - 1);
    return stats[lo] + (pos - lo) * (stats[hi] - stats[lo]);
  };
  r.lower = quant(0.025);
  r.upper = quant(0.975);
  return r;
}

}  // namespace lkgrf
