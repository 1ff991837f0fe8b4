#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lkgrf/covariance.hpp"
#include "lkgrf/fieldsim.hpp"
#include "lkgrf/stats.hpp"
#include "lkgrf/variance.hpp"

namespace lkgrf {

enum class Estimator { direct, crofton, dirac };
Estimator parse_estimator(const std::string& name);
const char* to_string(Estimator e);

struct ExperimentConfig {
  std::string model = "gaussian";
  double model_param = 1.0;
  std::string model_path;
  int d = 1;
  std::vector<int> m{0};
  std::vector<double> u{1.0};
  std::vector<double> N{10.0, 20.0, 40.0};
  double h = 0.05;
  int replicates = 500;
  std::size_t n_flats = 200;
  std::vector<double> epsilon{0.1};
  std::uint64_t seed = 1;
  Estimator estimator = Estimator::direct;
  unsigned threads = 0;
  int bootstrap_resamples = 1000;
  double bound_tolerance = 0.1;
  double normality_alpha = 0.01;
  double max_suspect_fraction = 0.01;
};

/// Checks R >= 50, h <= min(N) / 20, nonempty lists and ranges of m.
void validate(const ExperimentConfig& config);

/// Replaces the field simulator (test doubles such as constant fields).
using FieldSource = std::function<FieldSample(const Grid& grid, std::uint64_t seed)>;

struct CellKey {
  int m = 0;
  double u = 0.0;
  auto operator<=>(const CellKey&) const = default;
};

struct RadiusResult {
  double N = 0.0;
  double window_volume = 0.0;  // H^d(B_N)
  std::vector<double> values;  // one LK value per replicate
  std::vector<std::uint8_t> suspect;
  double mean = 0.0;
  double variance = 0.0;
  double normalized_variance = 0.0;  // variance / H^d(B_N)
  BootstrapResult normalized_variance_bootstrap;
  bool degenerate = false;
  std::optional<NormalityDiagnostics> diagnostics;
  std::vector<double> standardized;
  int suspect_count = 0;
};

struct Verdict {
  std::string name;
  bool applicable = true;
  bool passed = true;
  std::string detail;
};

struct CellResult {
  CellKey key;
  std::vector<RadiusResult> radii;  // same order as config.N
  double lower_bound = 0.0;
  std::vector<double> variance_ratios;  // consecutive normalized-variance ratios
  double log_slope = 0.0;               // slope of log normalized variance vs log N
  std::vector<Verdict> verdicts;
  bool passed() const;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<CellResult> cells;
  std::string simulation_method;
  bool passed() const;
};

/// LK_m of the excursion above u inside B_N for one sample.
struct LKValue {
  double value = 0.0;
  bool suspect = false;
};
LKValue estimate_lk(const FieldSample& sample, int m, double u, double N, Estimator estimator,
                    std::size_t n_flats, double epsilon, std::uint64_t seed);

/// Replicated LK estimates for all (m, u, N) with diagnostics and verdicts.
/// Each (radius, replicate) field is simulated once and shared across cells.
ExperimentResult run_clt(const ExperimentConfig& config, const FieldSource& source = {});

/// Per-N normalized variances, ratios and log-log slope (needs >= 3 radii).
struct ScalingRow {
  double N = 0.0;
  double normalized_variance = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};
struct ScalingTable {
  CellKey key;
  std::vector<ScalingRow> rows;
  std::vector<double> ratios;
  double log_slope = 0.0;
  bool stable = false;  // every consecutive ratio in [0.75, 1.25]
};
std::vector<ScalingTable> variance_scaling(const ExperimentResult& result);

/// Pass iff normalized variance >= bound (1 - tolerance) - 2 bootstrap SE at the largest N.
Verdict bound_check(const CellResult& cell, double tolerance = 0.1);

/// Files written: lk_m{m}_u{u}.csv, qq_m{m}_u{u}.csv and summary.json.
/// Returns the written paths relative to out_dir.
std::vector<std::string> write_experiment(const ExperimentResult& result, const std::string& out_dir,
                                          const std::optional<VarianceBreakdown>& breakdown = std::nullopt);

std::string summary_json(const ExperimentResult& result,
                         const std::optional<VarianceBreakdown>& breakdown = std::nullopt);

std::string format_level(double u);

}  // namespace lkgrf
