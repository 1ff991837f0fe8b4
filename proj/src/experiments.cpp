#include "lkgrf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lkgrf/error.hpp"
#include "lkgrf/flats.hpp"
#include "lkgrf/lkc.hpp"
#include "lkgrf/parallel.hpp"
#include "lkgrf/rng.hpp"

namespace lkgrf {

Estimator parse_estimator(const std::string& name) {
  if (name == "direct") return Estimator::direct;
  if (name == "crofton" || name == "crofton_morse") return Estimator::crofton;
  if (name == "dirac" || name == "dirac_eps") return Estimator::dirac;
  throw Error(ErrorCode::invalid_argument, "unknown estimator '" + name + "' (direct, crofton, dirac)");
}

const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::direct: return "direct";
    case Estimator::crofton: return "crofton";
    case Estimator::dirac: return "dirac";
  }
  return "?";
}

std::string format_level(double u) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", u);
  return buf;
}

void validate(const ExperimentConfig& c) {
  require(c.d >= 1 && c.d <= 3, ErrorCode::invalid_dimension, "experiment: d must be 1, 2 or 3");
  require(!c.m.empty() && !c.u.empty() && !c.N.empty(), ErrorCode::invalid_argument,
          "experiment: m, u and N lists must be nonempty");
  for (int m : c.m) require(m >= 0 && m <= c.d, ErrorCode::invalid_argument, "experiment: m must lie in [0, d]");
  for (double N : c.N) require(N > 0.0, ErrorCode::invalid_argument, "experiment: N must be positive");
  require(std::is_sorted(c.N.begin(), c.N.end()), ErrorCode::invalid_argument, "experiment: N list must increase");
  require(c.h > 0.0 && c.h <= *std::min_element(c.N.begin(), c.N.end()) / 20.0 + 1e-12, ErrorCode::invalid_argument,
          "experiment: need 0 < h <= min(N) / 20");
  require(c.replicates >= 50, ErrorCode::insufficient_sample,
          "experiment: at least 50 replicates are needed for normality tests, got " + std::to_string(c.replicates));
  require(c.estimator == Estimator::direct || c.n_flats >= 1, ErrorCode::invalid_argument,
          "experiment: n_flats must be >= 1");
  require(!c.epsilon.empty() && c.epsilon.front() > 0.0, ErrorCode::invalid_argument,
          "experiment: epsilon must be positive");
}

namespace {

double excursion_length_1d(const FieldSample& s, double u, double N) {
  double len = 0.0;
  const Grid& g = s.grid;
  for (int i = 0; i + 1 < g.shape[0]; ++i) {
    const double a = g.coord(0, i), b = g.coord(0, i + 1);
    if (a < -N - 1e-9 * g.h || b > N + 1e-9 * g.h) continue;
    const double x0 = s.X[i] - u, x1 = s.X[i + 1] - u;
    if (x0 >= 0 && x1 >= 0)
      len += g.h;
    else if (x0 >= 0 || x1 >= 0)
      len += g.h * std::max(x0, x1) / std::abs(x1 - x0);
  }
  return len;
}

LineCount line_mode(Estimator e) { return e == Estimator::dirac ? LineCount::dirac : LineCount::morse; }

double ball_volume(int d, double N) { return kappa(d) * std::pow(N, d); }

}  // namespace

LKValue estimate_lk(const FieldSample& s, int m, double u, double N, Estimator estimator, std::size_t n_flats,
                    double epsilon, std::uint64_t seed) {
  const int d = s.grid.d;
  require(m >= 0 && m <= d, ErrorCode::invalid_argument, "estimate_lk: m must lie in [0, d]");
  if (d == 1 && m == 1) return {excursion_length_1d(s, u, N), false};
  if (estimator == Estimator::direct) {
    if (d == 1) {
      const ExcursionSet e = excursion_set(s, u, N);
      return {static_cast<double>(euler_char_1d(e.mask)), false};
    }
    if (d == 2) {
      const std::vector<double> level = window_level(s, u, N);
      return {direct_lk_2d(level, s.grid.shape[0], s.grid.shape[1], s.grid.h, m), false};
    }
    require(m == 0 || m == 3, ErrorCode::capability, "direct estimator in d = 3 supports m = 0 and m = 3");
    const ExcursionSet e = excursion_set(s, u, N);
    return {direct_lk_3d(e.mask, s.grid.shape[0], s.grid.shape[1], s.grid.shape[2], s.grid.h, m), false};
  }
  if (m == d) {
    // Volumes have no Crofton reduction: the direct lattice volume is used.
    const ExcursionSet e = excursion_set(s, u, N);
    const double cell = std::pow(s.grid.h, d);
    return {static_cast<double>(std::count(e.mask.begin(), e.mask.end(), 1)) * cell, false};
  }
  const FlatFunctional chi = field_chi(s, u, line_mode(estimator), epsilon);
  const LKEstimate est = crofton_lkc(chi, d, m, N, n_flats, seed, 1);
  return {est.value, est.suspect_flats > 0};
}

bool CellResult::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return !v.applicable || v.passed; });
}

bool ExperimentResult::passed() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.passed(); });
}

Verdict bound_check(const CellResult& cell, double tolerance) {
  Verdict v;
  v.name = "bound";
  const RadiusResult& r = cell.radii.back();
  if (r.degenerate) {
    v.applicable = false;
    v.detail = "degenerate sample";
    return v;
  }
  const double threshold = cell.lower_bound * (1.0 - tolerance) - 2.0 * r.normalized_variance_bootstrap.std_error;
  v.passed = r.normalized_variance >= threshold;
  char buf[256];
  std::snprintf(buf, sizeof buf, "normalized variance %.6g vs threshold %.6g (bound %.6g, tolerance %.2f, 2 SE %.3g)",
                r.normalized_variance, threshold, cell.lower_bound, tolerance,
                2.0 * r.normalized_variance_bootstrap.std_error);
  v.detail = buf;
  return v;
}

ExperimentResult run_clt(const ExperimentConfig& config, const FieldSource& source) {
  validate(config);
  const CovarianceModel model = make_model(config.model, config.d, config.model_param, config.model_path);
  const double f0 = model.spectral_density(0.0);

  std::vector<CellKey> keys;
  for (int m : config.m)
    for (double u : config.u) keys.push_back({m, u});
  // Direct estimators read X only; Morse and Dirac counts need the jet.
  const bool need_derivatives = config.estimator != Estimator::direct;

  ExperimentResult result;
  result.config = config;
  result.cells.resize(keys.size());
  for (std::size_t c = 0; c < keys.size(); ++c) {
    result.cells[c].key = keys[c];
    result.cells[c].radii.resize(config.N.size());
  }
  const auto R = static_cast<std::size_t>(config.replicates);
  const double eps = config.epsilon.front();

  for (std::size_t ni = 0; ni < config.N.size(); ++ni) {
    const double N = config.N[ni];
    const Grid grid = Grid::centered(config.d, N, config.h);
    std::optional<FieldSimulator> sim;
    if (!source) {
      SimulationOptions opts;
      opts.derivatives = need_derivatives;
      sim.emplace(model, grid, opts);
      result.simulation_method = sim->method();
    } else {
      result.simulation_method = "injected";
    }
    std::vector<std::vector<LKValue>> values(keys.size(), std::vector<LKValue>(R));
    parallel_for(R, config.threads, [&](std::size_t r) {
      const std::uint64_t field_seed = derive_seed(config.seed, {0xF1E1Du, ni, r});
      const FieldSample s = source ? source(grid, field_seed) : sim->sample(field_seed);
      for (std::size_t c = 0; c < keys.size(); ++c) {
        const std::uint64_t flat_seed = derive_seed(config.seed, {0xF1A7u, ni, r, c});
        values[c][r] = estimate_lk(s, keys[c].m, keys[c].u, N, config.estimator, config.n_flats, eps, flat_seed);
      }
    });
    for (std::size_t c = 0; c < keys.size(); ++c) {
      RadiusResult& rr = result.cells[c].radii[ni];
      rr.N = N;
      rr.window_volume = ball_volume(config.d, N);
      rr.values.resize(R);
      rr.suspect.resize(R);
      for (std::size_t r = 0; r < R; ++r) {
        rr.values[r] = values[c][r].value;
        rr.suspect[r] = values[c][r].suspect;
        rr.suspect_count += values[c][r].suspect;
      }
      const Moments mo = sample_moments(rr.values);
      rr.mean = mo.mean;
      rr.variance = mo.variance;
      rr.normalized_variance = mo.variance / rr.window_volume;
      rr.degenerate = !(mo.variance > 0.0);
      const double vol = rr.window_volume;
      rr.normalized_variance_bootstrap =
          bootstrap(rr.values, [vol](std::span<const double> x) { return sample_variance(x) / vol; },
                    config.bootstrap_resamples, derive_seed(config.seed, {0xB007u, ni, c}));
      if (!rr.degenerate) {
        rr.diagnostics = normality_diagnostics(rr.values);
        rr.standardized = standardize(rr.values);
      }
    }
  }

  for (auto& cell : result.cells) {
    cell.lower_bound = lower_bound(config.d, cell.key.m, cell.key.u, f0);
    const auto& radii = cell.radii;
    for (std::size_t i = 1; i < radii.size(); ++i)
      cell.variance_ratios.push_back(radii[i - 1].normalized_variance > 0
                                         ? radii[i].normalized_variance / radii[i - 1].normalized_variance
                                         : std::numeric_limits<double>::quiet_NaN());
    if (radii.size() >= 2 && radii.front().normalized_variance > 0 && radii.back().normalized_variance > 0) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (const auto& r : radii) {
        const double x = std::log(r.N), y = std::log(std::max(r.normalized_variance, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      const double n = static_cast<double>(radii.size());
      cell.log_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }

    const RadiusResult& last = radii.back();
    Verdict normal{"normality", true, true, ""};
    if (last.degenerate) {
      normal.applicable = false;
      normal.detail = "degenerate sample: all replicates equal, no KS test";
    } else {
      normal.passed = last.diagnostics->ks_p > config.normality_alpha;
      char buf[160];
      std::snprintf(buf, sizeof buf, "KS p %.4g at N=%g (alpha %.3g)", last.diagnostics->ks_p, last.N,
                    config.normality_alpha);
      normal.detail = buf;
    }
    cell.verdicts.push_back(normal);
    cell.verdicts.push_back(bound_check(cell, config.bound_tolerance));

    Verdict scaling{"variance_scaling", radii.size() >= 3, true, ""};
    if (scaling.applicable) {
      for (double q : cell.variance_ratios) scaling.passed = scaling.passed && q >= 0.75 && q <= 1.25;
      scaling.detail = "consecutive normalized-variance ratios in [0.75, 1.25]";
    } else {
      scaling.detail = "fewer than 3 radii";
    }
    cell.verdicts.push_back(scaling);

    int suspects = 0;
    std::size_t total = 0;
    for (const auto& r : radii) {
      suspects += r.suspect_count;
      total += r.values.size();
    }
    Verdict suspect{"suspect_fraction", true, suspects <= config.max_suspect_fraction * static_cast<double>(total),
                    std::to_string(suspects) + " of " + std::to_string(total) + " replicates flagged"};
    cell.verdicts.push_back(suspect);
  }
  return result;
}

std::vector<ScalingTable> variance_scaling(const ExperimentResult& result) {
  require(result.config.N.size() >= 3, ErrorCode::insufficient_sample, "variance_scaling: need at least 3 radii");
  std::vector<ScalingTable> out;
  for (const auto& cell : result.cells) {
    ScalingTable t;
    t.key = cell.key;
    for (const auto& r : cell.radii)
      t.rows.push_back({r.N, r.normalized_variance, r.normalized_variance_bootstrap.lower,
                        r.normalized_variance_bootstrap.upper});
    t.ratios = cell.variance_ratios;
    t.log_slope = cell.log_slope;
    t.stable = std::all_of(t.ratios.begin(), t.ratios.end(), [](double q) { return q >= 0.75 && q <= 1.25; });
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

nlohmann::json config_json(const ExperimentConfig& c) {
  return {{"model", c.model},
          {"model_param", c.model_param},
          {"d", c.d},
          {"m", c.m},
          {"u", c.u},
          {"N", c.N},
          {"h", c.h},
          {"replicates", c.replicates},
          {"n_flats", c.n_flats},
          {"epsilon", c.epsilon},
          {"seed", c.seed},
          {"estimator", to_string(c.estimator)},
          {"bootstrap_resamples", c.bootstrap_resamples},
          {"bound_tolerance", c.bound_tolerance},
          {"normality_alpha", c.normality_alpha}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out << text;
  out.close();
  require(static_cast<bool>(out), ErrorCode::io, "write failed: " + path.string());
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string summary_json(const ExperimentResult& result, const std::optional<VarianceBreakdown>& breakdown) {
  nlohmann::json j;
  j["config"] = config_json(result.config);
  j["simulation_method"] = result.simulation_method;
  j["passed"] = result.passed();
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json cj;
    cj["m"] = cell.key.m;
    cj["u"] = cell.key.u;
    cj["lower_bound"] = cell.lower_bound;
    cj["variance_ratios"] = cell.variance_ratios;
    cj["log_slope"] = cell.log_slope;
    cj["passed"] = cell.passed();
    nlohmann::json radii = nlohmann::json::array();
    for (const auto& r : cell.radii) {
      nlohmann::json rj{{"N", r.N},
                        {"window_volume", r.window_volume},
                        {"mean", r.mean},
                        {"variance", r.variance},
                        {"normalized_variance", r.normalized_variance},
                        {"normalized_variance_se", r.normalized_variance_bootstrap.std_error},
                        {"normalized_variance_ci", {r.normalized_variance_bootstrap.lower,
                                                    r.normalized_variance_bootstrap.upper}},
                        {"degenerate", r.degenerate},
                        {"suspect_count", r.suspect_count},
                        {"replicates", r.values.size()}};
      if (r.diagnostics) {
        rj["ks_statistic"] = r.diagnostics->ks_statistic;
        rj["ks_p"] = r.diagnostics->ks_p;
        rj["skewness"] = r.diagnostics->skewness;
        rj["excess_kurtosis"] = r.diagnostics->excess_kurtosis;
      }
      radii.push_back(rj);
    }
    cj["radii"] = radii;
    nlohmann::json verdicts = nlohmann::json::object();
    for (const auto& v : cell.verdicts)
      verdicts[v.name] = {{"applicable", v.applicable}, {"passed", v.passed}, {"detail", v.detail}};
    cj["verdicts"] = verdicts;
    cells.push_back(cj);
  }
  j["cells"] = cells;
  if (breakdown) j["variance"] = nlohmann::json::parse(to_json(*breakdown));
  return j.dump(2) + "\n";
}

std::vector<std::string> write_experiment(const ExperimentResult& result, const std::string& out_dir,
                                          const std::optional<VarianceBreakdown>& breakdown) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec && fs::is_directory(out_dir), ErrorCode::io, "cannot create output directory " + out_dir);
  std::vector<std::string> files;
  for (const auto& cell : result.cells) {
    const std::string tag = "m" + std::to_string(cell.key.m) + "_u" + format_level(cell.key.u);
    std::string csv = "replicate,N,lk_value,suspect\n";
    for (const auto& r : cell.radii)
      for (std::size_t i = 0; i < r.values.size(); ++i)
        csv += std::to_string(i) + "," + num(r.N) + "," + num(r.values[i]) + "," + (r.suspect[i] ? "1" : "0") + "\n";
    write_text(fs::path(out_dir) / ("lk_" + tag + ".csv"), csv);
    files.push_back("lk_" + tag + ".csv");
    const RadiusResult& last = cell.radii.back();
    if (last.diagnostics) {
      std::string qq = "theoretical_quantile,empirical_quantile\n";
      for (const auto& p : last.diagnostics->qq) qq += num(p.theoretical) + "," + num(p.empirical) + "\n";
      write_text(fs::path(out_dir) / ("qq_" + tag + ".csv"), qq);
      files.push_back("qq_" + tag + ".csv");
    }
  }
  write_text(fs::path(out_dir) / "summary.json", summary_json(result, breakdown));
  files.push_back("summary.json");
  return files;
}

}  // namespace lkgrf
