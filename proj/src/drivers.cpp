#include "lkgrf/drivers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lkgrf/error.hpp"
#include "lkgrf/fieldsim.hpp"
#include "lkgrf/flats.hpp"
#include "lkgrf/rice.hpp"
#include "lkgrf/rng.hpp"

#ifndef LKGRF_VERSION
#define LKGRF_VERSION "dev"
#endif

namespace lkgrf {

namespace fs = std::filesystem;

ExitCode exit_code_for(ErrorCode code) {
  return code == ErrorCode::io || code == ErrorCode::parse ? ExitCode::operational : ExitCode::fail;
}

std::string tool_version() { return LKGRF_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string line(bool ok, const std::string& name, const std::string& detail) {
  return std::string(ok ? "PASS " : "FAIL ") + name + ": " + detail + "\n";
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::io, "cannot create output directory " + dir);
  const fs::path probe = fs::path(dir) / ".lkgrf_write_probe";
  {
    std::ofstream out(probe);
    require(static_cast<bool>(out), ErrorCode::io, "output directory is not writable: " + dir);
  }
  fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out << text;
  out.close();
  require(static_cast<bool>(out), ErrorCode::io, "write failed: " + path.string());
}

std::string cell_tag(int m, double u) { return "m" + std::to_string(m) + "_u" + format_level(u); }

}  // namespace

void write_manifest(const RunConfig& config, const std::string& out_dir, const std::string& command,
                    const std::vector<std::string>& files, const std::string& started, const std::string& finished) {
  nlohmann::json j{{"command", command},
                   {"config_hash", config.hash()},
                   {"tool_version", tool_version()},
                   {"seed", config.experiment.seed},
                   {"timestamps", {{"started", started}, {"finished", finished}}},
                   {"outputs", files}};
  write_text(fs::path(out_dir) / "run.json", j.dump(2) + "\n");
}

DriverOutcome cmd_validate(const RunConfig& config) {
  DriverOutcome out;
  const CovarianceModel model = make_model(config.model);
  const int m = config.experiment.m.empty() ? 0 : std::min(config.experiment.m.front(), model.dimension() - 1);
  const AssumptionReport rep = check_assumptions(model, m);
  std::ostringstream os;
  os << "model " << model.name() << " d=" << rep.d << " m=" << rep.m << " config " << config.hash() << "\n";
  os << line(rep.normalization_ok, "normalization",
             fmt("|R(0)-1| = %.3g, |R''(0)+1| = %.3g", rep.normalization_error, rep.curvature_error));
  os << line(rep.integrable, "psi integrability",
             fmt("integral %.6g, tail estimate %.3g, tail slope %.3g", rep.psi_integral, rep.psi_tail_estimate,
                 rep.psi_tail_slope));
  std::string lags;
  for (const auto& l : rep.lag_eigenvalues) lags += fmt(" %g:%.3g", l.lag, l.min_eigenvalue);
  os << line(rep.nondegenerate, "nondegeneracy",
             fmt("min eigenvalue at 0 %.3g, lags", rep.sigma_min_eigenvalue) + lags);
  os << "mu4 " << fmt("%.10g", rep.mu4) << "\n";
  out.exit = rep.passed() ? ExitCode::pass : ExitCode::fail;
  out.report = os.str();
  return out;
}

DriverOutcome cmd_clt(const RunConfig& config, const std::string& out_dir, const RunOptions& options) {
  const std::string started = utc_timestamp();
  ensure_dir(out_dir);
  ExperimentConfig ec = config.experiment;
  ec.threads = options.threads ? options.threads : ec.threads;
  const ExperimentResult result = run_clt(ec);
  DriverOutcome out;
  out.files = write_experiment(result, out_dir);
  std::ostringstream os;
  for (const auto& cell : result.cells) {
    const RadiusResult& last = cell.radii.back();
    os << "cell m=" << cell.key.m << " u=" << format_level(cell.key.u) << ": mean " << fmt("%.6g", last.mean)
       << ", Var/|B_N| " << fmt("%.6g", last.normalized_variance) << ", lower bound "
       << fmt("%.6g", cell.lower_bound);
    if (last.diagnostics)
      os << fmt(", KS p %.4g, skewness %.3g", last.diagnostics->ks_p, last.diagnostics->skewness);
    os << "\n";
    for (const auto& v : cell.verdicts)
      os << "  " << (!v.applicable ? "SKIP " : v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.detail << "\n";
  }
  out.report = os.str();
  out.exit = result.passed() ? ExitCode::pass : ExitCode::fail;
  write_manifest(config, out_dir, "clt", out.files, started, utc_timestamp());
  return out;
}

DriverOutcome cmd_chaos(const RunConfig& config, const std::string& out_dir, int q_max, const RunOptions& options) {
  const std::string started = utc_timestamp();
  ensure_dir(out_dir);
  const CovarianceModel model = make_model(config.model);
  CoefficientOptions co = config.chaos.options;
  co.threads = options.threads;
  CoefficientCache cache(config.chaos.cache);
  DriverOutcome out;
  std::ostringstream os;
  bool warnings = false;
  for (int m : config.experiment.m) {
    if (m >= model.dimension()) {
      os << "m=" << m << ": volume functional, no jet expansion (skipped)\n";
      continue;
    }
    for (double u : config.experiment.u) {
      const ChaosTable table =
          build_chaos_table(model, m, u, q_max, co, config.chaos.cache.empty() ? nullptr : &cache);
      std::string csv = "n,order,value,std_error,method\n";
      for (const auto& [n, c] : table.coefficients) {
        char buf[128];
        std::snprintf(buf, sizeof buf, ",%d,%.17g,%.17g,", total_order(n), c.value, c.std_error);
        csv += "\"" + format_multi_index(n) + "\"" + buf + c.method + "\n";
        warnings = warnings || c.precision_warning;
      }
      const std::string name = "coefficients_" + cell_tag(m, u) + ".csv";
      write_text(fs::path(out_dir) / name, csv);
      out.files.push_back(name);
      MultiIndex eD(table.D(), 0);
      eD.back() = 1;
      const CoefficientResult& last = table.at(eD);
      os << "m=" << m << " u=" << format_level(u) << ": " << table.coefficients.size() << " coefficients, c"
         << format_multi_index(eD) << fmt(" = %.8g +- %.2g (closed form %.8g), Hermite rank %g\n", last.value,
                                          last.std_error, coefficient_c_last_closed_form(table.sigma, u),
                                          hermite_rank(table));
    }
  }
  if (!config.chaos.cache.empty()) cache.save();
  if (warnings) os << "warning: some coefficients have a large error estimate (precision_warning)\n";
  out.report = os.str();
  write_manifest(config, out_dir, "chaos", out.files, started, utc_timestamp());
  return out;
}

DriverOutcome cmd_variance(const RunConfig& config, const std::string& out_dir, const RunOptions& options) {
  const std::string started = utc_timestamp();
  ensure_dir(out_dir);
  const CovarianceModel model = make_model(config.model);
  const int d = model.dimension();
  const double f0 = model.spectral_density(0.0);
  CoefficientOptions co = config.chaos.options;
  co.threads = options.threads;
  TruncatedOptions to = config.variance.options;
  to.threads = options.threads;
  const int Q = config.variance.Q;
  DriverOutcome out;
  std::ostringstream os;
  nlohmann::json cells = nlohmann::json::array();
  for (int m : config.experiment.m) {
    for (double u : config.experiment.u) {
      nlohmann::json cj;
      if (m >= d) {
        cj = {{"d", d}, {"m", m}, {"u", u}, {"lower_bound", lower_bound(d, m, u, f0)}};
      } else {
        const ChaosTable table = build_chaos_table(model, m, u, std::max(Q, 1), co);
        cj = nlohmann::json::parse(to_json(variance_breakdown(model, table, Q, to)));
      }
      os << "m=" << m << " u=" << format_level(u) << fmt(": lower bound %.8g", cj["lower_bound"].get<double>());
      if (cj.contains("truncated_total"))
        os << fmt(", truncated total (Q=%g) %.8g", Q, cj["truncated_total"].get<double>());
      os << "\n";
      cells.push_back(cj);
    }
  }
  nlohmann::json j{{"model", model.name()}, {"f0", f0}, {"cells", cells}};
  write_text(fs::path(out_dir) / "variance.json", j.dump(2) + "\n");
  out.files.push_back("variance.json");
  out.report = os.str();
  write_manifest(config, out_dir, "variance", out.files, started, utc_timestamp());
  return out;
}

DriverOutcome cmd_rice_check(const RunConfig& config, const RunOptions&) {
  const CovarianceModel model = make_model(config.model);
  const std::uint64_t seed = config.experiment.seed;
  DriverOutcome out;
  std::ostringstream os;
  bool all = true;
  auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    all = all && ok;
    os << line(ok, name, detail);
  };

  {
    Rng rng = make_stream(seed, {0xD37u});
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const int dim = 1 + i % 4;
      const double c1 = unif(rng), c2 = unif(rng);
      Eigen::VectorXd v(dim);
      for (int j = 0; j < dim; ++j) v(j) = unif(rng);
      const Eigen::MatrixXd a = c1 * Eigen::MatrixXd::Identity(dim, dim) + c2 * v * v.transpose();
      worst = std::max(worst, std::abs(det_rank_one(c1, c2, v, dim) - a.determinant()));
    }
    report(worst <= 1e-10, "det_rank_one", fmt("max |error| %.3g over 10^4 cases, dims 1-4", worst));
  }
  {
    double worst = 0.0;
    for (int k = 1; k <= 3; ++k)
      for (int i = 1; i <= 50; ++i) {
        const double r = 0.1 * i;
        Eigen::VectorXd t = Eigen::VectorXd::Zero(k);
        t(0) = k == 1 ? r : r * 0.6;
        if (k > 1) t(1) = r * 0.8;
        const double dense = d2cov_on_flat(model, k, t).det_identity_value;
        const double closed = gradient_pair_det_identity(model, k, r);
        worst = std::max(worst, std::abs(dense - closed) / std::max(std::abs(dense), 1e-300));
      }
    report(worst <= 1e-10, "gradient_pair_det_identity", fmt("max relative error %.3g, k in 1..3, r in [0.1, 5]", worst));
  }
  {
    const CovarianceModel m2 = model.with_dimension(2);
    Eigen::VectorXd t(2);
    t << 1.0, 1.0;
    const FlatCovJet j = d2cov_on_flat(model, 2, t);
    const double e = 1e-4;
    double worst = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        Eigen::VectorXd ea = Eigen::VectorXd::Zero(2), eb = Eigen::VectorXd::Zero(2);
        ea(a) = e;
        eb(b) = e;
        const double fd = (m2.cov(t + ea + eb) - m2.cov(t + ea - eb) - m2.cov(t - ea + eb) + m2.cov(t - ea - eb)) /
                          (4 * e * e);
        worst = std::max(worst, std::abs(fd - j.d2cov(a, b)));
      }
    report(worst < 1e-6, "d2cov_on_flat", fmt("finite-difference Hessian of Cov at t=(1,1): max error %.3g", worst));
  }
  {
    const TaylorReport tr = taylor_remainder_check(model);
    report(tr.passed, "taylor_remainder",
           fmt("slopes %.3f (>= 3.9) and %.3f (>= 2.9), mu %.10g", tr.first_slope, tr.second_slope, tr.mu));
  }
  {
    double worst = 0.0;
    for (int k = 1; k <= 2; ++k)
      for (double r : {0.3, 1.0, 2.5}) {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(k);
        t(0) = r;
        const double p = gradient_pair_density(model, k, t, Eigen::VectorXd::Zero(k));
        const double shape =
            std::pow(2.0 * std::numbers::pi, -static_cast<double>(k)) / std::sqrt(gradient_pair_det_identity(model, k, r));
        worst = std::max(worst, std::abs(p - shape) / shape);
      }
    report(worst < 1e-10, "density_shape", fmt("(2 pi)^-k det^-1/2 vs dense joint density: max relative error %.3g", worst));
  }
  {
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd t = Eigen::VectorXd::Constant(1, 8.0);
    const MomentEstimate far = kac_rice_second_moment_integrand(model, 1, t, y, 100000, seed);
    const double first = kac_rice_first_moment(model, 1, 1.0, y).value;
    const double rel = std::abs(far.value / (first * first) - 1.0);
    report(rel < 0.02, "second_moment_decorrelation", fmt("I(8) %.6g vs product %.6g, relative gap %.3g", far.value, first * first, rel));
    const Eigen::VectorXd t1 = Eigen::VectorXd::Constant(1, 1.0);
    const MomentEstimate mc = kac_rice_second_moment_integrand(model, 1, t1, y, 100000, seed);
    const MomentEstimate exact = kac_rice_second_moment_integrand(model, 1, t1, y, 0);
    report(std::abs(mc.value - exact.value) <= 3 * mc.std_error + 1e-12, "second_moment_closed_form",
           fmt("k=1, r=1: Monte Carlo %.6g +- %.2g vs closed form %.6g", mc.value, mc.std_error, exact.value));
  }
  for (int k = 1; k <= 2; ++k) {
    std::vector<double> xs, ys;
    for (double r : {0.05, 0.1, 0.2, 0.35, 0.5}) {
      Eigen::VectorXd t = Eigen::VectorXd::Zero(k);
      t(0) = r;
      const MomentEstimate e = kac_rice_second_moment_integrand(model, k, t, Eigen::VectorXd::Zero(k),
                                                                k == 1 ? 0 : 20000, seed);
      xs.push_back(std::log(r));
      ys.push_back(std::log(std::max(e.value, 1e-300)));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double n = static_cast<double>(xs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double need = -(k - 2) - 0.2;
    report(slope >= need, "second_moment_small_lag_k" + std::to_string(k),
           fmt("log-log slope on (0.05, 0.5) %.3f (>= %.1f)", slope, need));
  }
  out.report = os.str();
  out.exit = all ? ExitCode::pass : ExitCode::fail;
  return out;
}

DriverOutcome cmd_simulate(const RunConfig& config, const std::string& out_dir, const RunOptions&) {
  const std::string started = utc_timestamp();
  ensure_dir(out_dir);
  const CovarianceModel model = make_model(config.model);
  const ExperimentConfig& e = config.experiment;
  const Grid grid = Grid::centered(model.dimension(), e.N.front(), e.h);
  const FieldSample s = simulate(model, grid, e.seed);
  DriverOutcome out;
  const std::string name = "field_seed" + std::to_string(e.seed) + ".bin";
  dump_field(s, (fs::path(out_dir) / name).string());
  out.files.push_back(name);
  out.report = "simulated " + std::to_string(grid.size()) + " nodes by " + s.method + ", wrote " + name + "\n";
  write_manifest(config, out_dir, "simulate", out.files, started, utc_timestamp());
  return out;
}

}  // namespace lkgrf
