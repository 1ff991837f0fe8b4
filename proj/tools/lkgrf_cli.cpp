// Command-line driver. Talks to the library only through the C API.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "lkgrf/lkgrf.h"

namespace {

struct Flags {
  std::string config;
  std::string out = "out";
  std::string seed;
  std::string estimator;
  unsigned threads = 0;
  int q_max = 1;
  bool quiet = false;
};

int fail(lkgrf_status status) {
  std::fprintf(stderr, "error (%s): %s\n", lkgrf_status_string(status), lkgrf_last_error());
  return lkgrf_exit_code(status);
}

int run(const std::string& command, const Flags& f) {
  lkgrf_config* cfg = nullptr;
  lkgrf_status st = lkgrf_config_load(f.config.c_str(), &cfg);
  if (st != LKGRF_OK) return fail(st);
  if (!f.seed.empty() && (st = lkgrf_config_set(cfg, "experiment", "seed", f.seed.c_str())) != LKGRF_OK) {
    lkgrf_config_free(cfg);
    return fail(st);
  }
  if (!f.estimator.empty() &&
      (st = lkgrf_config_set(cfg, "experiment", "estimator", f.estimator.c_str())) != LKGRF_OK) {
    lkgrf_config_free(cfg);
    return fail(st);
  }

  char* report = nullptr;
  if (command == "validate")
    st = lkgrf_validate(cfg, &report);
  else if (command == "clt")
    st = lkgrf_run_clt(cfg, f.out.c_str(), f.threads, &report);
  else if (command == "chaos")
    st = lkgrf_run_chaos(cfg, f.out.c_str(), f.q_max, f.threads, &report);
  else if (command == "variance")
    st = lkgrf_run_variance(cfg, f.out.c_str(), f.threads, &report);
  else if (command == "rice-check")
    st = lkgrf_run_rice_check(cfg, &report);
  else
    st = lkgrf_simulate(cfg, f.out.c_str(), &report);
  lkgrf_config_free(cfg);

  if (report) {
    if (!f.quiet) std::fputs(report, stdout);
    lkgrf_string_free(report);
  }
  if (st == LKGRF_OK || st == LKGRF_CHECK_FAILED) return lkgrf_exit_code(st);
  return fail(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lipschitz-Killing curvatures of Gaussian excursion sets: simulation, chaos and variance tools"};
  app.set_version_flag("--version", lkgrf_version());
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub, bool writes) {
    sub->add_option("--config", f.config, "INI configuration file")->required();
    sub->add_option("--seed", f.seed, "override [experiment] seed");
    sub->add_option("--threads", f.threads, "worker threads (0 = available parallelism)");
    sub->add_flag("--quiet", f.quiet, "suppress the report on stdout");
    if (writes) sub->add_option("--out", f.out, "output directory")->capture_default_str();
  };

  auto* validate = app.add_subcommand("validate", "check the covariance assumptions of the configured model");
  add_common(validate, false);
  auto* clt = app.add_subcommand("clt", "replicated LK estimates, normality diagnostics and variance verdicts");
  add_common(clt, true);
  clt->add_option("--estimator", f.estimator, "direct | crofton | dirac")
      ->check(CLI::IsMember({"direct", "crofton", "dirac"}));
  auto* chaos = app.add_subcommand("chaos", "Hermite chaos coefficients c(n) up to a total order");
  add_common(chaos, true);
  chaos->add_option("--q", f.q_max, "maximal chaos order")->capture_default_str()->check(CLI::Range(1, 6));
  auto* variance = app.add_subcommand("variance", "lower bound and truncated chaos variance");
  add_common(variance, true);
  auto* rice = app.add_subcommand("rice-check", "Kac-Rice identities and property checks");
  add_common(rice, false);
  auto* simulate = app.add_subcommand("simulate", "simulate one field realization and dump it");
  add_common(simulate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (auto* sub : app.get_subcommands()) return run(sub->get_name(), f);
  return 2;
}
