#include "lkgrf/lkgrf.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <string>

#include "lkgrf/chaos.hpp"
#include "lkgrf/config.hpp"
#include "lkgrf/drivers.hpp"
#include "lkgrf/error.hpp"
#include "lkgrf/flats.hpp"
#include "lkgrf/rice.hpp"
#include "lkgrf/variance.hpp"

struct lkgrf_config {
  lkgrf::IniDocument document;
  std::string base_dir = ".";
  std::string source_path;
  std::string hash;
};

namespace {

thread_local std::string last_error;

lkgrf_status status_for(lkgrf::ErrorCode code) {
  using lkgrf::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return LKGRF_ERR_INVALID_ARGUMENT;
    case ErrorCode::invalid_dimension: return LKGRF_ERR_INVALID_DIMENSION;
    case ErrorCode::domain: return LKGRF_ERR_DOMAIN;
    case ErrorCode::capability: return LKGRF_ERR_CAPABILITY;
    case ErrorCode::nondegeneracy: return LKGRF_ERR_NONDEGENERACY;
    case ErrorCode::complexity_guard: return LKGRF_ERR_COMPLEXITY_GUARD;
    case ErrorCode::dependency: return LKGRF_ERR_DEPENDENCY;
    case ErrorCode::singularity: return LKGRF_ERR_SINGULARITY;
    case ErrorCode::internal_consistency: return LKGRF_ERR_INTERNAL_CONSISTENCY;
    case ErrorCode::inapplicable_bound: return LKGRF_ERR_INAPPLICABLE_BOUND;
    case ErrorCode::insufficient_sample: return LKGRF_ERR_INSUFFICIENT_SAMPLE;
    case ErrorCode::degenerate_distribution: return LKGRF_ERR_DEGENERATE_DISTRIBUTION;
    case ErrorCode::parse: return LKGRF_ERR_PARSE;
    case ErrorCode::io: return LKGRF_ERR_IO;
  }
  return LKGRF_ERR_INTERNAL;
}

template <class Fn>
lkgrf_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    return fn();
  } catch (const lkgrf::Error& e) {
    last_error = e.what();
    return status_for(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return LKGRF_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return LKGRF_ERR_INTERNAL;
  }
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

lkgrf::RunConfig typed(const lkgrf_config* config) {
  lkgrf::require(config != nullptr, lkgrf::ErrorCode::invalid_argument, "null config handle");
  lkgrf::RunConfig rc = lkgrf::interpret(config->document, config->base_dir);
  rc.source_path = config->source_path;
  return rc;
}

lkgrf_status finish(const lkgrf::DriverOutcome& outcome, char** report) {
  if (report) *report = duplicate(outcome.report);
  return outcome.exit == lkgrf::ExitCode::pass ? LKGRF_OK : LKGRF_CHECK_FAILED;
}

lkgrf_status make_handle(lkgrf::IniDocument doc, const std::string& base_dir, const std::string& path,
                         lkgrf_config** out) {
  lkgrf::require(out != nullptr, lkgrf::ErrorCode::invalid_argument, "null output handle");
  auto* h = new lkgrf_config{std::move(doc), base_dir, path, {}};
  try {
    lkgrf::interpret(h->document, h->base_dir);  // surface parse errors at load time
  } catch (...) {
    delete h;
    throw;
  }
  h->hash = h->document.hash();
  *out = h;
  return LKGRF_OK;
}

}  // namespace

extern "C" {

const char* lkgrf_version(void) {
  static const std::string v = lkgrf::tool_version();
  return v.c_str();
}

const char* lkgrf_status_string(lkgrf_status status) {
  switch (status) {
    case LKGRF_OK: return "ok";
    case LKGRF_CHECK_FAILED: return "check-failed";
    case LKGRF_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case LKGRF_ERR_INVALID_DIMENSION: return "invalid-dimension";
    case LKGRF_ERR_DOMAIN: return "domain";
    case LKGRF_ERR_CAPABILITY: return "capability";
    case LKGRF_ERR_NONDEGENERACY: return "nondegeneracy";
    case LKGRF_ERR_COMPLEXITY_GUARD: return "complexity-guard";
    case LKGRF_ERR_DEPENDENCY: return "dependency";
    case LKGRF_ERR_SINGULARITY: return "singularity";
    case LKGRF_ERR_INTERNAL_CONSISTENCY: return "internal-consistency";
    case LKGRF_ERR_INAPPLICABLE_BOUND: return "inapplicable-bound";
    case LKGRF_ERR_INSUFFICIENT_SAMPLE: return "insufficient-sample";
    case LKGRF_ERR_DEGENERATE_DISTRIBUTION: return "degenerate-distribution";
    case LKGRF_ERR_PARSE: return "parse";
    case LKGRF_ERR_IO: return "io";
    case LKGRF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* lkgrf_last_error(void) { return last_error.c_str(); }

int lkgrf_exit_code(lkgrf_status status) {
  if (status == LKGRF_OK) return 0;
  if (status == LKGRF_ERR_IO || status == LKGRF_ERR_PARSE) return 2;
  return 1;
}

void lkgrf_string_free(char* s) { std::free(s); }

lkgrf_status lkgrf_config_load(const char* path, lkgrf_config** out) {
  return guarded([&] {
    lkgrf::require(path != nullptr, lkgrf::ErrorCode::invalid_argument, "null config path");
    const std::filesystem::path p(path);
    const std::string base = p.parent_path().empty() ? std::string(".") : p.parent_path().string();
    return make_handle(lkgrf::load_ini(path), base, path, out);
  });
}

lkgrf_status lkgrf_config_parse(const char* text, lkgrf_config** out) {
  return guarded([&] {
    lkgrf::require(text != nullptr, lkgrf::ErrorCode::invalid_argument, "null config text");
    return make_handle(lkgrf::parse_ini(text), ".", "", out);
  });
}

void lkgrf_config_free(lkgrf_config* config) { delete config; }

lkgrf_status lkgrf_config_set(lkgrf_config* config, const char* section, const char* key, const char* value) {
  return guarded([&] {
    lkgrf::require(config && section && key && value, lkgrf::ErrorCode::invalid_argument, "null argument");
    lkgrf::IniDocument doc = config->document;
    doc.set(section, key, value);
    // Re-validate through the parser so unknown keys are rejected.
    lkgrf::interpret(lkgrf::parse_ini(doc.canonical()), config->base_dir);
    config->document = std::move(doc);
    config->hash = config->document.hash();
    return LKGRF_OK;
  });
}

const char* lkgrf_config_hash(const lkgrf_config* config) { return config ? config->hash.c_str() : ""; }

lkgrf_status lkgrf_validate(const lkgrf_config* config, char** report) {
  return guarded([&] { return finish(lkgrf::cmd_validate(typed(config)), report); });
}

lkgrf_status lkgrf_run_clt(const lkgrf_config* config, const char* out_dir, unsigned threads, char** report) {
  return guarded([&] {
    lkgrf::require(out_dir != nullptr, lkgrf::ErrorCode::invalid_argument, "null output directory");
    return finish(lkgrf::cmd_clt(typed(config), out_dir, {threads}), report);
  });
}

lkgrf_status lkgrf_run_chaos(const lkgrf_config* config, const char* out_dir, int q_max, unsigned threads,
                             char** report) {
  return guarded([&] {
    lkgrf::require(out_dir != nullptr, lkgrf::ErrorCode::invalid_argument, "null output directory");
    return finish(lkgrf::cmd_chaos(typed(config), out_dir, q_max, {threads}), report);
  });
}

lkgrf_status lkgrf_run_variance(const lkgrf_config* config, const char* out_dir, unsigned threads, char** report) {
  return guarded([&] {
    lkgrf::require(out_dir != nullptr, lkgrf::ErrorCode::invalid_argument, "null output directory");
    return finish(lkgrf::cmd_variance(typed(config), out_dir, {threads}), report);
  });
}

lkgrf_status lkgrf_run_rice_check(const lkgrf_config* config, char** report) {
  return guarded([&] { return finish(lkgrf::cmd_rice_check(typed(config)), report); });
}

lkgrf_status lkgrf_simulate(const lkgrf_config* config, const char* out_dir, char** report) {
  return guarded([&] {
    lkgrf::require(out_dir != nullptr, lkgrf::ErrorCode::invalid_argument, "null output directory");
    return finish(lkgrf::cmd_simulate(typed(config), out_dir), report);
  });
}

lkgrf_status lkgrf_flag_coefficient(int d, int k, double* out) {
  return guarded([&] {
    lkgrf::require(out && d >= 1 && k >= 0 && k <= d, lkgrf::ErrorCode::invalid_argument, "need 0 <= k <= d");
    *out = lkgrf::flag_coefficient(d, k);
    return LKGRF_OK;
  });
}

lkgrf_status lkgrf_lower_bound(int d, int m, double u, double f0, double* out) {
  return guarded([&] {
    lkgrf::require(out != nullptr, lkgrf::ErrorCode::invalid_argument, "null output");
    *out = lkgrf::lower_bound(d, m, u, f0);
    return LKGRF_OK;
  });
}

lkgrf_status lkgrf_det_rank_one(double c1, double c2, const double* v, int dim, double* out) {
  return guarded([&] {
    lkgrf::require(out && v && dim >= 1, lkgrf::ErrorCode::invalid_argument, "bad arguments");
    *out = lkgrf::det_rank_one(c1, c2, Eigen::Map<const Eigen::VectorXd>(v, dim), dim);
    return LKGRF_OK;
  });
}

lkgrf_status lkgrf_mehler_expectation(int D, const int* n, const int* n_prime, const double* r, double* out) {
  return guarded([&] {
    lkgrf::require(out && n && n_prime && r && D >= 1, lkgrf::ErrorCode::invalid_argument, "bad arguments");
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> rm(r, D, D);
    *out = lkgrf::mehler_expectation(lkgrf::MultiIndex(n, n + D), lkgrf::MultiIndex(n_prime, n_prime + D),
                                     Eigen::MatrixXd(rm));
    return LKGRF_OK;
  });
}

lkgrf_status lkgrf_chaos_coefficient(int d, int m, double u, const int* n, int D, double* value, double* std_error) {
  return guarded([&] {
    lkgrf::require(value && n, lkgrf::ErrorCode::invalid_argument, "bad arguments");
    const lkgrf::SigmaMatrix sigma = lkgrf::build_sigma(lkgrf::make_gaussian_cov(d), m);
    lkgrf::require(D == sigma.D, lkgrf::ErrorCode::invalid_argument, "multi-index length must equal D");
    const lkgrf::CoefficientResult c = lkgrf::coefficient_c(lkgrf::MultiIndex(n, n + D), sigma, u);
    *value = c.value;
    if (std_error) *std_error = c.std_error;
    return LKGRF_OK;
  });
}

}  // extern "C"
