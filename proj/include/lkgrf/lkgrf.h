/* C interface to the lkgrf library. All functions return an lkgrf_status;
 * strings handed out through char** parameters must be released with
 * lkgrf_string_free. The message of the last failure on the calling thread is
 * available from lkgrf_last_error. */
#ifndef LKGRF_H
#define LKGRF_H

#include <stdint.h>

#if defined(LKGRF_BUILDING_LIBRARY)
#define LKGRF_API __attribute__((visibility("default")))
#else
#define LKGRF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lkgrf_status {
  LKGRF_OK = 0,
  LKGRF_CHECK_FAILED = 1, /* ran to completion, a scientific verdict failed */
  LKGRF_ERR_INVALID_ARGUMENT = 10,
  LKGRF_ERR_INVALID_DIMENSION = 11,
  LKGRF_ERR_DOMAIN = 12,
  LKGRF_ERR_CAPABILITY = 13,
  LKGRF_ERR_NONDEGENERACY = 14,
  LKGRF_ERR_COMPLEXITY_GUARD = 15,
  LKGRF_ERR_DEPENDENCY = 16,
  LKGRF_ERR_SINGULARITY = 17,
  LKGRF_ERR_INTERNAL_CONSISTENCY = 18,
  LKGRF_ERR_INAPPLICABLE_BOUND = 19,
  LKGRF_ERR_INSUFFICIENT_SAMPLE = 20,
  LKGRF_ERR_DEGENERATE_DISTRIBUTION = 21,
  LKGRF_ERR_PARSE = 30,
  LKGRF_ERR_IO = 31,
  LKGRF_ERR_INTERNAL = 40
} lkgrf_status;

typedef struct lkgrf_config lkgrf_config;

LKGRF_API const char* lkgrf_version(void);
LKGRF_API const char* lkgrf_status_string(lkgrf_status status);
LKGRF_API const char* lkgrf_last_error(void);
/* 0 for LKGRF_OK, 2 for I/O and parse errors, 1 otherwise. */
LKGRF_API int lkgrf_exit_code(lkgrf_status status);
LKGRF_API void lkgrf_string_free(char* s);

LKGRF_API lkgrf_status lkgrf_config_load(const char* path, lkgrf_config** out);
LKGRF_API lkgrf_status lkgrf_config_parse(const char* text, lkgrf_config** out);
LKGRF_API void lkgrf_config_free(lkgrf_config* config);
/* Overrides a key; the config hash follows the effective values. */
LKGRF_API lkgrf_status lkgrf_config_set(lkgrf_config* config, const char* section, const char* key,
                                        const char* value);
/* 16 hex digits of the canonical config hash, valid while the handle lives. */
LKGRF_API const char* lkgrf_config_hash(const lkgrf_config* config);

/* Drivers. `report` (optional) receives the human-readable output. threads = 0
 * uses the available parallelism. */
LKGRF_API lkgrf_status lkgrf_validate(const lkgrf_config* config, char** report);
LKGRF_API lkgrf_status lkgrf_run_clt(const lkgrf_config* config, const char* out_dir, unsigned threads,
                                     char** report);
LKGRF_API lkgrf_status lkgrf_run_chaos(const lkgrf_config* config, const char* out_dir, int q_max,
                                       unsigned threads, char** report);
LKGRF_API lkgrf_status lkgrf_run_variance(const lkgrf_config* config, const char* out_dir, unsigned threads,
                                          char** report);
LKGRF_API lkgrf_status lkgrf_run_rice_check(const lkgrf_config* config, char** report);
LKGRF_API lkgrf_status lkgrf_simulate(const lkgrf_config* config, const char* out_dir, char** report);

/* Numeric entry points. */
LKGRF_API lkgrf_status lkgrf_flag_coefficient(int d, int k, double* out);
LKGRF_API lkgrf_status lkgrf_lower_bound(int d, int m, double u, double f0, double* out);
LKGRF_API lkgrf_status lkgrf_det_rank_one(double c1, double c2, const double* v, int dim, double* out);
/* r is D x D row-major with r[i*D+j] = E[V_i W_j]. */
LKGRF_API lkgrf_status lkgrf_mehler_expectation(int D, const int* n, const int* n_prime, const double* r,
                                                double* out);
/* c(n) for the Gaussian-covariance jet of (d, m) at level u. */
LKGRF_API lkgrf_status lkgrf_chaos_coefficient(int d, int m, double u, const int* n, int D, double* value,
                                               double* std_error);

#ifdef __cplusplus
}
#endif

#endif /* LKGRF_H */
