/* C API for the logsde shared library.
 *
 * Simulation and verification toolkit for SDEs with log-Lipschitz
 * coefficients: coefficient fields, Euler schemes, rate-functional
 * minimization and manifest-driven experiments. Handles are opaque; every
 * function returns a status code and writes results through out-parameters.
 * Strings returned through char** are heap-allocated and must be released
 * with logsde_string_free.
 */

#ifndef LOGSDE_H
#define LOGSDE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LOGSDE_API __declspec(dllexport)
#else
#define LOGSDE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum logsde_status {
  LOGSDE_OK = 0,
  LOGSDE_INVALID_ARGUMENT = 2, /* bad input, schema violation, unknown key */
  LOGSDE_NUMERICAL_ERROR = 3,  /* overflow, divergence, infeasible solve */
  LOGSDE_INTERNAL_ERROR = 4
} logsde_status;

typedef struct logsde_field logsde_field; /* opaque coefficient field */

LOGSDE_API const char* logsde_version(void);
LOGSDE_API const char* logsde_status_name(logsde_status s);
LOGSDE_API void logsde_string_free(char* s);

/* Field construction from a config key ("constant", "linear", "sine_series",
 * "log_growth", "log_sq_growth", "truncated:<base>:<R>") and a JSON parameter
 * object (may be NULL or empty). */
LOGSDE_API logsde_status logsde_field_create(const char* key, const char* params_json,
                                             logsde_field** out, char** error_out);
LOGSDE_API void logsde_field_destroy(logsde_field* field);
LOGSDE_API logsde_status logsde_field_dims(const logsde_field* field, int32_t* dim_state,
                                           int32_t* dim_noise);

/* Evaluates drift (dim_state) and row-major diffusion (dim_state*dim_noise)
 * at x. Either output pointer may be NULL to skip it. */
LOGSDE_API logsde_status logsde_field_eval(const logsde_field* field, const double* x,
                                           size_t x_len, double* drift_out,
                                           double* diffusion_out, char** error_out);

/* Runs a manifest (JSON text) and writes result files under out_dir.
 * threads caps worker parallelism without affecting results; dry_run != 0
 * validates without computing. On failure returns the mapped status and, if
 * diag_json_out is non-NULL, a JSON diagnostic {"error": ..., "kind": ...}.
 * On success files_json_out (if non-NULL) receives a JSON array of the file
 * names written. */
LOGSDE_API logsde_status logsde_run_manifest(const char* manifest_json, const char* out_dir,
                                             int32_t threads, int32_t dry_run,
                                             char** files_json_out, char** diag_json_out);

/* Digest of the canonical manifest serialization, as embedded in result
 * files ("# manifest_digest=<hex>"). */
LOGSDE_API logsde_status logsde_manifest_digest(const char* manifest_json, char** digest_out,
                                                char** error_out);

/* Experiment kind named by a manifest (validates it first). */
LOGSDE_API logsde_status logsde_manifest_experiment(const char* manifest_json,
                                                    char** experiment_out, char** error_out);

#ifdef __cplusplus
}
#endif

#endif /* LOGSDE_H */
