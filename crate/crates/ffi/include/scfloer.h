#ifndef SCFLOER_H
#define SCFLOER_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScfStatus {
  SCF_STATUS_OK = 0,
  SCF_STATUS_NULL_POINTER = 1,
  SCF_STATUS_INVALID_STRING = 2,
  SCF_STATUS_CONFIG = 3,
  SCF_STATUS_INVALID_ARGUMENT = 4,
  SCF_STATUS_NUMERICAL = 5,
  SCF_STATUS_IO = 6,
  SCF_STATUS_BUFFER_TOO_SMALL = 7,
  SCF_STATUS_PANIC = 8,
} ScfStatus;

typedef struct ScfConfig ScfConfig;

typedef struct ScfReport ScfReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message (NUL-terminated, possibly truncated)
 * into `buf` and returns the full length including the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t scf_last_error(char *buf, size_t len);

/**
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum ScfStatus scf_config_default(struct ScfConfig **out);

/**
 * Configuration reproducing acceptance criterion `n` (1 to 10).
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum ScfStatus scf_config_preset(uint32_t n, struct ScfConfig **out);

/**
 * Parses and validates a TOML config.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writing a pointer.
 */
enum ScfStatus scf_config_from_toml(const char *text, struct ScfConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum ScfStatus scf_config_set_seed(struct ScfConfig *cfg, uint64_t seed);

/**
 * Writes the canonical TOML serialization.
 *
 * # Safety
 * `cfg` must be a live handle, `buf` null or valid for `len` bytes, `needed` null or writable.
 */
enum ScfStatus scf_config_to_toml(const struct ScfConfig *cfg,
                                  char *buf,
                                  size_t len,
                                  size_t *needed);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void scf_config_free(struct ScfConfig *cfg);

/**
 * Process exit code the runner uses when the named suite fails, or -1 for an unknown name.
 *
 * # Safety
 * `suite` must be null or a NUL-terminated string.
 */
int32_t scf_suite_exit_code(const char *suite);

/**
 * Runs one verification suite (by its subcommand name, e.g. "glue-identities").
 * A suite whose criteria fail still returns `Ok`; query the report.
 *
 * # Safety
 * `cfg` must be a live handle, `suite` NUL-terminated, `out` valid for writing a pointer.
 */
enum ScfStatus scf_run_suite(const struct ScfConfig *cfg,
                             const char *suite,
                             struct ScfReport **out);

/**
 * # Safety
 * `rep` must be a live handle.
 */
bool scf_report_passed(const struct ScfReport *rep);

/**
 * # Safety
 * `rep` must be a live handle.
 */
size_t scf_report_criterion_count(const struct ScfReport *rep);

/**
 * Acceptance criterion number and verdict of the `i`-th line of a report.
 *
 * # Safety
 * `rep` must be a live handle; `id` and `pass` writable.
 */
enum ScfStatus scf_report_criterion(const struct ScfReport *rep,
                                    size_t i,
                                    uint32_t *id,
                                    bool *pass);

/**
 * Summary lines joined by newlines.
 *
 * # Safety
 * `rep` must be a live handle, `buf` null or valid for `len` bytes, `needed` null or writable.
 */
enum ScfStatus scf_report_summary(const struct ScfReport *rep,
                                  char *buf,
                                  size_t len,
                                  size_t *needed);

/**
 * Writes the CSV/JSON artifacts of a report into `dir`.
 *
 * # Safety
 * Handles must be live and `dir` NUL-terminated.
 */
enum ScfStatus scf_report_write(const struct ScfReport *rep,
                                const struct ScfConfig *cfg,
                                const char *dir);

/**
 * # Safety
 * `rep` must be null or a handle not yet freed.
 */
void scf_report_free(struct ScfReport *rep);

/**
 * Kernel and cokernel dimensions and index of d/dt on periodic functions sampled at `n_t`
 * points, as an operator between levels `level + 1` and `level`.
 *
 * # Safety
 * Output pointers must be writable.
 */
enum ScfStatus scf_ddt_index(size_t n_t,
                             size_t level,
                             size_t *dim_ker,
                             size_t *dim_coker,
                             int64_t *index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCFLOER_H */
