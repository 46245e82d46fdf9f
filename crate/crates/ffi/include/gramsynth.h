#ifndef GRAMSYNTH_H
#define GRAMSYNTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsMapKind {
  GS_MAP_KIND_GENERAL = 0,
  GS_MAP_KIND_MINIMUM_ENERGY = 1,
} GsMapKind;

/**
 * Result code of every fallible call.
 */
typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_ARGUMENT = 2,
  GS_STATUS_INVALID_CONFIG = 3,
  GS_STATUS_UNKNOWN_SYSTEM = 4,
  GS_STATUS_SINGULAR_GRAMIAN = 5,
  GS_STATUS_DIVERGED = 6,
  GS_STATUS_NOT_FULLY_ACTUATED = 7,
  GS_STATUS_SOLVER_FAILURE = 8,
  GS_STATUS_NON_FINITE = 9,
  GS_STATUS_IO = 10,
  GS_STATUS_OUT_OF_RANGE = 11,
  GS_STATUS_PANIC = 12,
} GsStatus;

typedef enum GsTermination {
  GS_TERMINATION_ENDPOINT_TOLERANCE = 0,
  GS_TERMINATION_FIXED_POINT_TOLERANCE = 1,
  GS_TERMINATION_MAX_ITERATIONS = 2,
  GS_TERMINATION_DIVERGED = 3,
} GsTermination;

/**
 * Experiment configuration.
 */
typedef struct GsConfig GsConfig;

/**
 * Finished Picard run.
 */
typedef struct GsRun GsRun;

/**
 * Telemetry of one Picard pass.
 */
typedef struct GsIterationRecord {
  size_t n;
  double err_end;
  double err_fp;
  double energy;
  double energy_sq_norm;
  double gramian_condition;
  double wall_time;
} GsIterationRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *gs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

/**
 * Default configuration (unicycle, general map).
 */
struct GsConfig *gs_config_new(void);

/**
 * Parse a TOML experiment config.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GsStatus gs_config_from_toml(const char *toml, struct GsConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void gs_config_free(struct GsConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live config and `name` a NUL-terminated string.
 */
enum GsStatus gs_config_set_system(struct GsConfig *cfg, const char *name);

/**
 * # Safety
 * `cfg` must be a live config.
 */
enum GsStatus gs_config_set_map_kind(struct GsConfig *cfg, enum GsMapKind kind);

/**
 * # Safety
 * `cfg` must be a live config.
 */
enum GsStatus gs_config_set_max_iterations(struct GsConfig *cfg, size_t n);

/**
 * Endpoint and fixed-point tolerances.
 *
 * # Safety
 * `cfg` must be a live config.
 */
enum GsStatus gs_config_set_tolerances(struct GsConfig *cfg, double eps_x, double eps_u);

/**
 * Odd Simpson node count `K >= 3`; 0 restores the dimension-based default.
 *
 * # Safety
 * `cfg` must be a live config.
 */
enum GsStatus gs_config_set_quadrature_points(struct GsConfig *cfg, size_t k);

/**
 * # Safety
 * `cfg` must be a live config.
 */
enum GsStatus gs_config_set_seed(struct GsConfig *cfg, uint64_t seed);

/**
 * Run the configured Picard iteration. Divergence is reported through the
 * run's termination, not as an error.
 *
 * # Safety
 * `cfg` must be a live config and `out` a valid pointer.
 */
enum GsStatus gs_run_synthesis(const struct GsConfig *cfg, struct GsRun **out);

/**
 * # Safety
 * `run` must come from this library and not be used afterwards.
 */
void gs_run_free(struct GsRun *run);

/**
 * # Safety
 * `run` must be a live run and `out` a valid pointer.
 */
enum GsStatus gs_run_termination(const struct GsRun *run, enum GsTermination *out);

/**
 * Number of telemetry records, 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live run.
 */
size_t gs_run_record_count(const struct GsRun *run);

/**
 * # Safety
 * `run` must be a live run and `out` a valid pointer.
 */
enum GsStatus gs_run_record(const struct GsRun *run, size_t index, struct GsIterationRecord *out);

/**
 * State and input dimensions of the steered system.
 *
 * # Safety
 * `run` must be a live run; `d` and `k` valid pointers.
 */
enum GsStatus gs_run_dims(const struct GsRun *run, size_t *d, size_t *k);

/**
 * `1/2 y^T lambda`; `OutOfRange` when the run used the minimum-energy map.
 *
 * # Safety
 * `run` must be a live run and `out` a valid pointer.
 */
enum GsStatus gs_run_certificate(const struct GsRun *run, double *out);

/**
 * Write `u(t)` (length `k`) into `out`.
 *
 * # Safety
 * `run` must be a live run and `out` must hold `len` doubles.
 */
enum GsStatus gs_run_eval_control(const struct GsRun *run, double t, double *out, size_t len);

/**
 * Write `x_u(t)` (length `d`) into `out`.
 *
 * # Safety
 * `run` must be a live run and `out` must hold `len` doubles.
 */
enum GsStatus gs_run_eval_state(const struct GsRun *run, double t, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAMSYNTH_H */
