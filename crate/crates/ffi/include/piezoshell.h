#ifndef PIEZOSHELL_H
#define PIEZOSHELL_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  /**
   * Invalid configuration, geometry, material or shape.
   */
  PS_STATUS_INVALID_INPUT = 2,
  /**
   * Singular or inaccurate solve, or missing boundary conditions.
   */
  PS_STATUS_SOLVER_FAILURE = 3,
  PS_STATUS_IO = 4,
  PS_STATUS_INTERNAL = 5,
  PS_STATUS_PANIC = 6,
  PS_STATUS_INVALID_UTF8 = 7,
} PsStatus;

typedef enum PsCommand {
  PS_COMMAND_CELL = 0,
  PS_COMMAND_HOMOGENIZE = 1,
  PS_COMMAND_MACRO = 2,
  PS_COMMAND_VALIDATE = 3,
} PsCommand;

/**
 * Parsed and validated run configuration.
 */
typedef struct PsConfig PsConfig;

/**
 * Homogenized tensors of one cell computation.
 */
typedef struct PsTensors PsTensors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next failing
 * call on the same thread.
 */
const char *ps_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *ps_version(void);

/**
 * Parse and validate a JSON configuration; on success `*out` owns a new handle.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum PsStatus ps_config_from_json(const char *json, struct PsConfig **out);

/**
 * # Safety
 * `config` must be null or a handle from [`ps_config_from_json`] not yet freed.
 */
void ps_config_free(struct PsConfig *config);

/**
 * Run a CLI pipeline, writing its artifacts into `out_dir`.
 *
 * # Safety
 * `config` must be a live handle and `out_dir` a nul-terminated path.
 */
enum PsStatus ps_run_command(const struct PsConfig *config,
                             enum PsCommand command,
                             const char *out_dir);

/**
 * Solve all cell problems and evaluate the homogenized tensors.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum PsStatus ps_homogenize(const struct PsConfig *config, struct PsTensors **out);

/**
 * # Safety
 * `tensors` must be null or a handle from [`ps_homogenize`] not yet freed.
 */
void ps_tensors_free(struct PsTensors *tensors);

/**
 * Membrane elasticity in row-major Voigt form (9 values).
 *
 * # Safety
 * `tensors` must be a live handle and `out` point to 9 writable doubles.
 */
enum PsStatus ps_tensors_cbar(const struct PsTensors *tensors, double *out);

/**
 * Piezoelectric coupling, 2×3 row-major Voigt form (6 values).
 *
 * # Safety
 * `tensors` must be a live handle and `out` point to 6 writable doubles.
 */
enum PsStatus ps_tensors_ebar(const struct PsTensors *tensors, double *out);

/**
 * Dielectric tensor, 2×2 row-major (4 values).
 *
 * # Safety
 * `tensors` must be a live handle and `out` point to 4 writable doubles.
 */
enum PsStatus ps_tensors_dbar(const struct PsTensors *tensors, double *out);

/**
 * Bending stiffness in row-major Voigt form (9 values).
 *
 * # Safety
 * `tensors` must be a live handle and `out` point to 9 writable doubles.
 */
enum PsStatus ps_tensors_bending(const struct PsTensors *tensors, double *out);

/**
 * `|Y*|_a`, followed by the minimum eigenvalues of c̄, d̄ and C̄ (4 values).
 *
 * # Safety
 * `tensors` must be a live handle and `out` point to 4 writable doubles.
 */
enum PsStatus ps_tensors_measures(const struct PsTensors *tensors, double *out);

/**
 * Relative discrepancies between the two computation routes: c̄, d̄, C̄ direct vs
 * energy, ē vs f̄, and the asymmetries of the energy-route c̄ and C̄ (6 values).
 *
 * # Safety
 * `tensors` must be a live handle and `out` point to 6 writable doubles.
 */
enum PsStatus ps_tensors_discrepancies(const struct PsTensors *tensors, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIEZOSHELL_H */
