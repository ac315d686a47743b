#ifndef STRATLEARN_H
#define STRATLEARN_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_IO = 3,
  SL_STATUS_PARSE = 4,
  SL_STATUS_NOT_OPTIMAL = 5,
  SL_STATUS_RUNTIME = 6,
  SL_STATUS_PANIC = 7,
} SlStatus;

/**
 * Parsed MILP instance.
 */
typedef struct SlInstance SlInstance;

/**
 * Pruned strategy library with its parameter coordinates.
 */
typedef struct SlLibrary SlLibrary;

/**
 * Trained reward model.
 */
typedef struct SlModel SlModel;

typedef struct SlSolveResult {
  double objective;
  /**
   * Infeasibility of the returned point.
   */
  double p;
  size_t strategy_index;
  /**
   * 1 when no candidate reduced problem was feasible.
   */
  int32_t all_infeasible;
  double time_ms;
} SlSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *sl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sl_version(void);

/**
 * Parses and validates an MPS document.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum SlStatus sl_instance_from_mps(const char *text, struct SlInstance **out);

/**
 * # Safety
 * `inst` must come from `sl_instance_from_mps` or be null.
 */
void sl_instance_free(struct SlInstance *inst);

/**
 * # Safety
 * `inst` must be a live handle; `n` and `m` must be writable.
 */
enum SlStatus sl_instance_dims(const struct SlInstance *inst, size_t *n, size_t *m);

/**
 * Solves the full instance by branch-and-bound with default settings.
 * Writes the optimal objective and, when `x` is non-null, the point (`x_cap >= n`).
 *
 * # Safety
 * `inst` must be a live handle; `objective` must be writable; `x` must hold `x_cap` values.
 */
enum SlStatus sl_solve_full(const struct SlInstance *inst,
                            double *objective,
                            double *x,
                            size_t x_cap);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SlStatus sl_model_load(const char *path, struct SlModel **out);

/**
 * # Safety
 * `model` must come from `sl_model_load` or be null.
 */
void sl_model_free(struct SlModel *model);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SlStatus sl_library_load(const char *path, struct SlLibrary **out);

/**
 * # Safety
 * `lib` must come from `sl_library_load` or be null.
 */
void sl_library_free(struct SlLibrary *lib);

/**
 * Number of strategies in the library.
 *
 * # Safety
 * `lib` must be a live handle; `len` must be writable.
 */
enum SlStatus sl_library_len(const struct SlLibrary *lib, size_t *len);

/**
 * Predicted reward of every library strategy for parameter `theta`.
 *
 * # Safety
 * Handles must be live; `theta` holds `theta_len` values; `scores` holds `scores_cap` values.
 */
enum SlStatus sl_predict(const struct SlModel *model,
                         const struct SlLibrary *lib,
                         const double *theta,
                         size_t theta_len,
                         double *scores,
                         size_t scores_cap);

/**
 * Solves `inst` through the top-`k` predicted strategies. The parameter is
 * read from the instance at the library's coordinates. When `x` is non-null
 * the point is written there (`x_cap >= n`).
 *
 * # Safety
 * Handles must be live; `result` must be writable; `x` must hold `x_cap` values.
 */
enum SlStatus sl_fast_solve(const struct SlModel *model,
                            const struct SlLibrary *lib,
                            const struct SlInstance *inst,
                            size_t k,
                            struct SlSolveResult *result,
                            double *x,
                            size_t x_cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRATLEARN_H */
