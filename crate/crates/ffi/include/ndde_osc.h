/* C interface to the ndde-osc oscillation analyzer. */

#ifndef NDDE_OSC_H
#define NDDE_OSC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of one interface call. The first three values mirror the
 * command line's exit statuses.
 */
typedef enum {
  /**
   * The call completed.
   */
  NDDE_STATUS_OK = 0,
  /**
   * The input was rejected before any numerics ran.
   */
  NDDE_STATUS_VALIDATION = 1,
  /**
   * A numerical procedure failed.
   */
  NDDE_STATUS_NUMERICAL = 2,
  /**
   * A required pointer argument was null.
   */
  NDDE_STATUS_NULL_ARGUMENT = 3,
  /**
   * A panic was contained at the language boundary.
   */
  NDDE_STATUS_INTERNAL = 4,
} NddeStatus;

/**
 * An equation together with its analysis policy, parsed and validated
 * once, then reused across calls. Opaque to C.
 */
typedef struct NddeProblemHandle NddeProblemHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a run configuration (the same JSON the command line reads) and
 * builds the validated problem behind an opaque handle.
 *
 * On success writes the handle to `out_problem` and returns `OK`. The
 * handle must be released with `ndde_problem_free`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out_problem` a valid
 * pointer to write one pointer through.
 */
NddeStatus ndde_problem_from_json(const char *config_json, NddeProblemHandle **out_problem);

/**
 * Evaluates every criterion and writes the analysis report as a JSON
 * string (schema `ndde-osc-report/1`, `simulation` null).
 *
 * # Safety
 * `problem` must be a live handle from `ndde_problem_from_json` and
 * `out_report` a valid pointer to write one pointer through.
 */
NddeStatus ndde_analyze_to_json(const NddeProblemHandle *problem, char **out_report);

/**
 * Integrates the equation per the configuration's `simulate` section and
 * writes the trajectory samples (`t x z`, one node per line).
 *
 * # Safety
 * `problem` must be a live handle from `ndde_problem_from_json` and
 * `out_text` a valid pointer to write one pointer through.
 */
NddeStatus ndde_simulate_to_text(const NddeProblemHandle *problem, char **out_text);

/**
 * Parses an expression in `t` and evaluates it at one point.
 *
 * # Safety
 * `expr_text` must be a NUL-terminated string and `out_value` a valid
 * pointer to write one double through.
 */
NddeStatus ndde_expr_eval(const char *expr_text, double t, double *out_value);

/**
 * The error message of this thread's most recent failing call, or null
 * when the last call succeeded. The pointer stays valid until the next
 * failing call on the same thread; do not free it.
 */
const char *ndde_last_error(void);

/**
 * Releases a string returned through an out-pointer. Null is ignored.
 *
 * # Safety
 * `text` must be null or a live pointer from this library, not yet freed.
 */
void ndde_string_free(char *text);

/**
 * Releases a problem handle. Null is ignored.
 *
 * # Safety
 * `problem` must be null or a live handle from `ndde_problem_from_json`,
 * not yet freed.
 */
void ndde_problem_free(NddeProblemHandle *problem);

/**
 * The library version as a static string; do not free it.
 */
const char *ndde_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NDDE_OSC_H */
