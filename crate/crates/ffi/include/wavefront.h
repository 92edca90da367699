#ifndef WAVEFRONT_H
#define WAVEFRONT_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WfStatus {
  WF_STATUS_OK = 0,
  WF_STATUS_NULL_POINTER = 1,
  WF_STATUS_INVALID_ARGUMENT = 2,
  WF_STATUS_DOMAIN = 3,
  WF_STATUS_RANGE = 4,
  WF_STATUS_RUNTIME = 5,
  WF_STATUS_PANIC = 6,
} WfStatus;

/**
 * Branch of the dispersion relation.
 */
typedef enum WfSide {
  WF_SIDE_PLUS = 0,
  WF_SIDE_MINUS = 1,
} WfSide;

/**
 * Which side of a profile a level crossing is searched from.
 */
typedef enum WfFrontSide {
  WF_FRONT_SIDE_RIGHTMOST = 0,
  WF_FRONT_SIDE_LEFTMOST = 1,
} WfFrontSide;

/**
 * The recorded frames of one simulation.
 */
typedef struct WfRun WfRun;

/**
 * A parsed scenario file.
 */
typedef struct WfScenario WfScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *wf_last_error(void);

/**
 * Spreading speed of the local KPP delay equation, `2 sqrt(mu d (f'(0) - 1))`,
 * zero when `f'(0) <= 1`.
 */
enum WfStatus wf_kpp_local_speed(double d, double mu, double fprime0, double *speed);

/**
 * `2 sqrt(d h'(0))`.
 */
enum WfStatus wf_kpp_rd_speed(double d, double hprime0, double *speed);

/**
 * `inf_rho ln l(c, rho) / rho` for a Gaussian kernel of width `alpha`
 * (`alpha = 0` selects the point mass). `argmin_rho` may be null.
 */
enum WfStatus wf_dispersion_speed(double d,
                                  double mu,
                                  double tau,
                                  double fprime0,
                                  double alpha,
                                  double c,
                                  enum WfSide branch,
                                  double *speed,
                                  double *argmin_rho);

/**
 * Minimal wave speed from both branches. `c_star_dual` may be null.
 */
enum WfStatus wf_min_wave_speed(double d,
                                double mu,
                                double tau,
                                double fprime0,
                                double alpha,
                                double *c_star,
                                double *c_star_dual);

/**
 * Parses a scenario document. Schema errors report `WF_STATUS_INVALID_ARGUMENT`
 * with the JSON pointer in the message.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string.
 */
enum WfStatus wf_scenario_from_json(const char *json, struct WfScenario **scenario);

/**
 * # Safety
 * `scenario` must be null or come from [`wf_scenario_from_json`], freed once.
 */
void wf_scenario_free(struct WfScenario *scenario);

/**
 * Runs the scenario's `initial` and `run` sections. Tabulated initial data is
 * read relative to the working directory.
 *
 * # Safety
 * `scenario` must be null or a live scenario handle.
 */
enum WfStatus wf_scenario_simulate(const struct WfScenario *scenario, struct WfRun **run);

/**
 * # Safety
 * `run` must be null or come from [`wf_scenario_simulate`], freed once.
 */
void wf_run_free(struct WfRun *run);

/**
 * Number of recorded frames, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live run handle.
 */
size_t wf_run_frame_count(const struct WfRun *run);

/**
 * Number of grid points per frame, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live run handle.
 */
size_t wf_run_grid_len(const struct WfRun *run);

/**
 * Time of frame `k`.
 *
 * # Safety
 * `run` must be null or a live run handle; `t` null or writable.
 */
enum WfStatus wf_run_time(const struct WfRun *run, size_t k, double *t);

/**
 * Copies the grid abscissae into `xs`, which must hold `len` values with
 * `len` equal to [`wf_run_grid_len`].
 *
 * # Safety
 * `run` must be null or a live run handle; `xs` null or valid for `len` writes.
 */
enum WfStatus wf_run_grid(const struct WfRun *run, double *xs, size_t len);

/**
 * Copies frame `k` into `values`, which must hold `len` values with `len`
 * equal to [`wf_run_grid_len`].
 *
 * # Safety
 * `run` must be null or a live run handle; `values` null or valid for `len` writes.
 */
enum WfStatus wf_run_frame(const struct WfRun *run, size_t k, double *values, size_t len);

/**
 * Smallest and largest state value seen over every step of the run.
 *
 * # Safety
 * `run` must be null or a live run handle; outputs null or writable.
 */
enum WfStatus wf_run_extremes(const struct WfRun *run, double *min, double *max);

/**
 * Level-crossing position of samples `values[i]` at `x_min + i dx`. Writes
 * NaN when no sample reaches `level`.
 *
 * # Safety
 * `values` must be null or valid for `len` reads; `x` null or writable.
 */
enum WfStatus wf_level_position(const double *values,
                                size_t len,
                                double x_min,
                                double dx,
                                double level,
                                enum WfFrontSide side,
                                double *x);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVEFRONT_H */
