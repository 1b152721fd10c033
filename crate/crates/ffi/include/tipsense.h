#ifndef TIPSENSE_H
#define TIPSENSE_H

/* Generated by cbindgen from src/lib.rs. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum ts_status {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  TS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The collision never released within the search horizon.
   */
  TS_STATUS_NO_RELEASE = 3,
  TS_STATUS_IO = 4,
  TS_STATUS_PARSE = 5,
  /**
   * A signal was constant or the geometry was singular.
   */
  TS_STATUS_DEGENERATE = 6,
  TS_STATUS_PANIC = 7,
} ts_status;

/**
 * Opaque estimator handle.
 */
typedef struct ts_model ts_model;

/**
 * Collision parameters. `control_sign` is -1 (retract) or +1 (press).
 */
typedef struct ts_collision_params {
  double m_f;
  double m_r;
  double k;
  double v0;
  double t_l;
  double f_in;
  int32_t control_sign;
} ts_collision_params;

typedef struct ts_collision_result {
  double t_f;
  double total_impulse;
  double natural_impulse;
  double eta;
} ts_collision_result;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ts_last_error_message(void);

/**
 * Impulse ratio of one collision.
 *
 * # Safety
 * `params` and `out` must be valid pointers or null.
 */
enum ts_status ts_collision_eta(const struct ts_collision_params *params,
                                struct ts_collision_result *out);

/**
 * Contact frame in the sensor base frame: row-major rotation and translation.
 *
 * # Safety
 * `rotation` must point to 9 doubles and `translation` to 3, or be null.
 */
enum ts_status ts_contact_transform(double theta,
                                    double phi,
                                    double r_sensor,
                                    double *rotation,
                                    double *translation);

/**
 * Contact angles of a point on the sensor sphere.
 *
 * # Safety
 * `point` must point to 3 doubles; `theta` and `phi` must be writable.
 */
enum ts_status ts_angles_from_point(const double *point,
                                    double r_sensor,
                                    double *theta,
                                    double *phi);

/**
 * Load a model file. On success `*out` owns a handle to release with
 * [`ts_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ts_status ts_model_load(const char *path, struct ts_model **out);

/**
 * Run the estimator: 8 pressures in, `[fx, fy, fz, theta, phi]` out.
 *
 * # Safety
 * `model` must come from [`ts_model_load`]; `input` holds 8 doubles and
 * `output` room for 5.
 */
enum ts_status ts_model_forward(const struct ts_model *model, const double *input, double *output);

/**
 * Release a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`ts_model_load`] and not be used afterwards.
 */
void ts_model_free(struct ts_model *model);

/**
 * Delay of `measured` behind `truth` (s), both sampled at `rate_hz` from t = 0.
 *
 * # Safety
 * The arrays must hold `n_truth` and `n_measured` doubles; `latency_s` must be writable.
 */
enum ts_status ts_estimate_latency(const double *truth,
                                   size_t n_truth,
                                   const double *measured,
                                   size_t n_measured,
                                   double rate_hz,
                                   double max_lag_s,
                                   double *latency_s);

/**
 * Zero-phase moving average of `n` samples with an odd `window` into `out`.
 *
 * # Safety
 * `x` and `out` must each hold `n` doubles.
 */
enum ts_status ts_zero_phase_moving_average(const double *x, size_t n, size_t window, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TIPSENSE_H */
