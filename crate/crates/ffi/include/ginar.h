#ifndef GINAR_H
#define GINAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GinarFamily {
  GINAR_FAMILY_PO_INAR = 0,
  GINAR_FAMILY_NB_INAR = 1,
  GINAR_FAMILY_GEOM_INAR = 2,
} GinarFamily;

typedef enum GinarMethod {
  GINAR_METHOD_CML = 0,
  GINAR_METHOD_YULE_WALKER = 1,
  GINAR_METHOD_CLS = 2,
  GINAR_METHOD_PSEUDO = 3,
  GINAR_METHOD_WHITTLE = 4,
  GINAR_METHOD_SADDLEPOINT = 5,
} GinarMethod;

typedef enum GinarStatus {
  GINAR_STATUS_OK = 0,
  GINAR_STATUS_NULL_POINTER = 1,
  GINAR_STATUS_INVALID_ARGUMENT = 2,
  GINAR_STATUS_UNSUPPORTED = 3,
  GINAR_STATUS_DATA_ERROR = 4,
  GINAR_STATUS_NUMERICAL_ERROR = 5,
  GINAR_STATUS_BUFFER_TOO_SMALL = 6,
  GINAR_STATUS_PANIC = 7,
} GinarStatus;

typedef enum GinarTransition {
  GINAR_TRANSITION_DAVIES = 0,
  GINAR_TRANSITION_EXACT = 1,
} GinarTransition;

/**
 * Opaque fit handle.
 */
typedef struct GinarFitHandle GinarFitHandle;

/**
 * Opaque model handle.
 */
typedef struct GinarModelHandle GinarModelHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ginar_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ginar_version(void);

/**
 * Builds a model. `r` is read only for `NbInar`.
 *
 * # Safety
 * `alphas` must point to `p` values and `out` must be writable.
 */
enum GinarStatus ginar_model_new(enum GinarFamily family,
                                 const double *alphas,
                                 size_t p,
                                 double mu,
                                 double r,
                                 struct GinarModelHandle **out);

/**
 * # Safety
 * `model` must come from [`ginar_model_new`] or [`ginar_fit_model`] and not be used afterwards.
 */
void ginar_model_free(struct GinarModelHandle *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GinarStatus ginar_model_order(const struct GinarModelHandle *model, size_t *out);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GinarStatus ginar_model_marginal_mean(const struct GinarModelHandle *model, double *out);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GinarStatus ginar_model_marginal_variance(const struct GinarModelHandle *model, double *out);

/**
 * Writes `n` simulated counts into `out`.
 *
 * # Safety
 * `model` must be a live handle and `out` must have room for `n` values.
 */
enum GinarStatus ginar_model_simulate(const struct GinarModelHandle *model,
                                      size_t n,
                                      size_t burnin,
                                      uint64_t seed,
                                      uint64_t *out);

/**
 * `P(X_t = x | lags)` with `lags` newest first.
 *
 * # Safety
 * `model` must be a live handle, `lags` must point to `p` values and `out` be writable.
 */
enum GinarStatus ginar_transition_prob(const struct GinarModelHandle *model,
                                       uint64_t x,
                                       const uint64_t *lags,
                                       size_t p,
                                       enum GinarTransition method,
                                       double *out);

/**
 * Conditional-mean forecasts for horizons `1..=h` from a chronological history.
 *
 * # Safety
 * `model` must be a live handle, `history` must point to `len` values and
 * `out` must have room for `h` values.
 */
enum GinarStatus ginar_forecast_mean(const struct GinarModelHandle *model,
                                     const uint64_t *history,
                                     size_t len,
                                     size_t h,
                                     double *out);

/**
 * Fits a stationary model of order `p` with default options.
 *
 * # Safety
 * `series` must point to `n` values and `out` must be writable.
 */
enum GinarStatus ginar_fit(const uint64_t *series,
                           size_t n,
                           enum GinarFamily family,
                           size_t p,
                           enum GinarMethod method,
                           struct GinarFitHandle **out);

/**
 * # Safety
 * `fit` must come from [`ginar_fit`] and not be used afterwards.
 */
void ginar_fit_free(struct GinarFitHandle *fit);

/**
 * Number of estimated parameters (`alpha1..alphap, mu_eps[, r]`).
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum GinarStatus ginar_fit_num_params(const struct GinarFitHandle *fit, size_t *out);

/**
 * Copies the estimates into `out`, which must hold at least
 * [`ginar_fit_num_params`] values.
 *
 * # Safety
 * `fit` must be a live handle and `out` must have room for `len` values.
 */
enum GinarStatus ginar_fit_params(const struct GinarFitHandle *fit, double *out, size_t len);

/**
 * Objective at the estimate: the log-likelihood for likelihood methods.
 * Fails with `DataError` for Yule-Walker, which has none.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum GinarStatus ginar_fit_objective(const struct GinarFitHandle *fit, double *out);

/**
 * The fitted model (projected into the parameter space if needed) as a new handle.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum GinarStatus ginar_fit_model(const struct GinarFitHandle *fit, struct GinarModelHandle **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GINAR_H */
