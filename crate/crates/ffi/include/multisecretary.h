/* Generated by cbindgen; do not edit. */

#ifndef MULTISECRETARY_H
#define MULTISECRETARY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_DOMAIN = 3,
  MS_STATUS_CONFIG = 4,
  MS_STATUS_UNSUPPORTED_MODEL = 5,
  MS_STATUS_SIZE = 6,
  MS_STATUS_FIT = 7,
  MS_STATUS_PARSE = 8,
  MS_STATUS_IO = 9,
  MS_STATUS_PANIC = 10,
} MsStatus;

typedef enum MsPolicy {
  MS_POLICY_CE = 0,
  MS_POLICY_CWG = 1,
  MS_POLICY_STATIC = 2,
  MS_POLICY_OFFLINE = 3,
} MsPolicy;

/**
 * A type distribution with its gap structure.
 */
typedef struct MsModel MsModel;

/**
 * The record of one policy run on one path.
 */
typedef struct MsTrace MsTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ms_last_error_message(void);

/**
 * Parses a distribution preset such as `fbeta:beta=1` or
 * `discrete:support=0.25,0.5,0.75;mass=0.4,0.2,0.4`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum MsStatus ms_model_parse(const char *spec, struct MsModel **out);

/**
 * # Safety
 * `model` must come from [`ms_model_parse`] and not be used afterwards.
 */
void ms_model_free(struct MsModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_model_cdf(const struct MsModel *model, double x, double *out);

/**
 * Generalized inverse `inf{x : F(x) >= q}`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_model_quantile(const struct MsModel *model, double q, double *out);

/**
 * Number of interior gap quantiles of the model.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_model_gap_count(const struct MsModel *model, size_t *out);

/**
 * Runs `policy` (an [`MsPolicy`] code) on the path given by `len`
 * uniforms in `(0, 1)`.
 *
 * # Safety
 * `uniforms` must point to `len` doubles; `model` must be live; `out`
 * must be writable.
 */
enum MsStatus ms_policy_run(const struct MsModel *model,
                            int32_t policy,
                            const double *uniforms,
                            size_t len,
                            size_t budget,
                            struct MsTrace **out);

/**
 * # Safety
 * `trace` must come from [`ms_policy_run`] and not be used afterwards.
 */
void ms_trace_free(struct MsTrace *trace);

/**
 * Horizon of the trace, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t ms_trace_horizon(const struct MsTrace *trace);

/**
 * Total value of the hired candidates.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum MsStatus ms_trace_value(const struct MsTrace *trace, double *out);

/**
 * Copies hire decisions (1 = hire) into `buf`, which must hold exactly
 * the horizon.
 *
 * # Safety
 * `buf` must point to `len` writable bytes.
 */
enum MsStatus ms_trace_decisions(const struct MsTrace *trace, uint8_t *buf, size_t len);

/**
 * Copies the applied threshold quantiles into `buf` (length = horizon).
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum MsStatus ms_trace_thresholds(const struct MsTrace *trace, double *buf, size_t len);

/**
 * Hindsight value of the path and its `(q_l, q_u)` quantiles. Any of the
 * three out-pointers may be null.
 *
 * # Safety
 * `uniforms` must point to `len` doubles; `model` must be live.
 */
enum MsStatus ms_offline_value(const struct MsModel *model,
                               const double *uniforms,
                               size_t len,
                               size_t budget,
                               double *value,
                               double *q_l,
                               double *q_u);

/**
 * `offline - (online + compensations)` for `policy` on the given path.
 *
 * # Safety
 * `uniforms` must point to `len` doubles; `model` must be live; `out`
 * must be writable.
 */
enum MsStatus ms_decomposition_residual(const struct MsModel *model,
                                        int32_t policy,
                                        const double *uniforms,
                                        size_t len,
                                        size_t budget,
                                        double *out);

/**
 * Optimal online value for a discrete model by backward induction.
 *
 * # Safety
 * `model` must be live; `out` must be writable.
 */
enum MsStatus ms_optimal_online_value(const struct MsModel *model,
                                      size_t budget,
                                      size_t horizon,
                                      double *out);

/**
 * Expected hindsight value for a discrete model.
 *
 * # Safety
 * `model` must be live; `out` must be writable.
 */
enum MsStatus ms_exact_offline_expectation(const struct MsModel *model,
                                           size_t budget,
                                           size_t horizon,
                                           double *out);

/**
 * Least-squares fit of `ln(mean)` on `ln(T)`.
 *
 * # Safety
 * `horizons` and `means` must point to `n` doubles; out-pointers must be
 * writable.
 */
enum MsStatus ms_fit_exponent(const double *horizons,
                              const double *means,
                              size_t n,
                              double *slope,
                              double *intercept,
                              double *r_squared);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTISECRETARY_H */
