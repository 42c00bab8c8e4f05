/* C interface to the gpmat generalized-precision-matrix library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum GpmatStatus {
  GPMAT_STATUS_OK = 0,
  GPMAT_STATUS_NULL_POINTER = 1,
  GPMAT_STATUS_INVALID_UTF8 = 2,
  GPMAT_STATUS_INVALID_ARGUMENT = 3,
  GPMAT_STATUS_NOT_POSITIVE_DEFINITE = 4,
  GPMAT_STATUS_INSUFFICIENT_DATA = 5,
  GPMAT_STATUS_DIMENSION_MISMATCH = 6,
  GPMAT_STATUS_PARSE_ERROR = 7,
  GPMAT_STATUS_IO_ERROR = 8,
  GPMAT_STATUS_DEGENERATE_DENOMINATOR = 9,
  GPMAT_STATUS_BUFFER_TOO_SMALL = 10,
  GPMAT_STATUS_INTERNAL = 11,
} GpmatStatus;

/**
 * Estimator selector for [`gpmat_estimate`].
 */
typedef enum GpmatEstimatorKind {
  GPMAT_ESTIMATOR_KIND_INVERSE_COVARIANCE = 0,
  GPMAT_ESTIMATOR_KIND_SIGNED = 1,
  GPMAT_ESTIMATOR_KIND_ABS = 2,
  GPMAT_ESTIMATOR_KIND_REGION = 3,
  GPMAT_ESTIMATOR_KIND_TAYLOR = 4,
} GpmatEstimatorKind;

/**
 * Opaque estimate handle.
 */
typedef struct GpmatEstimate GpmatEstimate;

/**
 * Opaque return-panel handle.
 */
typedef struct GpmatReturns GpmatReturns;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static, NUL-terminated string.
 */
const char *gpmat_version(void);

/**
 * Message of the last failure on this thread; valid until the next failing
 * call on the same thread. Never null.
 */
const char *gpmat_last_error(void);

/**
 * Load the generic `date,<asset>,...` returns CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GpmatStatus gpmat_returns_load_csv(const char *path, struct GpmatReturns **out);

/**
 * Load a Kenneth French daily industry file (percent returns, sentinels
 * dropped).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GpmatStatus gpmat_returns_load_ff(const char *path, struct GpmatReturns **out);

/**
 * Wrap a caller-provided row-major `n_rows × n_cols` buffer of returns.
 * The data is copied; the buffer stays owned by the caller.
 *
 * # Safety
 * `values` must point to `n_rows * n_cols` readable doubles.
 */
enum GpmatStatus gpmat_returns_from_array(const double *values,
                                          uintptr_t n_rows,
                                          uintptr_t n_cols,
                                          struct GpmatReturns **out);

/**
 * Draw a seeded multivariate t panel with equicorrelated scatter.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GpmatStatus gpmat_simulate_t(uintptr_t n,
                                  uintptr_t d,
                                  double nu,
                                  double rho,
                                  uint64_t seed,
                                  struct GpmatReturns **out);

/**
 * Number of rows (periods) in a panel handle.
 *
 * # Safety
 * `r` must be a live handle from this library.
 */
uintptr_t gpmat_returns_rows(const struct GpmatReturns *r);

/**
 * Number of columns (assets) in a panel handle.
 *
 * # Safety
 * `r` must be a live handle from this library.
 */
uintptr_t gpmat_returns_cols(const struct GpmatReturns *r);

/**
 * Release a panel handle. Null is a no-op.
 *
 * # Safety
 * `r` must be a handle from this library, not yet freed.
 */
void gpmat_returns_free(struct GpmatReturns *r);

/**
 * Estimate a precision matrix from a panel with window sample moments
 * plugged in. `nu` is ignored for the inverse-covariance kind;
 * `region_threshold`/`region_p`/`region_q` are read only for the region
 * kind.
 *
 * # Safety
 * `r` must be a live panel handle and `out` a valid pointer.
 */
enum GpmatStatus gpmat_estimate(const struct GpmatReturns *r,
                                enum GpmatEstimatorKind kind,
                                double nu,
                                double region_threshold,
                                uintptr_t region_p,
                                uintptr_t region_q,
                                struct GpmatEstimate **out);

/**
 * Matrix dimension of an estimate handle.
 *
 * # Safety
 * `e` must be a live handle from this library.
 */
uintptr_t gpmat_estimate_dim(const struct GpmatEstimate *e);

/**
 * Copy the d×d estimate row-major into `buf` (capacity `len` doubles).
 *
 * # Safety
 * `e` must be a live handle; `buf` must hold at least `len` doubles.
 */
enum GpmatStatus gpmat_estimate_matrix(const struct GpmatEstimate *e, double *buf, uintptr_t len);

/**
 * Minimum-variance weights of an estimate, copied into `buf`.
 *
 * # Safety
 * `e` must be a live handle; `buf` must hold at least `len` doubles.
 */
enum GpmatStatus gpmat_mv_weights(const struct GpmatEstimate *e, double *buf, uintptr_t len);

/**
 * JSON document of an estimate; release with [`gpmat_string_free`].
 *
 * # Safety
 * `e` must be a live handle from this library.
 */
char *gpmat_estimate_to_json(const struct GpmatEstimate *e);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void gpmat_string_free(char *s);

/**
 * Release an estimate handle. Null is a no-op.
 *
 * # Safety
 * `e` must be a handle from this library, not yet freed.
 */
void gpmat_estimate_free(struct GpmatEstimate *e);

/**
 * Exact t-Student LDF at a point: fills `out` (row-major d×d) with the
 * mixed second partials of the log-density for location `mu`, scatter
 * `sigma` (row-major d×d) and `nu` degrees of freedom.
 *
 * # Safety
 * `x`, `mu` must point to `d` doubles; `sigma` to `d*d`; `out` to `d*d`
 * writable doubles.
 */
enum GpmatStatus gpmat_ldf_t_exact(uintptr_t d,
                                   double nu,
                                   const double *x,
                                   const double *mu,
                                   const double *sigma,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
