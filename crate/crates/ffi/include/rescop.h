#ifndef RESCOP_H
#define RESCOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RescopStatus {
  RESCOP_STATUS_OK = 0,
  RESCOP_STATUS_NULL_POINTER = 1,
  RESCOP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed or inconsistent input data.
   */
  RESCOP_STATUS_INPUT_ERROR = 3,
  /**
   * Estimation or evaluation failed numerically (no root, singular information, ...).
   */
  RESCOP_STATUS_NUMERICAL_ERROR = 4,
  RESCOP_STATUS_BUFFER_TOO_SMALL = 5,
  RESCOP_STATUS_PANIC = 6,
} RescopStatus;

typedef enum RescopFamily {
  RESCOP_FAMILY_CLAYTON = 0,
  RESCOP_FAMILY_FRANK = 1,
  RESCOP_FAMILY_GUMBEL = 2,
  RESCOP_FAMILY_GAUSSIAN = 3,
  RESCOP_FAMILY_STUDENT_T5 = 4,
} RescopFamily;

typedef enum RescopEstimator {
  RESCOP_ESTIMATOR_TAU_INVERSION = 0,
  RESCOP_ESTIMATOR_MPLE = 1,
  RESCOP_ESTIMATOR_MPLE_TRIMMED = 2,
} RescopEstimator;

typedef enum RescopTableFormat {
  RESCOP_TABLE_FORMAT_CSV = 0,
  RESCOP_TABLE_FORMAT_MARKDOWN = 1,
} RescopTableFormat;

/**
 * Opaque copula of a fixed family and dimension.
 */
typedef struct RescopCopula RescopCopula;

/**
 * Opaque pseudo-observation sample.
 */
typedef struct RescopPseudoSample RescopPseudoSample;

/**
 * Estimation result. Standard errors are NaN when not computed.
 */
typedef struct RescopReport {
  enum RescopEstimator estimator;
  double alpha_hat;
  double tau_hat;
  double std_error_alpha;
  double std_error_tau;
  size_t iterations;
  bool converged;
  size_t n_used;
  double score_at_root;
} RescopReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL terminated,
 * truncated to `len`). Returns the full message length, or 0 if none.
 */
size_t rescop_last_error_message(char *buf, size_t len);

/**
 * Stable snake_case tag of the last error of this thread, or NULL if none.
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *rescop_last_error_kind(void);

/**
 * Pseudo-observations (column ranks over n + 1) of an n x d residual matrix.
 */
enum RescopStatus rescop_pseudo_sample_from_residuals(const double *residuals,
                                                      size_t n,
                                                      size_t d,
                                                      struct RescopPseudoSample **out);

/**
 * Wraps an n x d matrix of values already in (0, 1), used as is.
 */
enum RescopStatus rescop_pseudo_sample_from_uniforms(const double *uniforms,
                                                     size_t n,
                                                     size_t d,
                                                     struct RescopPseudoSample **out);

void rescop_pseudo_sample_free(struct RescopPseudoSample *sample);

enum RescopStatus rescop_pseudo_sample_shape(const struct RescopPseudoSample *sample,
                                             size_t *n,
                                             size_t *d);

/**
 * Copies the n x d values into `out`, which must hold at least n * d doubles.
 */
enum RescopStatus rescop_pseudo_sample_values(const struct RescopPseudoSample *sample,
                                              double *out,
                                              size_t len);

/**
 * Runs one estimator. `trim_d`/`trim_lambda` are used by the trimmed
 * estimator only; pass values <= 0 for the defaults (0.25, 1.9).
 * Standard errors are attached for the pseudo-likelihood estimators when
 * `with_std_errors` is true.
 */
enum RescopStatus rescop_estimate(const struct RescopPseudoSample *sample,
                                  enum RescopFamily family,
                                  enum RescopEstimator estimator,
                                  double trim_d,
                                  double trim_lambda,
                                  bool with_std_errors,
                                  struct RescopReport *out);

/**
 * End-to-end fit: location regression of each response on `[1, x]`,
 * pseudo-observations of the residuals, then the chosen estimator with
 * standard errors. `log_transform` may be NULL (identity everywhere) or
 * point to `d` flags.
 */
enum RescopStatus rescop_fit_pipeline(const double *y,
                                      const double *x,
                                      size_t n,
                                      size_t d,
                                      size_t q,
                                      const bool *log_transform,
                                      enum RescopFamily family,
                                      enum RescopEstimator estimator,
                                      double trim_d,
                                      double trim_lambda,
                                      struct RescopReport *out);

enum RescopStatus rescop_kendall_tau(const double *u, const double *v, size_t n, double *out);

enum RescopStatus rescop_copula_new(enum RescopFamily family,
                                    size_t dim,
                                    struct RescopCopula **out);

void rescop_copula_free(struct RescopCopula *copula);

enum RescopStatus rescop_tau_to_alpha(const struct RescopCopula *copula, double tau, double *out);

enum RescopStatus rescop_alpha_to_tau(const struct RescopCopula *copula, double alpha, double *out);

/**
 * Log density at one point `u` of length `dim`.
 */
enum RescopStatus rescop_log_density(const struct RescopCopula *copula,
                                     const double *u,
                                     double alpha,
                                     double *out);

/**
 * Derivative of the log density in `alpha` at one point `u`.
 */
enum RescopStatus rescop_score(const struct RescopCopula *copula,
                               const double *u,
                               double alpha,
                               double *out);

/**
 * Draws `n` points into `out` (n * dim doubles) from a ChaCha8 stream seeded by `seed`.
 */
enum RescopStatus rescop_sample(const struct RescopCopula *copula,
                                double alpha,
                                size_t n,
                                uint64_t seed,
                                double *out,
                                size_t len);

/**
 * Runs a scenario given as JSON and returns the rendered table in `*out`,
 * to be released with [`rescop_string_free`].
 */
enum RescopStatus rescop_simulate(const char *scenario_json,
                                  enum RescopTableFormat format,
                                  char **out);

void rescop_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESCOP_H */
