#ifndef SARMANOV_RUIN_H
#define SARMANOV_RUIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the ruinsim exit codes.
 */
typedef enum {
  SrnStatus_Ok = 0,
  /**
   * Null pointer, malformed UTF-8/TOML, or an argument outside its domain.
   */
  SrnStatus_InvalidArgument = 1,
  /**
   * The model violates a Sarmanov constraint.
   */
  SrnStatus_InvalidModel = 2,
  /**
   * A standing hypothesis of the requested asymptotic fails.
   */
  SrnStatus_HypothesisViolation = 3,
  /**
   * Quadrature, sampling, or internal-consistency failure.
   */
  SrnStatus_NumericalFailure = 4,
} SrnStatus;

/**
 * Estimator choice for the Monte Carlo entry points.
 */
typedef enum {
  SrnMethod_Crude = 0,
  SrnMethod_Conditional = 1,
} SrnMethod;

/**
 * Opaque model handle.
 */
typedef struct SrnModel SrnModel;

/**
 * The asymptotic constants of a model.
 */
typedef struct {
  double alpha;
  double theta;
  double d1;
  double e_y_alpha;
  double kernel_moment;
  double kappa;
} SrnConstants;

/**
 * A Monte Carlo estimate. `truncation_index` is -1 unless the estimate
 * came from the truncated infinite-horizon estimator, in which case
 * `remainder_bound` carries the conservative truncation bound.
 */
typedef struct {
  double value;
  double stderr;
  uint64_t n_samples;
  int64_t truncation_index;
  double remainder_bound;
} SrnEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *srn_version(void);

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *srn_last_error_message(void);

/**
 * Configure the global worker pool; call at most once, before any
 * estimator. Returns InvalidArgument if the pool is already running.
 */
SrnStatus srn_init_workers(uint32_t workers);

/**
 * Build a model from a TOML description with the fields of a ruinsim
 * `[model]` table (`theta`, `[f]`, `[g]`, optional `[kernel]`). On success
 * `*out` owns the handle; free it with [`srn_model_free`].
 *
 * # Safety
 * `toml_text` must be a valid NUL-terminated string and `out` a valid
 * pointer.
 */
SrnStatus srn_model_from_toml(const char *toml_text, SrnModel **out);

/**
 * # Safety
 * `model` must be a pointer from [`srn_model_from_toml`], not yet freed.
 */
void srn_model_free(SrnModel *model);

/**
 * `P[X > x]` for the loss marginal.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_tail_f(const SrnModel *model, double x, double *out);

/**
 * κ and its ingredients.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_constants(const SrnModel *model, SrnConstants *out);

/**
 * (1 - `E[Y^α]`^n)/(1 - `E[Y^α]`) · κ (equal to n·κ at `E[Y^α] = 1)`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_finite_horizon_factor(const SrnModel *model, uint32_t n, double *out);

/**
 * κ/(1 - `E[Y^α]`); requires `E[Y^α]` < 1.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_infinite_horizon_factor(const SrnModel *model, double *out);

/**
 * `P[XY > x]` by adaptive quadrature.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_exact_product_tail(const SrnModel *model, double x, double *out);

/**
 * Monte Carlo estimate of `P[XY > x]`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_product_tail_mc(const SrnModel *model,
                              double x,
                              SrnMethod method,
                              uint64_t n_samples,
                              uint64_t seed,
                              SrnEstimate *out);

/**
 * Conditional estimate of the per-term tail H̄_i(x) = `P[X_i Π_{j≤i} Y_j > x]`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_estimate_h_i(const SrnModel *model,
                           uint32_t i,
                           double x,
                           uint64_t n_samples,
                           uint64_t seed,
                           SrnEstimate *out);

/**
 * Ψ(x, n), crude path simulation or the conditional per-term sum.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_estimate_finite_ruin(const SrnModel *model,
                                   double x,
                                   uint32_t n,
                                   SrnMethod method,
                                   uint64_t n_samples,
                                   uint64_t seed,
                                   SrnEstimate *out);

/**
 * Ψ(x) by the truncated conditional estimator; requires `E[Y^α]` < 1 and
 * `E[log Y]` < 0.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
SrnStatus srn_estimate_infinite_ruin(const SrnModel *model,
                                     double x,
                                     uint64_t n_samples,
                                     double tail_tol,
                                     uint64_t seed,
                                     SrnEstimate *out);

/**
 * n exact joint draws into caller-provided buffers of length n.
 *
 * # Safety
 * `model` must be a live handle; `xs` and `ys` must point to `n` writable
 * doubles each.
 */
SrnStatus srn_sample_joint(const SrnModel *model,
                           uint64_t n,
                           uint64_t seed,
                           double *xs,
                           double *ys);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SARMANOV_RUIN_H */
