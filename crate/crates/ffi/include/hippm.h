#ifndef HIPPM_H
#define HIPPM_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HippmCriterion {
  HIPPM_CRITERION_A = 0,
  HIPPM_CRITERION_B = 1,
} HippmCriterion;

typedef enum HippmMethod {
  HIPPM_METHOD_HALPERN = 0,
  HIPPM_METHOD_CLASSICAL = 1,
} HippmMethod;

typedef enum HippmStatus {
  HIPPM_STATUS_OK = 0,
  HIPPM_STATUS_NULL_POINTER = 1,
  HIPPM_STATUS_INVALID_ARGUMENT = 2,
  HIPPM_STATUS_DIMENSION_MISMATCH = 3,
  HIPPM_STATUS_NOT_MONOTONE = 4,
  HIPPM_STATUS_CRITERION_FAILURE = 5,
  HIPPM_STATUS_INNER_STALLED = 6,
  HIPPM_STATUS_UNAVAILABLE = 7,
  HIPPM_STATUS_PARSE = 8,
  HIPPM_STATUS_OUT_OF_RANGE = 9,
  HIPPM_STATUS_PANIC = 10,
} HippmStatus;

/**
 * Opaque augmented Lagrangian trace.
 */
typedef struct HippmAlmTrace HippmAlmTrace;

/**
 * Opaque monotone operator.
 */
typedef struct HippmOperator HippmOperator;

/**
 * Opaque convex QP.
 */
typedef struct HippmProgram HippmProgram;

/**
 * Opaque iterate trace.
 */
typedef struct HippmTrace HippmTrace;

/**
 * Options for [`hippm_solve`]. The proximal parameter is constant.
 */
typedef struct HippmSolveOptions {
  enum HippmMethod method;
  enum HippmCriterion criterion;
  double delta;
  double c;
  uintptr_t max_iter;
  double stop_residual;
  uintptr_t residual_stride;
  /**
   * Nonzero: inject full-budget errors in seeded random directions.
   */
  bool adversarial;
  uint64_t seed;
} HippmSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *hippm_last_error_message(void);

/**
 * `T(z) = Mz + q`, `M` row-major `n×n`.
 *
 * # Safety
 * `m` must point to `n*n` doubles, `q` to `n` doubles, `out` to a writable handle slot.
 */
enum HippmStatus hippm_operator_affine(uintptr_t n,
                                       const double *m,
                                       const double *q,
                                       struct HippmOperator **out);

/**
 * Normal cone of `[lower, upper]`; infinite bounds allowed.
 *
 * # Safety
 * `lower` and `upper` must point to `n` doubles, `out` to a writable handle slot.
 */
enum HippmStatus hippm_operator_box(uintptr_t n,
                                    const double *lower,
                                    const double *upper,
                                    struct HippmOperator **out);

/**
 * `T = μI + S` with `S` skew-symmetric, row-major `n×n`.
 *
 * # Safety
 * `s` must point to `n*n` doubles, `out` to a writable handle slot.
 */
enum HippmStatus hippm_operator_scaled_skew(uintptr_t n,
                                            double mu,
                                            const double *s,
                                            struct HippmOperator **out);

/**
 * Subdifferential of `½xᵀQx + qᵀx` plus the indicator of `[lower, upper]`.
 *
 * # Safety
 * `qm` must point to `n*n` doubles; `q`, `lower`, `upper` to `n` doubles each.
 */
enum HippmStatus hippm_operator_quadratic_box(uintptr_t n,
                                              const double *qm,
                                              const double *q,
                                              const double *lower,
                                              const double *upper,
                                              struct HippmOperator **out);

/**
 * # Safety
 * `op` must be null or a handle from an operator constructor, not yet freed.
 */
void hippm_operator_free(struct HippmOperator *op);

/**
 * # Safety
 * `op` must be a live operator handle, `out` writable.
 */
enum HippmStatus hippm_operator_dim(const struct HippmOperator *op, uintptr_t *out);

/**
 * Approximate resolvent `(I + cT)⁻¹y` with certified error ≤ `tol`.
 *
 * # Safety
 * `y` and `out_point` must hold `n` doubles; `out_error_bound` must be writable.
 */
enum HippmStatus hippm_resolvent(const struct HippmOperator *op,
                                 double c,
                                 const double *y,
                                 uintptr_t n,
                                 double tol,
                                 double *out_point,
                                 double *out_error_bound);

/**
 * `‖z − P_c(z)‖` through a reference-accuracy resolvent.
 *
 * # Safety
 * `z` must hold `n` doubles; `out` must be writable.
 */
enum HippmStatus hippm_fixed_point_residual(const struct HippmOperator *op,
                                            double c,
                                            const double *z,
                                            uintptr_t n,
                                            double *out);

/**
 * Runs the iteration from `anchor` and returns a trace handle.
 *
 * # Safety
 * `options` must be valid, `anchor` must hold `n` doubles, `out` writable.
 */
enum HippmStatus hippm_solve(const struct HippmOperator *op,
                             const struct HippmSolveOptions *options,
                             const double *anchor,
                             uintptr_t n,
                             struct HippmTrace **out);

/**
 * # Safety
 * `trace` must be null or a handle from [`hippm_solve`], not yet freed.
 */
void hippm_trace_free(struct HippmTrace *trace);

/**
 * # Safety
 * `trace` must be a live trace handle, `out` writable.
 */
enum HippmStatus hippm_trace_len(const struct HippmTrace *trace, uintptr_t *out);

/**
 * Reference residual at row `k`; `Unavailable` when the row was skipped by the stride.
 *
 * # Safety
 * `trace` must be a live trace handle, `out` writable.
 */
enum HippmStatus hippm_trace_residual(const struct HippmTrace *trace, uintptr_t k, double *out);

/**
 * Certified error bound used at row `k`.
 *
 * # Safety
 * `trace` must be a live trace handle, `out` writable.
 */
enum HippmStatus hippm_trace_error_bound(const struct HippmTrace *trace, uintptr_t k, double *out);

/**
 * Copies the iterate `zᵏ` into `out` (length `n`).
 *
 * # Safety
 * `trace` must be a live trace handle, `out` must hold `n` doubles.
 */
enum HippmStatus hippm_trace_iterate(const struct HippmTrace *trace,
                                     uintptr_t k,
                                     double *out,
                                     uintptr_t n);

/**
 * `1/(k+2)^(1+delta)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum HippmStatus hippm_eps_schedule(double delta, uintptr_t k, double *out);

/**
 * `Σ_{k≥0} 1/(k+2)^(1+delta)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum HippmStatus hippm_beta0(double delta, double *out);

/**
 * Residual envelope `2·dist0/(k+1) + √Θₖ` for the tolerance exponent `delta`.
 *
 * # Safety
 * `out` must be writable.
 */
enum HippmStatus hippm_theta_envelope(double delta, double dist0, uintptr_t k, double *out);

/**
 * `min ½xᵀQx + qᵀx` s.t. `Ax ≤ b`, `lower ≤ x ≤ upper`; `A` is `m×n`.
 *
 * # Safety
 * `qm` holds `n*n`, `a` holds `m*n` (may be null when `m = 0`), `q`, `lower`,
 * `upper` hold `n`, `b` holds `m` doubles; `out` writable.
 */
enum HippmStatus hippm_program_new(uintptr_t n,
                                   uintptr_t m,
                                   const double *qm,
                                   const double *q,
                                   const double *a,
                                   const double *b,
                                   const double *lower,
                                   const double *upper,
                                   struct HippmProgram **out);

/**
 * # Safety
 * `prog` must be null or a handle from [`hippm_program_new`], not yet freed.
 */
void hippm_program_free(struct HippmProgram *prog);

/**
 * Runs the augmented Lagrangian method. `y0` may be null (zero multipliers).
 * An inner-solver abort still yields a trace and returns `InnerStalled`.
 *
 * # Safety
 * `prog` must be live; `y0` null or `m` doubles; `out` writable.
 */
enum HippmStatus hippm_alm_solve(const struct HippmProgram *prog,
                                 double c0,
                                 bool linear_schedule,
                                 double delta,
                                 uintptr_t max_outer,
                                 const double *y0,
                                 struct HippmAlmTrace **out);

/**
 * # Safety
 * `trace` must be null or a handle from [`hippm_alm_solve`], not yet freed.
 */
void hippm_alm_trace_free(struct HippmAlmTrace *trace);

/**
 * # Safety
 * `trace` must be live, `out` writable.
 */
enum HippmStatus hippm_alm_trace_len(const struct HippmAlmTrace *trace, uintptr_t *out);

/**
 * Copies `yᵏ⁺¹` into `out` (length `m`).
 *
 * # Safety
 * `trace` must be live, `out` must hold `m` doubles.
 */
enum HippmStatus hippm_alm_trace_multiplier(const struct HippmAlmTrace *trace,
                                            uintptr_t k,
                                            double *out,
                                            uintptr_t m);

/**
 * Copies the weighted average `x̃ᵏ⁺¹` into `out` (length `n`).
 *
 * # Safety
 * `trace` must be live, `out` must hold `n` doubles.
 */
enum HippmStatus hippm_alm_trace_average(const struct HippmAlmTrace *trace,
                                         uintptr_t k,
                                         double *out,
                                         uintptr_t n);

/**
 * `max_i f_i(x̃ᵏ⁺¹)`.
 *
 * # Safety
 * `trace` must be live, `out` writable.
 */
enum HippmStatus hippm_alm_trace_feasibility(const struct HippmAlmTrace *trace,
                                             uintptr_t k,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIPPM_H */
