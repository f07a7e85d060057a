#ifndef HSMILNE_H
#define HSMILNE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum HsStatus {
  /**
   * Success.
   */
  HS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  HS_STATUS_NULL_POINTER = 1,
  /**
   * An argument violates a documented precondition.
   */
  HS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * An array length does not match the handle's grid.
   */
  HS_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * The operation is not available for this input (e.g. a truncated grid).
   */
  HS_STATUS_PRECONDITION = 4,
  /**
   * An iterative method did not converge.
   */
  HS_STATUS_NON_CONVERGENCE = 5,
  /**
   * Any other numerical failure.
   */
  HS_STATUS_NUMERICAL = 6,
  /**
   * A panic was caught at the boundary.
   */
  HS_STATUS_PANIC = 7,
} HsStatus;

/**
 * ε-Milne solver bound to an operator and a layer geometry.
 */
typedef struct HsMilneSolver HsMilneSolver;

/**
 * Linearized collision operator on a velocity grid.
 */
typedef struct HsOperator HsOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a NUL-terminated string with static lifetime.
 */
const char *hs_version(void);

/**
 * Length in bytes (without the terminating NUL) of the calling thread's last error message.
 */
size_t hs_last_error_length(void);

/**
 * Copies the calling thread's last error message into `buf` (capacity `cap`
 * bytes, including the NUL), truncating if needed. Returns the number of
 * bytes written, excluding the NUL. The message is empty after a success.
 *
 * # Safety
 * `buf` must be null or valid for `cap` byte writes.
 */
size_t hs_last_error_message(char *buf, size_t cap);

/**
 * Assembles the linearized collision operator on a Gauss–Hermite grid with
 * `per_axis_count` nodes per axis, truncation parameter `v_max`, and
 * collision strength `q0` (unit-mass Maxwellian).
 *
 * # Safety
 * `out` must be null or valid for one pointer write.
 */
enum HsStatus hs_operator_new(size_t per_axis_count,
                              double v_max,
                              double q0,
                              struct HsOperator **out);

/**
 * Releases an operator. Null is ignored. Solvers created from the operator
 * remain valid.
 *
 * # Safety
 * `op` must be null or a handle from [`hs_operator_new`] not yet freed.
 */
void hs_operator_free(struct HsOperator *op);

/**
 * Number of velocity nodes.
 *
 * # Safety
 * `op` must be a live handle or null; `out` null or valid for one write.
 */
enum HsStatus hs_operator_len(const struct HsOperator *op, size_t *out);

/**
 * Copies the velocity nodes as `[v₀ˣ, v₀ʸ, v₀ᶻ, v₁ˣ, …]` into `out` (length `3·len`).
 *
 * # Safety
 * `op` must be a live handle or null; `out` null or valid for `len` writes.
 */
enum HsStatus hs_operator_nodes(const struct HsOperator *op,
                                double *out,
                                size_t len);

/**
 * Copies the quadrature weights into `out` (length `len`).
 *
 * # Safety
 * `op` must be a live handle or null; `out` null or valid for `len` writes.
 */
enum HsStatus hs_operator_weights(const struct HsOperator *op, double *out, size_t len);

/**
 * Applies `L` to the grid function `f`, writing `L f` into `out`; both have length `len`.
 *
 * # Safety
 * `op` must be a live handle or null; `f` and `out` null or valid for `len` elements.
 */
enum HsStatus hs_operator_apply(const struct HsOperator *op,
                                const double *f,
                                double *out,
                                size_t len);

/**
 * Relative null-space residuals `‖L e_k‖/‖e_k‖`, written to `out[0..5]`.
 *
 * # Safety
 * `op` must be a live handle or null; `out` null or valid for 5 writes.
 */
enum HsStatus hs_operator_null_residuals(const struct HsOperator *op, double *out);

/**
 * Coefficients `(a, b₁, b₂, b₃, c)` of the null-space projection of `f`
 * (length `len`) on the orthonormal basis, written to `coeffs[0..5]`.
 *
 * # Safety
 * `op` must be a live handle or null; `f` null or valid for `len` reads;
 * `coeffs` null or valid for 5 writes.
 */
enum HsStatus hs_operator_project(const struct HsOperator *op,
                                  const double *f,
                                  size_t len,
                                  double *coeffs);

/**
 * Creates an ε-Milne solver for a layer with principal radii `r1`, `r2` and
 * Knudsen number `epsilon`, using the default η grid. The operator must live
 * on a full tensor grid.
 *
 * # Safety
 * `op` must be a live handle or null; `out` null or valid for one pointer write.
 */
enum HsStatus hs_milne_new(const struct HsOperator *op,
                           double r1,
                           double r2,
                           double epsilon,
                           struct HsMilneSolver **out);

/**
 * Releases a solver. Null is ignored.
 *
 * # Safety
 * `solver` must be null or a handle from [`hs_milne_new`] not yet freed.
 */
void hs_milne_free(struct HsMilneSolver *solver);

/**
 * Solves the homogeneous ε-Milne problem with in-flow data `h` (length
 * `len`, only entries with `v_η > 0` are used) and writes the far-field
 * limit `(a, b₁, b₂, b₃, c)` to `limit[0..5]` and the Krylov iteration count
 * to `iterations` (which may be null).
 *
 * # Safety
 * `solver` must be a live handle or null; `h` null or valid for `len` reads;
 * `limit` null or valid for 5 writes; `iterations` null or valid for one write.
 */
enum HsStatus hs_milne_solve(const struct HsMilneSolver *solver,
                             const double *h,
                             size_t len,
                             double tol,
                             size_t max_iter,
                             double *limit,
                             size_t *iterations);

/**
 * Backward hitting time of the ball with `center[0..3]` and `radius` from
 * `x[0..3]` along `−ε v`, written to `out`.
 *
 * # Safety
 * `center`, `x`, `v` must be null or valid for 3 reads; `out` null or valid for one write.
 */
enum HsStatus hs_hitting_time(const double *center,
                              double radius,
                              const double *x,
                              const double *v,
                              double epsilon,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSMILNE_H */
