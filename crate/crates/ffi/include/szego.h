#ifndef SZEGO_H
#define SZEGO_H

#include <stdbool.h>
#include <stdint.h>

typedef enum SzegoStatus {
  SZEGO_STATUS_OK = 0,
  SZEGO_STATUS_NULL_POINTER = 1,
  SZEGO_STATUS_INVALID_ARGUMENT = 2,
  /*
   Parameters outside what the operation supports (e.g. the exact derivative ring).
   */
  SZEGO_STATUS_UNSUPPORTED = 3,
  SZEGO_STATUS_COMPUTATION_FAILED = 4,
  SZEGO_STATUS_PANIC = 5,
} SzegoStatus;

/*
 Opaque handle: weight parameters, precision settings and a moment memo.
 */
typedef struct SzegoContext SzegoContext;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Creates a context for `φ = (1-r²)^A exp(-B/(1-r²)^α)`.

 `precision_bits >= 128`; `tol` is the quadrature target relative error.

 # Safety
 `out` must be a valid pointer to writable storage for one pointer.
 */
enum SzegoStatus szego_context_new(double a,
                                   double b,
                                   double alpha,
                                   uint32_t precision_bits,
                                   double tol,
                                   struct SzegoContext **out);

/*
 # Safety
 `ctx` must be null or a pointer from `szego_context_new` not yet freed.
 */
void szego_context_free(struct SzegoContext *ctx);

/*
 Message for the last failure on this thread, or null. Valid until the next
 call into the library from the same thread; do not free.
 */
const char *szego_last_error(void);

/*
 # Safety
 `s` must be null or a string returned by this library, not yet freed.
 */
void szego_string_free(char *s);

/*
 Library version as a static NUL-terminated string.
 */
const char *szego_version(void);

/*
 `φ(r)` for `0 <= r <= 1`.

 # Safety
 `ctx` from `szego_context_new`; `out` writable.
 */
enum SzegoStatus szego_phi(const struct SzegoContext *ctx, double r, double *out);

/*
 `(2π)² ∫₀¹ r^{β+1} φ^{2j+1} √(1+|∇φ|²) dr`.

 Large `β` underflows a double, so the natural log is returned as well.
 Either out pointer may be null.

 # Safety
 `ctx` from `szego_context_new`; non-null out pointers writable.
 */
enum SzegoStatus szego_moment(const struct SzegoContext *ctx,
                              uint32_t j,
                              double beta,
                              double *out_value,
                              double *out_ln);

/*
 `R_n(p) = ‖zⁿ‖_p ‖zⁿ‖_{p'} / ‖zⁿ‖₂²` for the base weight, `p = p_num/p_den > 1`.

 # Safety
 `ctx` from `szego_context_new`; `out` writable.
 */
enum SzegoStatus szego_irregularity_ratio(const struct SzegoContext *ctx,
                                          int64_t p_num,
                                          int64_t p_den,
                                          uint32_t n,
                                          double *out);

/*
 Minimum of `Δ(-log φ)` over a boundary-refined grid and whether it clears `-1e-25`.

 # Safety
 `ctx` from `szego_context_new`; out pointers writable.
 */
enum SzegoStatus szego_pseudoconvexity(const struct SzegoContext *ctx,
                                       uint32_t grid,
                                       double *out_min,
                                       bool *out_pass);

/*
 `B_j(z, t)` on the disc from a moment table with `n_max + 1` entries.

 # Safety
 `ctx` from `szego_context_new`; out pointers writable.
 */
enum SzegoStatus szego_bergman_kernel(const struct SzegoContext *ctx,
                                      uint32_t j,
                                      uint32_t n_max,
                                      double z_re,
                                      double z_im,
                                      double t_re,
                                      double t_im,
                                      double *out_re,
                                      double *out_im);

/*
 Derivative sign certificate as a JSON string; free it with `szego_string_free`.

 # Safety
 `ctx` from `szego_context_new`; `out_json` writable.
 */
enum SzegoStatus szego_dz_certify_json(const struct SzegoContext *ctx,
                                       uint32_t max_order,
                                       uint32_t samples,
                                       char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SZEGO_H */
