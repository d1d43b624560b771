#ifndef STATICGEO_H
#define STATICGEO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgConnectStatus {
  SG_CONNECT_STATUS_GEODESIC = 0,
  SG_CONNECT_STATUS_DIVERGED = 1,
  SG_CONNECT_STATUS_MAX_ITER = 2,
} SgConnectStatus;

/**
 * Result code of every fallible call. The numeric values match the exit
 * codes of the command-line tool where they overlap.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  /**
   * A required pointer was null or a string was not UTF-8.
   */
  SG_STATUS_NULL_ARGUMENT = 1,
  /**
   * Bad input: unknown spacetime, point outside the domain, wrong dimension ...
   */
  SG_STATUS_VALIDATION = 2,
  /**
   * Numerical failure such as step-size underflow.
   */
  SG_STATUS_NUMERICAL = 3,
  /**
   * The endpoints cannot be joined.
   */
  SG_STATUS_DIVERGED = 4,
  /**
   * Internal error: a panic was caught at the boundary.
   */
  SG_STATUS_PANIC = 5,
} SgStatus;

typedef enum SgTermination {
  SG_TERMINATION_REACHED_S_MAX = 0,
  SG_TERMINATION_LEFT_DOMAIN = 1,
  SG_TERMINATION_BLOW_UP = 2,
} SgTermination;

/**
 * Outcome of a two-point connection.
 */
typedef struct SgConnection SgConnection;

/**
 * A catalog spacetime.
 */
typedef struct SgSpacetime SgSpacetime;

/**
 * An integrated geodesic.
 */
typedef struct SgTrajectory SgTrajectory;

/**
 * Scalars of a connection run.
 */
typedef struct SgConnectSummary {
  /**
   * `β ṫ` along the lifted curve.
   */
  double lambda;
  /**
   * `-β ṫ² + g_S(ẋ, ẋ)`.
   */
  double c;
  double j;
  double residual;
  size_t iterations;
} SgConnectSummary;

typedef struct SgArrival {
  /**
   * Earliest time at which a causal curve from the source reaches the target line.
   */
  double infimum_t;
  bool attained;
} SgArrival;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *sg_last_error_message(void);

/**
 * Frees a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void sg_string_free(char *s);

/**
 * The spacetime catalog as a JSON array; free with [`sg_string_free`].
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SgStatus sg_catalog_json(char **out);

/**
 * Builds a catalog spacetime with default parameters.
 *
 * # Safety
 * `name` must be a nul-terminated string; `out` must be valid for writes.
 */
enum SgStatus sg_spacetime_new(const char *name, struct SgSpacetime **out);

/**
 * Builds a spacetime from a JSON spec such as
 * `{"name": "schwarzschild_exterior", "m": 2}`.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be valid for writes.
 */
enum SgStatus sg_spacetime_from_json(const char *json, struct SgSpacetime **out);

/**
 * # Safety
 * `st` must be NULL or a handle from [`sg_spacetime_new`] not yet freed.
 */
void sg_spacetime_free(struct SgSpacetime *st);

/**
 * Dimension of the spatial slice, 0 for a NULL handle.
 *
 * # Safety
 * `st` must be NULL or a live handle.
 */
size_t sg_spacetime_dim(const struct SgSpacetime *st);

/**
 * # Safety
 * `st` must be a live handle, `x` must hold `n` values and `out` must be valid for writes.
 */
enum SgStatus sg_spacetime_beta(const struct SgSpacetime *st,
                                const double *x,
                                size_t n,
                                double *out);

/**
 * # Safety
 * As [`sg_spacetime_beta`].
 */
enum SgStatus sg_spacetime_in_domain(const struct SgSpacetime *st,
                                     const double *x,
                                     size_t n,
                                     bool *out);

/**
 * Integrates the geodesic through `(t, x)` with velocity `(t_dot, x_dot)`
 * up to affine parameter `s_max`, or until it leaves the chart or blows up.
 * A non-positive `tol` selects the default.
 *
 * # Safety
 * `st` must be a live handle, `x` and `x_dot` must hold `n` values, `out` must be valid for writes.
 */
enum SgStatus sg_geodesic_integrate(const struct SgSpacetime *st,
                                    double t,
                                    const double *x,
                                    double t_dot,
                                    const double *x_dot,
                                    size_t n,
                                    double s_max,
                                    double tol,
                                    struct SgTrajectory **out);

/**
 * # Safety
 * `tr` must be NULL or a live trajectory handle.
 */
void sg_trajectory_free(struct SgTrajectory *tr);

/**
 * Number of stored samples, 0 for a NULL handle.
 *
 * # Safety
 * `tr` must be NULL or a live handle.
 */
size_t sg_trajectory_len(const struct SgTrajectory *tr);

/**
 * Writes sample `i` as `s` and the packed state `[t, x…, ṫ, ẋ…]`
 * (`2 n + 2` values) into `state`.
 *
 * # Safety
 * `tr` must be a live handle, `s` valid for writes and `state` valid for `state_len` writes.
 */
enum SgStatus sg_trajectory_sample(const struct SgTrajectory *tr,
                                   size_t i,
                                   double *s,
                                   double *state,
                                   size_t state_len);

/**
 * Largest absolute drift of `λ` and `C` over the trajectory.
 *
 * # Safety
 * `tr` must be a live handle; the outputs must be valid for writes.
 */
enum SgStatus sg_trajectory_drift(const struct SgTrajectory *tr, double *lambda, double *c);

/**
 * How the run ended; `s_exit` receives the exit parameter, or the final
 * parameter when `s_max` was reached.
 *
 * # Safety
 * `tr` must be a live handle; the outputs must be valid for writes.
 */
enum SgStatus sg_trajectory_termination(const struct SgTrajectory *tr,
                                        enum SgTermination *kind,
                                        double *s_exit);

/**
 * Seeks a geodesic from `(t0, x0)` to `(t0 + delta_t, x1)`. Divergence is a
 * result, not an error: check [`sg_connection_status`]. `segments == 0`
 * selects the default discretization.
 *
 * # Safety
 * `st` must be a live handle, `x0` and `x1` must hold `n` values, `out` must be valid for writes.
 */
enum SgStatus sg_connect(const struct SgSpacetime *st,
                         const double *x0,
                         const double *x1,
                         size_t n,
                         double t0,
                         double delta_t,
                         size_t segments,
                         struct SgConnection **out);

/**
 * # Safety
 * `c` must be NULL or a live connection handle.
 */
void sg_connection_free(struct SgConnection *c);

/**
 * # Safety
 * `c` must be a live handle and `out` valid for writes.
 */
enum SgStatus sg_connection_status(const struct SgConnection *c, enum SgConnectStatus *out);

/**
 * # Safety
 * `c` must be a live handle and `out` valid for writes.
 */
enum SgStatus sg_connection_summary(const struct SgConnection *c, struct SgConnectSummary *out);

/**
 * Number of curve nodes (segments + 1), 0 for a NULL handle.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
size_t sg_connection_len(const struct SgConnection *c);

/**
 * Node `i` of the lifted curve: its time into `t` and `n` coordinates into `x`.
 *
 * # Safety
 * `c` must be a live handle, `t` valid for writes and `x` valid for `n` writes.
 */
enum SgStatus sg_connection_node(const struct SgConnection *c,
                                 size_t i,
                                 double *t,
                                 double *x,
                                 size_t n);

/**
 * Earliest arrival over the line `ℝ × {x_target}` of causal curves from `(t_p, x_p)`.
 *
 * # Safety
 * `st` must be a live handle, `x_p` and `x_target` must hold `n` values, `out` must be valid for writes.
 */
enum SgStatus sg_causal_arrival(const struct SgSpacetime *st,
                                double t_p,
                                const double *x_p,
                                const double *x_target,
                                size_t n,
                                struct SgArrival *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STATICGEO_H */
