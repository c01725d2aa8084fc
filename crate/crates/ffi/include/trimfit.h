#ifndef TRIMFIT_H
#define TRIMFIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum TrimfitStatus {
  TRIMFIT_STATUS_OK = 0,
  TRIMFIT_STATUS_NULL_POINTER = 1,
  TRIMFIT_STATUS_INVALID_ARGUMENT = 2,
  TRIMFIT_STATUS_DEGENERATE_GEOMETRY = 3,
  TRIMFIT_STATUS_TOO_FEW_POINTS = 4,
  TRIMFIT_STATUS_POINT_AT_INFINITY = 5,
  TRIMFIT_STATUS_PANIC = 6,
} TrimfitStatus;

/**
 * Solver selector.
 */
typedef enum TrimfitSolver {
  TRIMFIT_SOLVER_EPNP = 0,
  TRIMFIT_SOLVER_REPPNP = 1,
  TRIMFIT_SOLVER_REPPNP_INCR = 2,
  TRIMFIT_SOLVER_UPNP = 3,
  TRIMFIT_SOLVER_ROBUST_UPNP = 4,
  TRIMFIT_SOLVER_ROBUST_UPNP_INCR = 5,
  TRIMFIT_SOLVER_P3P_RANSAC = 6,
} TrimfitSolver;

/**
 * A set of 2D-3D correspondences, optionally with a known pose.
 */
typedef struct TrimfitProblem TrimfitProblem;

/**
 * Outcome of one solve.
 */
typedef struct TrimfitResult TrimfitResult;

/**
 * Solver and camera settings. Start from `trimfit_options_default()`.
 */
typedef struct TrimfitOptions {
  size_t max_iterations;
  double tolerance;
  size_t restarts;
  uint64_t seed;
  size_t ransac_iterations;
  double ransac_threshold_px;
  double focal;
  double cx;
  double cy;
} TrimfitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *trimfit_version(void);

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *trimfit_last_error(void);

/**
 * Static name of a status code.
 */
const char *trimfit_status_name(enum TrimfitStatus status);

/**
 * Defaults: 20 iterations, tolerance 1e-10, 20 restarts, seed 0, 500 RANSAC
 * iterations at 6 px, focal 800, principal point (320, 240).
 */
struct TrimfitOptions trimfit_options_default(void);

/**
 * Look up a solver by its CLI name, e.g. `"robust_upnp_incr"`.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string; `out` must be writable.
 */
enum TrimfitStatus trimfit_solver_from_name(const char *name, enum TrimfitSolver *out);

/**
 * Build a problem from `n` bearings and `n` world points, each packed as
 * `xyz` triples. Bearings are normalised; zero or non-finite ones are rejected.
 *
 * # Safety
 * `bearings` and `points` must each point to `3 * n` readable doubles;
 * `out` must be writable.
 */
enum TrimfitStatus trimfit_problem_new(const double *bearings,
                                       const double *points,
                                       size_t n,
                                       struct TrimfitProblem **out);

/**
 * Generate a synthetic problem: points in `[-2,2]x[-2,2]x[4,8]`, uniform
 * pixel noise, `floor(outlier_fraction * n)` random unit bearings, default
 * camera. The ground truth is kept on the handle.
 *
 * # Safety
 * `out` must be writable.
 */
enum TrimfitStatus trimfit_problem_generate(size_t n,
                                            double noise_px,
                                            double outlier_fraction,
                                            uint64_t seed,
                                            struct TrimfitProblem **out);

/**
 * Release a problem. Null is ignored.
 *
 * # Safety
 * `problem` must come from this library and not be used afterwards.
 */
void trimfit_problem_free(struct TrimfitProblem *problem);

/**
 * Number of correspondences; 0 for null.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t trimfit_problem_len(const struct TrimfitProblem *problem);

/**
 * Copy correspondence `index` into `bearing[3]` and `point[3]`.
 *
 * # Safety
 * `problem` must be a live handle; `bearing` and `point` must each hold 3 doubles.
 */
enum TrimfitStatus trimfit_problem_get(const struct TrimfitProblem *problem,
                                       size_t index,
                                       double *bearing,
                                       double *point);

/**
 * Copy the ground-truth rotation (row-major) and translation of a generated
 * problem. Fails with `InvalidArgument` for problems built from data.
 *
 * # Safety
 * `problem` must be a live handle; `rotation` must hold 9 doubles and
 * `translation` 3.
 */
enum TrimfitStatus trimfit_problem_ground_truth(const struct TrimfitProblem *problem,
                                                double *rotation,
                                                double *translation);

/**
 * Run `solver` on `problem`. `options` may be null for the defaults.
 *
 * # Safety
 * `problem` must be a live handle, `options` null or readable, `out` writable.
 */
enum TrimfitStatus trimfit_solve(const struct TrimfitProblem *problem,
                                 enum TrimfitSolver solver,
                                 const struct TrimfitOptions *options,
                                 struct TrimfitResult **out);

/**
 * Release a result. Null is ignored.
 *
 * # Safety
 * `result` must come from this library and not be used afterwards.
 */
void trimfit_result_free(struct TrimfitResult *result);

/**
 * Copy the estimated rotation (row-major, world to camera) and translation.
 *
 * # Safety
 * `result` must be a live handle; `rotation` must hold 9 doubles and
 * `translation` 3.
 */
enum TrimfitStatus trimfit_result_pose(const struct TrimfitResult *result,
                                       double *rotation,
                                       double *translation);

/**
 * Number of retained (inlier) ids; 0 for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t trimfit_result_inlier_count(const struct TrimfitResult *result);

/**
 * Copy up to `capacity` inlier ids (ascending) into `ids`; returns the
 * number copied.
 *
 * # Safety
 * `result` must be null or a live handle; `ids` must hold `capacity` elements.
 */
size_t trimfit_result_inliers(const struct TrimfitResult *result, size_t *ids, size_t capacity);

/**
 * Trim iterations run (1 for single-shot solvers); 0 for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t trimfit_result_iterations(const struct TrimfitResult *result);

/**
 * Whether the solver met its convergence rule; false for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
bool trimfit_result_converged(const struct TrimfitResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIMFIT_H */
