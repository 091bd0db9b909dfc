#ifndef DGDAE_H
#define DGDAE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DgdaeStatus {
  DGDAE_STATUS_OK = 0,
  DGDAE_STATUS_NULL_POINTER = 1,
  DGDAE_STATUS_INVALID_ARGUMENT = 2,
  DGDAE_STATUS_DIMENSION_MISMATCH = 3,
  DGDAE_STATUS_UNKNOWN_PROBLEM = 4,
  DGDAE_STATUS_UNKNOWN_SCHEME = 5,
  DGDAE_STATUS_INCOMPATIBLE_SCHEME = 6,
  /*
   The integration stopped early; a partial trajectory may still be
   returned.
   */
  DGDAE_STATUS_SOLVER_FAILURE = 7,
  DGDAE_STATUS_NUMERICAL_FAILURE = 8,
  DGDAE_STATUS_IO = 9,
  DGDAE_STATUS_PANIC = 10,
} DgdaeStatus;

/*
 A built-in problem instance.
 */
typedef struct DgdaeProblem DgdaeProblem;

/*
 The records of one integration run.
 */
typedef struct DgdaeTrajectory DgdaeTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *dgdae_version(void);

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 valid until the next call into the library on this thread.
 */
const char *dgdae_last_error_message(void);

/*
 Builds the named problem. `grid` selects the sinh-gordon grid size (0 for
 the default) and must be 0 for the other problems; `seed` selects the
 smhs initial state.

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DgdaeStatus dgdae_problem_new(const char *name,
                                   size_t grid,
                                   uint64_t seed,
                                   struct DgdaeProblem **out);

/*
 # Safety
 `problem` must come from [`dgdae_problem_new`] and not be used afterwards.
 */
void dgdae_problem_free(struct DgdaeProblem *problem);

/*
 # Safety
 `problem` must be a live handle and `out` a valid pointer.
 */
enum DgdaeStatus dgdae_problem_dim(const struct DgdaeProblem *problem, size_t *out);

/*
 Copies the default initial state into `buf`, which must hold exactly
 `dgdae_problem_dim` values.

 # Safety
 `buf` must point to `len` writable doubles.
 */
enum DgdaeStatus dgdae_problem_initial_state(const struct DgdaeProblem *problem,
                                             double *buf,
                                             size_t len);

/*
 Integrates `problem` for `steps` steps of size `dt`.

 `scheme` NULL selects the problem's recommended scheme; `z0` NULL its
 default initial state (otherwise `z0_len` must equal the dimension).
 `newton_tol <= 0` and `newton_max_iters == 0` keep the defaults.

 On [`DgdaeStatus::SolverFailure`] during stepping, `*out` still receives
 the partial trajectory, which the caller must free.

 # Safety
 Pointers must be valid as described; `out` must be writable.
 */
enum DgdaeStatus dgdae_integrate(const struct DgdaeProblem *problem,
                                 const char *scheme,
                                 const double *z0,
                                 size_t z0_len,
                                 double dt,
                                 size_t steps,
                                 double newton_tol,
                                 size_t newton_max_iters,
                                 struct DgdaeTrajectory **out);

/*
 # Safety
 `traj` must come from [`dgdae_integrate`] and not be used afterwards.
 */
void dgdae_trajectory_free(struct DgdaeTrajectory *traj);

/*
 Number of records, including the initial state.

 # Safety
 `traj` must be a live handle and `out` a valid pointer.
 */
enum DgdaeStatus dgdae_trajectory_len(const struct DgdaeTrajectory *traj, size_t *out);

/*
 # Safety
 `traj` must be a live handle and `out` a valid pointer.
 */
enum DgdaeStatus dgdae_trajectory_dim(const struct DgdaeTrajectory *traj, size_t *out);

/*
 Index of the step that failed, or -1 for a complete run.

 # Safety
 `traj` must be a live handle and `out` a valid pointer.
 */
enum DgdaeStatus dgdae_trajectory_failed_step(const struct DgdaeTrajectory *traj, int64_t *out);

/*
 # Safety
 `traj` must be a live handle and `out` a valid pointer.
 */
enum DgdaeStatus dgdae_trajectory_time(const struct DgdaeTrajectory *traj,
                                       size_t index,
                                       double *out);

/*
 Copies the state of record `index` into `buf` (exactly `dim` values).

 # Safety
 `buf` must point to `len` writable doubles.
 */
enum DgdaeStatus dgdae_trajectory_state(const struct DgdaeTrajectory *traj,
                                        size_t index,
                                        double *buf,
                                        size_t len);

/*
 Value of the named invariant (the primary `V` or an extra such as `H`)
 at record `index`.

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DgdaeStatus dgdae_trajectory_invariant(const struct DgdaeTrajectory *traj,
                                            size_t index,
                                            const char *name,
                                            double *out);

/*
 Writes the trajectory in the CLI's CSV format. `snapshot_every == 0`
 writes every record.

 # Safety
 `path` must be a NUL-terminated string.
 */
enum DgdaeStatus dgdae_trajectory_write_csv(const struct DgdaeTrajectory *traj,
                                            const char *path,
                                            size_t snapshot_every);

/*
 Moore–Penrose pseudoinverse of the row-major `d×d` matrix `a`, written
 row-major to `out`. `rank` may be NULL.

 # Safety
 `a` and `out` must each point to `d*d` doubles.
 */
enum DgdaeStatus dgdae_pseudo_inverse(const double *a, size_t d, double *out, size_t *rank);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DGDAE_H */
