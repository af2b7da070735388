#ifndef TURNPIKE_H
#define TURNPIKE_H

/* Generated by cbindgen from crates/ffi; do not edit by hand. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Call outcome. Non-zero values carry a thread-local message readable via
 * `tp_last_error`.
 */
typedef enum TpStatus {
  TP_STATUS_OK = 0,
  /**
   * Malformed arguments, configuration, or input files.
   */
  TP_STATUS_USAGE_ERROR = 2,
  /**
   * An iterative solver ran out of iterations or a step failed.
   */
  TP_STATUS_NO_CONVERGENCE = 3,
  /**
   * A structural assumption of the requested computation is violated.
   */
  TP_STATUS_ASSUMPTION_VIOLATED = 4,
  /**
   * Internal numerical failure or panic.
   */
  TP_STATUS_RUNTIME_ERROR = 5,
  /**
   * A required pointer argument was NULL.
   */
  TP_STATUS_NULL_ARGUMENT = 6,
} TpStatus;

/**
 * A built model: dynamics, cost, initial state, defaults.
 */
typedef struct TpModel TpModel;

/**
 * A steady optimality triple with its residuals.
 */
typedef struct TpSteady TpSteady;

/**
 * A solved finite-horizon trajectory on a uniform grid.
 */
typedef struct TpTrajectory TpTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library as a static NUL-terminated string. Never freed.
 */
const char *tp_version(void);

/**
 * Message of the most recent failing call on this thread, or NULL when no
 * call has failed yet. The caller owns the string.
 */
char *tp_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a pointer previously returned by a `tp_` function
 * documented as caller-owned, and must not be used afterwards.
 */
void tp_string_free(char *s);

/**
 * Builds a registered model by name (`lq1d`, `lq-tracking`, `no-turnpike`,
 * `heat2d`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum TpStatus tp_model_new_named(const char *name, struct TpModel **out);

/**
 * Builds a model from a JSON configuration document (the same schema the
 * CLI accepts via `--config`).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be a valid
 * pointer.
 */
enum TpStatus tp_model_new(const char *config_json, struct TpModel **out);

/**
 * # Safety
 * `model` must be NULL or a pointer from `tp_model_new*`, not used after.
 */
void tp_model_free(struct TpModel *model);

/**
 * State and control dimensions. Either out-pointer may be NULL to skip it.
 *
 * # Safety
 * `model` must be a live handle; non-NULL out-pointers must be writable.
 */
enum TpStatus tp_model_dims(const struct TpModel *model, size_t *n_state, size_t *n_control);

/**
 * Default horizon and time step of the model. Either out-pointer may be
 * NULL.
 *
 * # Safety
 * `model` must be a live handle; non-NULL out-pointers must be writable.
 */
enum TpStatus tp_model_defaults(const struct TpModel *model, double *horizon, double *dt);

/**
 * Solves the steady optimality system of the model.
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum TpStatus tp_solve_steady(const struct TpModel *model, struct TpSteady **out);

/**
 * # Safety
 * `steady` must be NULL or a pointer from `tp_solve_steady`, not used
 * after.
 */
void tp_steady_free(struct TpSteady *steady);

/**
 * Steady objective value.
 *
 * # Safety
 * `steady` must be a live handle; `out` must be writable.
 */
enum TpStatus tp_steady_objective(const struct TpSteady *steady, double *out);

/**
 * Copies the steady triple into caller buffers. `x_bar` and `lambda_bar`
 * must hold `n_state` doubles, `u_bar` must hold `n_control`; any of them
 * may be NULL to skip that component.
 *
 * # Safety
 * `steady` must be a live handle; non-NULL buffers must be writable at
 * the documented lengths.
 */
enum TpStatus tp_steady_values(const struct TpSteady *steady,
                               double *x_bar,
                               double *u_bar,
                               double *lambda_bar);

/**
 * Solves the finite-horizon problem from the model's initial state.
 * `dt <= 0` selects the model default. An iteration-capped solve still
 * succeeds; check `tp_trajectory_converged`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum TpStatus tp_solve_ocp(const struct TpModel *model,
                           double horizon,
                           double dt,
                           struct TpTrajectory **out);

/**
 * # Safety
 * `traj` must be NULL or a pointer from `tp_solve_ocp`, not used after.
 */
void tp_trajectory_free(struct TpTrajectory *traj);

/**
 * Number of grid nodes (steps + 1).
 *
 * # Safety
 * `traj` must be a live handle; `out` must be writable.
 */
enum TpStatus tp_trajectory_len(const struct TpTrajectory *traj, size_t *out);

/**
 * Whether the dynamic solver met its gradient tolerance.
 *
 * # Safety
 * `traj` must be a live handle; `out` must be writable.
 */
enum TpStatus tp_trajectory_converged(const struct TpTrajectory *traj, bool *out);

/**
 * Objective value of the solved trajectory.
 *
 * # Safety
 * `traj` must be a live handle; `out` must be writable.
 */
enum TpStatus tp_trajectory_objective(const struct TpTrajectory *traj, double *out);

/**
 * Copies the time grid into `buf`, which must hold `tp_trajectory_len`
 * doubles.
 *
 * # Safety
 * `traj` must be a live handle; `buf` must be writable at that length.
 */
enum TpStatus tp_trajectory_grid(const struct TpTrajectory *traj, double *buf);

/**
 * Copies node `k` of the trajectory: `state` and `adjoint` hold `n_state`
 * doubles, `control` holds `n_control`; any buffer may be NULL to skip.
 *
 * # Safety
 * `traj` must be a live handle; non-NULL buffers must be writable at the
 * documented lengths.
 */
enum TpStatus tp_trajectory_node(const struct TpTrajectory *traj,
                                 size_t k,
                                 double *state,
                                 double *control,
                                 double *adjoint);

/**
 * Runs a full experiment from a JSON document with the same schema the
 * CLI uses (model, horizons, epsilons, toggles, seed). `out_dir`
 * overrides the output root when non-NULL. On success and on
 * iteration-capped runs, bundles are written and, when `summary_json` is
 * non-NULL, a JSON summary is stored in it (caller-owned); the status is
 * `TP_STATUS_NO_CONVERGENCE` when some run hit its iteration cap.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; `out_dir` must be NULL or
 * NUL-terminated; `summary_json` must be NULL or a valid pointer.
 */
enum TpStatus tp_run_experiment(const char *spec_json, const char *out_dir, char **summary_json);

/**
 * Tracking target of the heat model on an `nx` by `ny` grid as
 * `x,y,value` CSV text (caller-owned).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TpStatus tp_reference_field_csv(size_t nx, size_t ny, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TURNPIKE_H */
