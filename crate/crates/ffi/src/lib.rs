//! C ABI over the solvers and the report pipeline.
//!
//! Conventions: every fallible call returns a [`TpStatus`]; out-parameters
//! are written only on `TP_STATUS_OK` (the one exception is documented on
//! [`tp_run_experiment`]). Handles are opaque and released with their
//! matching `_free`, which accepts NULL. Strings returned through
//! `*mut c_char` out-parameters are owned by the caller and released with
//! [`tp_string_free`]. Error details of the most recent failing call on
//! the current thread come from [`tp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use turnpike::dynamic::{solve_ocp, SolveOptions};
use turnpike::model::{SteadyOptimum, Trajectory};
use turnpike::registry::{build_model, BuiltModel, ModelConfig};
use turnpike::report::{run_experiment, ExperimentSpec};
use turnpike::steady::{solve_steady, SteadyOptions};
use turnpike::Error;

/// Call outcome. Non-zero values carry a thread-local message readable via
/// `tp_last_error`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    /// Malformed arguments, configuration, or input files.
    UsageError = 2,
    /// An iterative solver ran out of iterations or a step failed.
    NoConvergence = 3,
    /// A structural assumption of the requested computation is violated.
    AssumptionViolated = 4,
    /// Internal numerical failure or panic.
    RuntimeError = 5,
    /// A required pointer argument was NULL.
    NullArgument = 6,
}

/// A built model: dynamics, cost, initial state, defaults.
pub struct TpModel {
    built: BuiltModel,
}

/// A steady optimality triple with its residuals.
pub struct TpSteady {
    steady: SteadyOptimum,
}

/// A solved finite-horizon trajectory on a uniform grid.
pub struct TpTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(e: &Error) -> TpStatus {
    set_error(e.to_string());
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch(_) | Error::Config(_) | Error::Io(_) => {
            TpStatus::UsageError
        }
        Error::NoConvergence(_) | Error::StiffStep(_) => TpStatus::NoConvergence,
        Error::NotSeparated(_) | Error::NotApplicable(_) => TpStatus::AssumptionViolated,
        _ => TpStatus::RuntimeError,
    }
}

fn null_arg(which: &str) -> TpStatus {
    set_error(format!("{which} must not be NULL"));
    TpStatus::NullArgument
}

/// Runs `f`, converting panics into `TP_STATUS_RUNTIME_ERROR` instead of
/// unwinding across the C boundary.
fn guarded(f: impl FnOnce() -> TpStatus) -> TpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".into());
            TpStatus::RuntimeError
        }
    }
}

/// # Safety
/// `p` must be NULL or a NUL-terminated string valid for the call.
unsafe fn str_arg<'a>(p: *const c_char, which: &str) -> Result<&'a str, TpStatus> {
    if p.is_null() {
        return Err(null_arg(which));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{which} is not valid UTF-8"));
        TpStatus::UsageError
    })
}

fn string_out(text: String) -> *mut c_char {
    CString::new(text)
        .unwrap_or_else(|_| CString::new("").unwrap())
        .into_raw()
}

/// Version of the library as a static NUL-terminated string. Never freed.
#[no_mangle]
pub extern "C" fn tp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failing call on this thread, or NULL when no
/// call has failed yet. The caller owns the string.
#[no_mangle]
pub extern "C" fn tp_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => string_out(msg.to_string_lossy().into_owned()),
        None => std::ptr::null_mut(),
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned by a `tp_` function
/// documented as caller-owned, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a registered model by name (`lq1d`, `lq-tracking`, `no-turnpike`,
/// `heat2d`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_model_new_named(name: *const c_char, out: *mut *mut TpModel) -> TpStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let name = match str_arg(name, "name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config = match ModelConfig::by_name(name) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        match build_model(&config) {
            Ok(built) => {
                *out = Box::into_raw(Box::new(TpModel { built }));
                TpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Builds a model from a JSON configuration document (the same schema the
/// CLI accepts via `--config`).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_model_new(config_json: *const c_char, out: *mut *mut TpModel) -> TpStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let text = match str_arg(config_json, "config_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config: ModelConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(&Error::Config(format!("model configuration: {e}"))),
        };
        match build_model(&config) {
            Ok(built) => {
                *out = Box::into_raw(Box::new(TpModel { built }));
                TpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `model` must be NULL or a pointer from `tp_model_new*`, not used after.
#[no_mangle]
pub unsafe extern "C" fn tp_model_free(model: *mut TpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State and control dimensions. Either out-pointer may be NULL to skip it.
///
/// # Safety
/// `model` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_model_dims(
    model: *const TpModel,
    n_state: *mut usize,
    n_control: *mut usize,
) -> TpStatus {
    if model.is_null() {
        return null_arg("model");
    }
    let built = &(*model).built;
    if !n_state.is_null() {
        *n_state = built.system.n_state();
    }
    if !n_control.is_null() {
        *n_control = built.system.n_control();
    }
    TpStatus::Ok
}

/// Default horizon and time step of the model. Either out-pointer may be
/// NULL.
///
/// # Safety
/// `model` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_model_defaults(
    model: *const TpModel,
    horizon: *mut f64,
    dt: *mut f64,
) -> TpStatus {
    if model.is_null() {
        return null_arg("model");
    }
    let built = &(*model).built;
    if !horizon.is_null() {
        *horizon = built.default_horizon;
    }
    if !dt.is_null() {
        *dt = built.default_dt;
    }
    TpStatus::Ok
}

/// Solves the steady optimality system of the model.
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_solve_steady(model: *const TpModel, out: *mut *mut TpSteady) -> TpStatus {
    guarded(|| {
        if model.is_null() {
            return null_arg("model");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let built = &(*model).built;
        match solve_steady(&built.system, &built.cost, &SteadyOptions::default()) {
            Ok(steady) => {
                *out = Box::into_raw(Box::new(TpSteady { steady }));
                TpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `steady` must be NULL or a pointer from `tp_solve_steady`, not used
/// after.
#[no_mangle]
pub unsafe extern "C" fn tp_steady_free(steady: *mut TpSteady) {
    if !steady.is_null() {
        drop(Box::from_raw(steady));
    }
}

/// Steady objective value.
///
/// # Safety
/// `steady` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_steady_objective(steady: *const TpSteady, out: *mut f64) -> TpStatus {
    if steady.is_null() {
        return null_arg("steady");
    }
    if out.is_null() {
        return null_arg("out");
    }
    *out = (*steady).steady.objective;
    TpStatus::Ok
}

unsafe fn copy_vec(src: &turnpike::model::Vector, dst: *mut f64) {
    if !dst.is_null() {
        std::ptr::copy_nonoverlapping(src.as_slice().as_ptr(), dst, src.len());
    }
}

/// Copies the steady triple into caller buffers. `x_bar` and `lambda_bar`
/// must hold `n_state` doubles, `u_bar` must hold `n_control`; any of them
/// may be NULL to skip that component.
///
/// # Safety
/// `steady` must be a live handle; non-NULL buffers must be writable at
/// the documented lengths.
#[no_mangle]
pub unsafe extern "C" fn tp_steady_values(
    steady: *const TpSteady,
    x_bar: *mut f64,
    u_bar: *mut f64,
    lambda_bar: *mut f64,
) -> TpStatus {
    if steady.is_null() {
        return null_arg("steady");
    }
    let s = &(*steady).steady;
    copy_vec(&s.x_bar, x_bar);
    copy_vec(&s.u_bar, u_bar);
    copy_vec(&s.lambda_bar, lambda_bar);
    TpStatus::Ok
}

/// Solves the finite-horizon problem from the model's initial state.
/// `dt <= 0` selects the model default. An iteration-capped solve still
/// succeeds; check `tp_trajectory_converged`.
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_solve_ocp(
    model: *const TpModel,
    horizon: f64,
    dt: f64,
    out: *mut *mut TpTrajectory,
) -> TpStatus {
    guarded(|| {
        if model.is_null() {
            return null_arg("model");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let built = &(*model).built;
        let opts = SolveOptions {
            dt: if dt > 0.0 { dt } else { built.default_dt },
            ..SolveOptions::default()
        };
        match solve_ocp(&built.system, &built.cost, &built.x0, horizon, &opts) {
            Ok(traj) => {
                *out = Box::into_raw(Box::new(TpTrajectory { traj }));
                TpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `traj` must be NULL or a pointer from `tp_solve_ocp`, not used after.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_free(traj: *mut TpTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of grid nodes (steps + 1).
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_len(traj: *const TpTrajectory, out: *mut usize) -> TpStatus {
    if traj.is_null() {
        return null_arg("traj");
    }
    if out.is_null() {
        return null_arg("out");
    }
    *out = (*traj).traj.grid.len();
    TpStatus::Ok
}

/// Whether the dynamic solver met its gradient tolerance.
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_converged(traj: *const TpTrajectory, out: *mut bool) -> TpStatus {
    if traj.is_null() {
        return null_arg("traj");
    }
    if out.is_null() {
        return null_arg("out");
    }
    *out = (*traj).traj.info.converged;
    TpStatus::Ok
}

/// Objective value of the solved trajectory.
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_objective(traj: *const TpTrajectory, out: *mut f64) -> TpStatus {
    if traj.is_null() {
        return null_arg("traj");
    }
    if out.is_null() {
        return null_arg("out");
    }
    *out = (*traj).traj.info.objective;
    TpStatus::Ok
}

/// Copies the time grid into `buf`, which must hold `tp_trajectory_len`
/// doubles.
///
/// # Safety
/// `traj` must be a live handle; `buf` must be writable at that length.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_grid(traj: *const TpTrajectory, buf: *mut f64) -> TpStatus {
    if traj.is_null() {
        return null_arg("traj");
    }
    if buf.is_null() {
        return null_arg("buf");
    }
    let grid = &(*traj).traj.grid;
    std::ptr::copy_nonoverlapping(grid.as_ptr(), buf, grid.len());
    TpStatus::Ok
}

/// Copies node `k` of the trajectory: `state` and `adjoint` hold `n_state`
/// doubles, `control` holds `n_control`; any buffer may be NULL to skip.
///
/// # Safety
/// `traj` must be a live handle; non-NULL buffers must be writable at the
/// documented lengths.
#[no_mangle]
pub unsafe extern "C" fn tp_trajectory_node(
    traj: *const TpTrajectory,
    k: usize,
    state: *mut f64,
    control: *mut f64,
    adjoint: *mut f64,
) -> TpStatus {
    if traj.is_null() {
        return null_arg("traj");
    }
    let t = &(*traj).traj;
    if k >= t.grid.len() {
        set_error(format!("node index {k} out of range 0..{}", t.grid.len()));
        return TpStatus::UsageError;
    }
    copy_vec(&t.states[k], state);
    copy_vec(&t.controls[k], control);
    copy_vec(&t.adjoints[k], adjoint);
    TpStatus::Ok
}

/// Runs a full experiment from a JSON document with the same schema the
/// CLI uses (model, horizons, epsilons, toggles, seed). `out_dir`
/// overrides the output root when non-NULL. On success and on
/// iteration-capped runs, bundles are written and, when `summary_json` is
/// non-NULL, a JSON summary is stored in it (caller-owned); the status is
/// `TP_STATUS_NO_CONVERGENCE` when some run hit its iteration cap.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out_dir` must be NULL or
/// NUL-terminated; `summary_json` must be NULL or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_run_experiment(
    spec_json: *const c_char,
    out_dir: *const c_char,
    summary_json: *mut *mut c_char,
) -> TpStatus {
    guarded(|| {
        let text = match str_arg(spec_json, "spec_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mut spec: ExperimentSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail(&Error::Config(format!("experiment spec: {e}"))),
        };
        if !out_dir.is_null() {
            match str_arg(out_dir, "out_dir") {
                Ok(dir) => spec.out = Some(PathBuf::from(dir)),
                Err(status) => return status,
            }
        }
        let summary = match run_experiment(&spec) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        if !summary_json.is_null() {
            let rows: Vec<serde_json::Value> = summary
                .runs
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "horizon": r.horizon,
                        "dir": r.dir.display().to_string(),
                        "nu": r.report.turnpike.state_intervals[0].length,
                        "theta": r.report.turnpike.adjoint_intervals[0].length,
                        "converged": r.report.converged,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "out_root": summary.out_root.display().to_string(),
                "all_converged": summary.all_converged,
                "runs": rows,
            });
            *summary_json = string_out(doc.to_string());
        }
        if summary.all_converged {
            TpStatus::Ok
        } else {
            set_error("some runs hit the iteration cap; bundles carry converged=false".into());
            TpStatus::NoConvergence
        }
    })
}

/// Tracking target of the heat model on an `nx` by `ny` grid as
/// `x,y,value` CSV text (caller-owned).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_reference_field_csv(nx: usize, ny: usize, out: *mut *mut c_char) -> TpStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let config = turnpike::heat::HeatConfig { nx, ny, ..Default::default() };
        let field = match turnpike::heat::reference_field(&config) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        };
        let mut text = String::from("x,y,value\n");
        for i in 0..=nx {
            for j in 0..=ny {
                let x = config.lx * i as f64 / nx as f64;
                let y = config.ly * j as f64 / ny as f64;
                text.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", x, y, field.values[i * (ny + 1) + j]));
            }
        }
        *out = string_out(text);
        TpStatus::Ok
    })
}
