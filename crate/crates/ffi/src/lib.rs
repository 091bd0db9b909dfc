//! C interface to the `dgdae` integrators.
//!
//! Objects are opaque handles created by `*_new`/[`dgdae_integrate`] and
//! released with the matching `*_free`. Every fallible function returns a
//! [`DgdaeStatus`]; on failure a description is available from
//! [`dgdae_last_error_message`] on the same thread. Panics never cross the
//! boundary and are reported as [`DgdaeStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use dgdae::cli::write_csv;
use dgdae::problems::{self, ProblemSpec};
use dgdae::{integrate, Error, Matrix, NewtonConfig, Scheme, Trajectory, Vector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgdaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    UnknownProblem = 4,
    UnknownScheme = 5,
    IncompatibleScheme = 6,
    /// The integration stopped early; a partial trajectory may still be
    /// returned.
    SolverFailure = 7,
    NumericalFailure = 8,
    Io = 9,
    Panic = 10,
}

/// A built-in problem instance.
pub struct DgdaeProblem {
    spec: ProblemSpec,
}

/// The records of one integration run.
pub struct DgdaeTrajectory {
    traj: Trajectory,
    dim: usize,
    extra_names: Vec<String>,
    failed_step: Option<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> DgdaeStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::NonSquare { .. } => DgdaeStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::NonFinite(_) => DgdaeStatus::InvalidArgument,
        Error::UnknownProblem(_) => DgdaeStatus::UnknownProblem,
        Error::UnknownScheme(_) => DgdaeStatus::UnknownScheme,
        Error::IncompatibleScheme { .. } => DgdaeStatus::IncompatibleScheme,
        Error::NoConvergence { .. } | Error::SingularJacobian | Error::UnderdeterminedSystem => {
            DgdaeStatus::SolverFailure
        }
        Error::Io(_) => DgdaeStatus::Io,
        _ => DgdaeStatus::NumericalFailure,
    }
}

struct Failure(DgdaeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DgdaeStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DgdaeStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DgdaeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            DgdaeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DgdaeStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn buf_arg<'a>(p: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != expected {
        return Err(Error::DimensionMismatch { expected, got: len }.into());
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dgdae_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn dgdae_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds the named problem. `grid` selects the sinh-gordon grid size (0 for
/// the default) and must be 0 for the other problems; `seed` selects the
/// smhs initial state.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgdae_problem_new(
    name: *const c_char,
    grid: usize,
    seed: u64,
    out: *mut *mut DgdaeProblem,
) -> DgdaeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let name = str_arg(name, "name")?;
        let spec = problems::by_name(name, (grid > 0).then_some(grid), seed)?;
        *out = Box::into_raw(Box::new(DgdaeProblem { spec }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`dgdae_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dgdae_problem_free(problem: *mut DgdaeProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgdae_problem_dim(problem: *const DgdaeProblem, out: *mut usize) -> DgdaeStatus {
    guard(|| {
        let p = ref_arg(problem, "problem")?;
        *out_arg(out, "out")? = p.spec.dim();
        Ok(())
    })
}

/// Copies the default initial state into `buf`, which must hold exactly
/// `dgdae_problem_dim` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dgdae_problem_initial_state(
    problem: *const DgdaeProblem,
    buf: *mut f64,
    len: usize,
) -> DgdaeStatus {
    guard(|| {
        let p = ref_arg(problem, "problem")?;
        let z0 = &p.spec.default_initial_state;
        buf_arg(buf, len, z0.len(), "buf")?.copy_from_slice(z0.as_slice());
        Ok(())
    })
}

/// Integrates `problem` for `steps` steps of size `dt`.
///
/// `scheme` NULL selects the problem's recommended scheme; `z0` NULL its
/// default initial state (otherwise `z0_len` must equal the dimension).
/// `newton_tol <= 0` and `newton_max_iters == 0` keep the defaults.
///
/// On [`DgdaeStatus::SolverFailure`] during stepping, `*out` still receives
/// the partial trajectory, which the caller must free.
///
/// # Safety
/// Pointers must be valid as described; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dgdae_integrate(
    problem: *const DgdaeProblem,
    scheme: *const c_char,
    z0: *const f64,
    z0_len: usize,
    dt: f64,
    steps: usize,
    newton_tol: f64,
    newton_max_iters: usize,
    out: *mut *mut DgdaeTrajectory,
) -> DgdaeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let spec = &ref_arg(problem, "problem")?.spec;
        let scheme = if scheme.is_null() {
            spec.recommended_scheme
        } else {
            str_arg(scheme, "scheme")?.parse::<Scheme>()?
        };
        let start = if z0.is_null() {
            spec.default_initial_state.clone()
        } else {
            if z0_len != spec.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    got: z0_len,
                }
                .into());
            }
            Vector::from_column_slice(slice::from_raw_parts(z0, z0_len))
        };
        let mut cfg = NewtonConfig::default();
        if newton_tol > 0.0 {
            cfg.residual_tol = newton_tol;
        }
        if newton_max_iters > 0 {
            cfg.max_iters = newton_max_iters;
        }
        let method = spec.method(scheme)?;
        let observers = spec.observers();
        let extra_names = spec.extras.iter().map(|e| e.name().to_string()).collect();
        let (traj, failure) = match integrate(method.as_ref(), &start, dt, steps, &observers, &cfg) {
            Ok(t) => (t, None),
            Err(f) if f.partial.is_empty() => return Err(f.error.into()),
            Err(f) => (f.partial, Some((f.step, f.error))),
        };
        *out = Box::into_raw(Box::new(DgdaeTrajectory {
            traj,
            dim: spec.dim(),
            extra_names,
            failed_step: failure.as_ref().map(|(s, _)| *s),
        }));
        match failure {
            None => Ok(()),
            Some((step, e)) => Err(Failure(status_of(&e), format!("step {step} failed: {e}"))),
        }
    })
}

/// # Safety
/// `traj` must come from [`dgdae_integrate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dgdae_trajectory_free(traj: *mut DgdaeTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of records, including the initial state.
///
/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgdae_trajectory_len(traj: *const DgdaeTrajectory, out: *mut usize) -> DgdaeStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(traj, "traj")?.traj.len();
        Ok(())
    })
}

/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgdae_trajectory_dim(traj: *const DgdaeTrajectory, out: *mut usize) -> DgdaeStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(traj, "traj")?.dim;
        Ok(())
    })
}

/// Index of the step that failed, or -1 for a complete run.
///
/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgdae_trajectory_failed_step(traj: *const DgdaeTrajectory, out: *mut i64) -> DgdaeStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(traj, "traj")?.failed_step.map_or(-1, |s| s as i64);
        Ok(())
    })
}

unsafe fn record<'a>(traj: *const DgdaeTrajectory, index: usize) -> Result<&'a dgdae::StepRecord, Failure> {
    let t = ref_arg(traj, "traj")?;
    t.traj.records.get(index).ok_or_else(|| {
        Failure(
            DgdaeStatus::InvalidArgument,
            format!("record {index} out of range (length {})", t.traj.len()),
        )
    })
}

/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgdae_trajectory_time(
    traj: *const DgdaeTrajectory,
    index: usize,
    out: *mut f64,
) -> DgdaeStatus {
    guard(|| {
        *out_arg(out, "out")? = record(traj, index)?.time;
        Ok(())
    })
}

/// Copies the state of record `index` into `buf` (exactly `dim` values).
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dgdae_trajectory_state(
    traj: *const DgdaeTrajectory,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> DgdaeStatus {
    guard(|| {
        let state = &record(traj, index)?.state;
        buf_arg(buf, len, state.len(), "buf")?.copy_from_slice(state.as_slice());
        Ok(())
    })
}

/// Value of the named invariant (the primary `V` or an extra such as `H`)
/// at record `index`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgdae_trajectory_invariant(
    traj: *const DgdaeTrajectory,
    index: usize,
    name: *const c_char,
    out: *mut f64,
) -> DgdaeStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let rec = record(traj, index)?;
        let value = rec
            .invariant(name)
            .ok_or_else(|| Failure(DgdaeStatus::InvalidArgument, format!("no invariant named `{name}`")))?;
        *out_arg(out, "out")? = value;
        Ok(())
    })
}

/// Writes the trajectory in the CLI's CSV format. `snapshot_every == 0`
/// writes every record.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dgdae_trajectory_write_csv(
    traj: *const DgdaeTrajectory,
    path: *const c_char,
    snapshot_every: usize,
) -> DgdaeStatus {
    guard(|| {
        let t = ref_arg(traj, "traj")?;
        let path = str_arg(path, "path")?;
        let io = |e: std::io::Error| Failure(DgdaeStatus::Io, format!("cannot write {path}: {e}"));
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let names: Vec<&str> = t.extra_names.iter().map(String::as_str).collect();
        write_csv(&mut w, &names, &t.traj, (snapshot_every > 0).then_some(snapshot_every)).map_err(io)?;
        if let Some(step) = t.failed_step {
            writeln!(w, "# failed at step {step}").map_err(io)?;
        }
        w.flush().map_err(io)
    })
}

/// Moore–Penrose pseudoinverse of the row-major `d×d` matrix `a`, written
/// row-major to `out`. `rank` may be NULL.
///
/// # Safety
/// `a` and `out` must each point to `d*d` doubles.
#[no_mangle]
pub unsafe extern "C" fn dgdae_pseudo_inverse(a: *const f64, d: usize, out: *mut f64, rank: *mut usize) -> DgdaeStatus {
    guard(|| {
        if a.is_null() {
            return Err(null("a"));
        }
        let n = d.checked_mul(d).ok_or_else(|| Failure(DgdaeStatus::InvalidArgument, "d*d overflows".into()))?;
        let m = Matrix::from_row_slice(d, d, slice::from_raw_parts(a, n));
        let sub = dgdae::pseudo_inverse(&m, None)?;
        let dst = buf_arg(out, n, n, "out")?;
        for (k, x) in dst.iter_mut().enumerate() {
            *x = sub.pinv[(k / d, k % d)];
        }
        if let Some(r) = rank.as_mut() {
            *r = sub.rank;
        }
        Ok(())
    })
}
