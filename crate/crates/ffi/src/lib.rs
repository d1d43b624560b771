//! C ABI for `staticgeo`.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` or
//! compute function and released by the matching `*_free`. Every fallible
//! call returns an [`SgStatus`]; on failure the message is kept per thread
//! and read back with [`sg_last_error_message`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use staticgeo::catalog::{self, SpacetimeSpec};
use staticgeo::connect::{minimize_action, ConnectOptions, ConnectResult, ConnectStatus};
use staticgeo::diagnostics::causal_arrival;
use staticgeo::manifold::DistanceOptions;
use staticgeo::ode::Termination;
use staticgeo::spacetime::{integrate_geodesic, GeodesicOptions, GeodesicState, GeodesicTrajectory, StaticSpacetime};
use staticgeo::Error;

/// Result code of every fallible call. The numeric values match the exit
/// codes of the command-line tool where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    NullArgument = 1,
    /// Bad input: unknown spacetime, point outside the domain, wrong dimension ...
    Validation = 2,
    /// Numerical failure such as step-size underflow.
    Numerical = 3,
    /// The endpoints cannot be joined.
    Diverged = 4,
    /// Internal error: a panic was caught at the boundary.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgConnectStatus {
    Geodesic = 0,
    Diverged = 1,
    MaxIter = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgTermination {
    ReachedSMax = 0,
    LeftDomain = 1,
    BlowUp = 2,
}

/// Scalars of a connection run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SgConnectSummary {
    /// `β ṫ` along the lifted curve.
    pub lambda: f64,
    /// `-β ṫ² + g_S(ẋ, ẋ)`.
    pub c: f64,
    pub j: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SgArrival {
    /// Earliest time at which a causal curve from the source reaches the target line.
    pub infimum_t: f64,
    pub attained: bool,
}

/// A catalog spacetime.
pub struct SgSpacetime(StaticSpacetime);

/// An integrated geodesic.
pub struct SgTrajectory(GeodesicTrajectory);

/// Outcome of a two-point connection.
pub struct SgConnection(ConnectResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() {
            SgStatus::Numerical
        } else if matches!(e, Error::Unreachable) {
            SgStatus::Diverged
        } else {
            SgStatus::Validation
        };
        Failure(code, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SgStatus::NullArgument, format!("`{what}` is null"))
}

fn set_error(msg: Option<String>) {
    let msg = msg.map(|m| CString::new(m.replace('\0', " ")).expect("no interior nul"));
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

/// Runs `f`, records its error message and turns panics into [`SgStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            SgStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(Some(msg));
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(Some(format!("panic: {msg}")));
            SgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SgStatus::NullArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn check_dim(st: &StaticSpacetime, n: usize) -> Result<(), Failure> {
    if n != st.dim() {
        return Err(Error::Dimension {
            expected: st.dim(),
            got: n,
        }
        .into());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The spacetime catalog as a JSON array; free with [`sg_string_free`].
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_catalog_json(out: *mut *mut c_char) -> SgStatus {
    guard(|| {
        let json = serde_json::to_string(&catalog::catalog_list()).map_err(Error::from)?;
        let s = CString::new(json).map_err(|e| Failure(SgStatus::Validation, e.to_string()))?;
        write(out, s.into_raw(), "out")
    })
}

/// Builds a catalog spacetime with default parameters.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_spacetime_new(name: *const c_char, out: *mut *mut SgSpacetime) -> SgStatus {
    guard(|| {
        let st = catalog::spacetime(str_arg(name, "name")?)?;
        write(out, Box::into_raw(Box::new(SgSpacetime(st))), "out")
    })
}

/// Builds a spacetime from a JSON spec such as
/// `{"name": "schwarzschild_exterior", "m": 2}`.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_spacetime_from_json(json: *const c_char, out: *mut *mut SgSpacetime) -> SgStatus {
    guard(|| {
        let spec: SpacetimeSpec = serde_json::from_str(str_arg(json, "json")?)
            .map_err(|e| Failure(SgStatus::Validation, format!("spacetime spec: {e}")))?;
        let st = catalog::build(&spec)?;
        write(out, Box::into_raw(Box::new(SgSpacetime(st))), "out")
    })
}

/// # Safety
/// `st` must be NULL or a handle from [`sg_spacetime_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_spacetime_free(st: *mut SgSpacetime) {
    if !st.is_null() {
        drop(Box::from_raw(st));
    }
}

/// Dimension of the spatial slice, 0 for a NULL handle.
///
/// # Safety
/// `st` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_spacetime_dim(st: *const SgSpacetime) -> usize {
    st.as_ref().map_or(0, |s| s.0.dim())
}

/// # Safety
/// `st` must be a live handle, `x` must hold `n` values and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_spacetime_beta(st: *const SgSpacetime, x: *const f64, n: usize, out: *mut f64) -> SgStatus {
    guard(|| {
        let st = &handle(st, "st")?.0;
        check_dim(st, n)?;
        let b = st.beta_at(slice_arg(x, n, "x")?)?;
        write(out, b, "out")
    })
}

/// # Safety
/// As [`sg_spacetime_beta`].
#[no_mangle]
pub unsafe extern "C" fn sg_spacetime_in_domain(
    st: *const SgSpacetime,
    x: *const f64,
    n: usize,
    out: *mut bool,
) -> SgStatus {
    guard(|| {
        let st = &handle(st, "st")?.0;
        check_dim(st, n)?;
        let inside = st.chart().in_domain(slice_arg(x, n, "x")?);
        write(out, inside, "out")
    })
}

/// Integrates the geodesic through `(t, x)` with velocity `(t_dot, x_dot)`
/// up to affine parameter `s_max`, or until it leaves the chart or blows up.
/// A non-positive `tol` selects the default.
///
/// # Safety
/// `st` must be a live handle, `x` and `x_dot` must hold `n` values, `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_geodesic_integrate(
    st: *const SgSpacetime,
    t: f64,
    x: *const f64,
    t_dot: f64,
    x_dot: *const f64,
    n: usize,
    s_max: f64,
    tol: f64,
    out: *mut *mut SgTrajectory,
) -> SgStatus {
    guard(|| {
        let st = &handle(st, "st")?.0;
        check_dim(st, n)?;
        let init = GeodesicState::new(t, slice_arg(x, n, "x")?, t_dot, slice_arg(x_dot, n, "x_dot")?);
        let mut opts = GeodesicOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        let tr = integrate_geodesic(st, &init, s_max, &opts)?;
        write(out, Box::into_raw(Box::new(SgTrajectory(tr))), "out")
    })
}

/// # Safety
/// `tr` must be NULL or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn sg_trajectory_free(tr: *mut SgTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Number of stored samples, 0 for a NULL handle.
///
/// # Safety
/// `tr` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_trajectory_len(tr: *const SgTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.0.samples.len())
}

/// Writes sample `i` as `s` and the packed state `[t, x…, ṫ, ẋ…]`
/// (`2 n + 2` values) into `state`.
///
/// # Safety
/// `tr` must be a live handle, `s` valid for writes and `state` valid for `state_len` writes.
#[no_mangle]
pub unsafe extern "C" fn sg_trajectory_sample(
    tr: *const SgTrajectory,
    i: usize,
    s: *mut f64,
    state: *mut f64,
    state_len: usize,
) -> SgStatus {
    guard(|| {
        let tr = &handle(tr, "tr")?.0;
        let smp = tr
            .samples
            .get(i)
            .ok_or_else(|| Failure(SgStatus::Validation, format!("sample {i} out of range")))?;
        let packed = smp.state.to_vec();
        if state.is_null() {
            return Err(null("state"));
        }
        if state_len < packed.len() {
            return Err(Failure(
                SgStatus::Validation,
                format!("state buffer holds {state_len} values, need {}", packed.len()),
            ));
        }
        ptr::copy_nonoverlapping(packed.as_ptr(), state, packed.len());
        write(s, smp.s, "s")
    })
}

/// Largest absolute drift of `λ` and `C` over the trajectory.
///
/// # Safety
/// `tr` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_trajectory_drift(tr: *const SgTrajectory, lambda: *mut f64, c: *mut f64) -> SgStatus {
    guard(|| {
        let tr = &handle(tr, "tr")?.0;
        write(lambda, tr.drift.lambda, "lambda")?;
        write(c, tr.drift.c, "c")
    })
}

/// How the run ended; `s_exit` receives the exit parameter, or the final
/// parameter when `s_max` was reached.
///
/// # Safety
/// `tr` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_trajectory_termination(
    tr: *const SgTrajectory,
    kind: *mut SgTermination,
    s_exit: *mut f64,
) -> SgStatus {
    guard(|| {
        let tr = &handle(tr, "tr")?.0;
        let (k, s) = match tr.termination {
            Termination::ReachedSMax => (SgTermination::ReachedSMax, tr.s_end()),
            Termination::LeftDomain { s_exit } => (SgTermination::LeftDomain, s_exit),
            Termination::BlowUp { s_exit } => (SgTermination::BlowUp, s_exit),
        };
        write(kind, k, "kind")?;
        write(s_exit, s, "s_exit")
    })
}

/// Seeks a geodesic from `(t0, x0)` to `(t0 + delta_t, x1)`. Divergence is a
/// result, not an error: check [`sg_connection_status`]. `segments == 0`
/// selects the default discretization.
///
/// # Safety
/// `st` must be a live handle, `x0` and `x1` must hold `n` values, `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_connect(
    st: *const SgSpacetime,
    x0: *const f64,
    x1: *const f64,
    n: usize,
    t0: f64,
    delta_t: f64,
    segments: usize,
    out: *mut *mut SgConnection,
) -> SgStatus {
    guard(|| {
        let st = &handle(st, "st")?.0;
        check_dim(st, n)?;
        let mut opts = ConnectOptions::default();
        if segments > 0 {
            opts.segments = segments;
        }
        let r = minimize_action(st, slice_arg(x0, n, "x0")?, slice_arg(x1, n, "x1")?, t0, delta_t, &opts)?;
        write(out, Box::into_raw(Box::new(SgConnection(r))), "out")
    })
}

/// # Safety
/// `c` must be NULL or a live connection handle.
#[no_mangle]
pub unsafe extern "C" fn sg_connection_free(c: *mut SgConnection) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_connection_status(c: *const SgConnection, out: *mut SgConnectStatus) -> SgStatus {
    guard(|| {
        let s = match handle(c, "c")?.0.status {
            ConnectStatus::Geodesic => SgConnectStatus::Geodesic,
            ConnectStatus::Diverged => SgConnectStatus::Diverged,
            ConnectStatus::MaxIter => SgConnectStatus::MaxIter,
        };
        write(out, s, "out")
    })
}

/// # Safety
/// `c` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_connection_summary(c: *const SgConnection, out: *mut SgConnectSummary) -> SgStatus {
    guard(|| {
        let r = &handle(c, "c")?.0;
        let summary = SgConnectSummary {
            lambda: r.lambda,
            c: r.c,
            j: r.j_value,
            residual: r.residual,
            iterations: r.iterations,
        };
        write(out, summary, "out")
    })
}

/// Number of curve nodes (segments + 1), 0 for a NULL handle.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_connection_len(c: *const SgConnection) -> usize {
    c.as_ref().map_or(0, |c| c.0.curve.segments() + 1)
}

/// Node `i` of the lifted curve: its time into `t` and `n` coordinates into `x`.
///
/// # Safety
/// `c` must be a live handle, `t` valid for writes and `x` valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn sg_connection_node(
    c: *const SgConnection,
    i: usize,
    t: *mut f64,
    x: *mut f64,
    n: usize,
) -> SgStatus {
    guard(|| {
        let r = &handle(c, "c")?.0;
        if i > r.curve.segments() {
            return Err(Failure(SgStatus::Validation, format!("node {i} out of range")));
        }
        let node = r.curve.node(i);
        if n != node.len() {
            return Err(Error::Dimension {
                expected: node.len(),
                got: n,
            }
            .into());
        }
        if x.is_null() {
            return Err(null("x"));
        }
        ptr::copy_nonoverlapping(node.as_ptr(), x, n);
        write(t, r.times[i], "t")
    })
}

/// Earliest arrival over the line `ℝ × {x_target}` of causal curves from `(t_p, x_p)`.
///
/// # Safety
/// `st` must be a live handle, `x_p` and `x_target` must hold `n` values, `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sg_causal_arrival(
    st: *const SgSpacetime,
    t_p: f64,
    x_p: *const f64,
    x_target: *const f64,
    n: usize,
    out: *mut SgArrival,
) -> SgStatus {
    guard(|| {
        let st = &handle(st, "st")?.0;
        check_dim(st, n)?;
        let a = causal_arrival(
            st,
            t_p,
            slice_arg(x_p, n, "x_p")?,
            slice_arg(x_target, n, "x_target")?,
            &DistanceOptions::default(),
        )?;
        let res = SgArrival {
            infimum_t: a.infimum_t,
            attained: a.attained,
        };
        write(out, res, "out")
    })
}
