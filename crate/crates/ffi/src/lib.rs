//! C interface to `switchsim`.
//!
//! Runs are opaque handles created by [`switchsim_run_new`] and released by
//! [`switchsim_run_free`]. Every fallible call returns a [`SwitchsimStatus`];
//! the message of the most recent failure on the calling thread is available
//! through [`switchsim_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use switchsim::measures::{measure_conditionals_with, MeasureOptions, MeasureReport};
use switchsim::phase_space::{wigner_parity, Bounds, GridSpec};
use switchsim::switch::{Branch, ControlQubit, SwitchOutcome, SwitchParams};
use switchsim::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchsimStatus {
    Ok = 0,
    InvalidParameter = 1,
    Convergence = 2,
    Degenerate = 3,
    Quadrature = 4,
    NullPointer = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchsimBranch {
    Plus = 0,
    Minus = 1,
}

impl From<SwitchsimBranch> for Branch {
    fn from(b: SwitchsimBranch) -> Self {
        match b {
            SwitchsimBranch::Plus => Branch::Plus,
            SwitchsimBranch::Minus => Branch::Minus,
        }
    }
}

/// Input parameters. `cutoff = 0` selects the automatic schedule and a
/// non-positive `leak_tol` the library default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwitchsimParams {
    pub r: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub phi: f64,
    pub cutoff: usize,
    pub leak_tol: f64,
}

/// Per-branch measures. NaN marks a value that was not computed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwitchsimMeasures {
    pub probability: f64,
    pub norm_sq: f64,
    pub delta_ng: f64,
    pub delta_nc: f64,
    pub cutoff: usize,
    pub degenerate: bool,
}

/// Opaque run handle.
pub struct SwitchsimRun {
    outcome: SwitchOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> SwitchsimStatus {
    match err {
        Error::InvalidParameter(_) | Error::Domain(_) => SwitchsimStatus::InvalidParameter,
        Error::Convergence { .. } => SwitchsimStatus::Convergence,
        Error::DegenerateOutcome { .. } => SwitchsimStatus::Degenerate,
        Error::Quadrature { .. } => SwitchsimStatus::Quadrature,
        _ => SwitchsimStatus::Internal,
    }
}

/// Run `f`, turning library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SwitchsimStatus, String)>) -> SwitchsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SwitchsimStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SwitchsimStatus::Internal
        }
    }
}

fn lib(err: Error) -> (SwitchsimStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (SwitchsimStatus, String) {
    (SwitchsimStatus::NullPointer, format!("{what} is null"))
}

fn to_params(p: &SwitchsimParams) -> SwitchParams {
    let mut out = SwitchParams::new(p.r, p.x, p.y);
    out.control = ControlQubit {
        theta: p.theta,
        phi: p.phi,
    };
    if p.cutoff > 0 {
        out.cutoff = Some(p.cutoff);
    }
    if p.leak_tol > 0.0 {
        out.leak_tol = p.leak_tol;
    }
    out
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn switchsim_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Balanced control and library tolerances for the given `(r, x, y)`.
#[no_mangle]
pub extern "C" fn switchsim_params_default(r: f64, x: f64, y: f64) -> SwitchsimParams {
    let d = SwitchParams::new(r, x, y);
    SwitchsimParams {
        r,
        x,
        y,
        theta: d.control.theta,
        phi: d.control.phi,
        cutoff: 0,
        leak_tol: d.leak_tol,
    }
}

/// Copy the last error message of this thread into `buf` (truncated, always
/// NUL-terminated when `len > 0`). Returns the full message length without
/// the terminator, 0 if there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn switchsim_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Simulate the switch. On success `*out` owns a new handle.
///
/// # Safety
/// `params` must point to a valid struct and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn switchsim_run_new(params: *const SwitchsimParams, out: *mut *mut SwitchsimRun) -> SwitchsimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let outcome = switchsim::switch::run_switch(&to_params(params)).map_err(lib)?;
        *out = Box::into_raw(Box::new(SwitchsimRun { outcome }));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle from [`switchsim_run_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn switchsim_run_free(run: *mut SwitchsimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Branch probabilities `p₊`, `p₋`.
///
/// # Safety
/// `run` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn switchsim_run_probabilities(
    run: *const SwitchsimRun,
    p_plus: *mut f64,
    p_minus: *mut f64,
) -> SwitchsimStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let (pp, pm) = (p_plus.as_mut().ok_or_else(|| null("p_plus"))?, p_minus.as_mut().ok_or_else(|| null("p_minus"))?);
        *pp = run.outcome.plus.probability;
        *pm = run.outcome.minus.probability;
        Ok(())
    })
}

/// Fock cutoff of the run and its basis frame `D(c) S(s)|n⟩`.
///
/// # Safety
/// `run` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn switchsim_run_basis(
    run: *const SwitchsimRun,
    cutoff: *mut usize,
    squeeze: *mut f64,
    center_re: *mut f64,
    center_im: *mut f64,
) -> SwitchsimStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let f = run.outcome.frame;
        *cutoff.as_mut().ok_or_else(|| null("cutoff"))? = run.outcome.cutoff;
        *squeeze.as_mut().ok_or_else(|| null("squeeze"))? = f.squeeze;
        *center_re.as_mut().ok_or_else(|| null("center_re"))? = f.center.re;
        *center_im.as_mut().ok_or_else(|| null("center_im"))? = f.center.im;
        Ok(())
    })
}

/// Copy the normalized branch amplitudes in the run's basis as interleaved
/// `re, im` pairs. `*count` receives the number of amplitudes (cutoff + 1);
/// pass `buf = NULL` to query it. `len` is the capacity in doubles.
///
/// # Safety
/// `run` must be a live handle, `count` writable, and `buf` null or valid
/// for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn switchsim_run_amplitudes(
    run: *const SwitchsimRun,
    branch: SwitchsimBranch,
    buf: *mut f64,
    len: usize,
    count: *mut usize,
) -> SwitchsimStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let count = count.as_mut().ok_or_else(|| null("count"))?;
        let b = run.outcome.branch(branch.into());
        let state = b.state.as_ref().ok_or_else(|| lib(Error::DegenerateOutcome { branch: b.branch, norm_sq: b.norm_sq }))?;
        let amps = state.amplitudes();
        *count = amps.len();
        if buf.is_null() {
            return Ok(());
        }
        if len < 2 * amps.len() {
            return Err((SwitchsimStatus::BufferTooSmall, format!("need {} doubles, got {len}", 2 * amps.len())));
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * amps.len());
        for (pair, a) in out.chunks_exact_mut(2).zip(amps) {
            pair[0] = a.re;
            pair[1] = a.im;
        }
        Ok(())
    })
}

/// Wigner function of a branch at one lab-frame point.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn switchsim_run_wigner_at(
    run: *const SwitchsimRun,
    branch: SwitchsimBranch,
    q: f64,
    p: f64,
    out: *mut f64,
) -> SwitchsimStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let b = run.outcome.branch(branch.into());
        let state = b.state.as_ref().ok_or_else(|| lib(Error::DegenerateOutcome { branch: b.branch, norm_sq: b.norm_sq }))?;
        *out = wigner_parity(state, q, p).map_err(lib)?;
        Ok(())
    })
}

fn fill(m: &MeasureReport) -> SwitchsimMeasures {
    SwitchsimMeasures {
        probability: m.probability,
        norm_sq: m.norm_sq,
        delta_ng: m.delta_ng.unwrap_or(f64::NAN),
        delta_nc: m.delta_nc.unwrap_or(f64::NAN),
        cutoff: m.cutoff_used,
        degenerate: m.degenerate,
    }
}

/// Non-Gaussianity and (unless `ng_only`) non-classicality of both branches
/// on an `n_q × n_p` grid with automatic bounds; zero counts pick the default
/// grid.
///
/// # Safety
/// `params` must be valid; `plus` and `minus` writable.
#[no_mangle]
pub unsafe extern "C" fn switchsim_measures(
    params: *const SwitchsimParams,
    ng_only: bool,
    n_q: usize,
    n_p: usize,
    plus: *mut SwitchsimMeasures,
    minus: *mut SwitchsimMeasures,
) -> SwitchsimStatus {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let (plus, minus) = (plus.as_mut().ok_or_else(|| null("plus"))?, minus.as_mut().ok_or_else(|| null("minus"))?);
        let grid = match (n_q, n_p) {
            (0, 0) => GridSpec::default(),
            (nq, np) => GridSpec::new(nq, np, Bounds::Auto),
        };
        let opts = MeasureOptions {
            grid,
            ng_only,
            ..Default::default()
        };
        let (a, b) = measure_conditionals_with(&to_params(params), &opts).map_err(lib)?;
        *plus = fill(&a);
        *minus = fill(&b);
        Ok(())
    })
}
