//! C interface to `wavefront`.
//!
//! Every function returns a [`WfStatus`]. On failure the message is kept per
//! thread and can be read with [`wf_last_error`] until the next failing call.
//! Scenarios and runs are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use wavefront::cli::config::{self, Scenario};
use wavefront::evolve::{simulate, RunRecord};
use wavefront::fronts::{level_position, FrontSide};
use wavefront::gridfn::{ExtensionPolicy, Grid, GridFunction};
use wavefront::kernels::Kernel;
use wavefront::speeds::{self, DispersionParams, Side};
use wavefront::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Range = 4,
    Runtime = 5,
    Panic = 6,
}

/// Which side of a profile a level crossing is searched from.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfFrontSide {
    Rightmost = 0,
    Leftmost = 1,
}

/// Branch of the dispersion relation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfSide {
    Plus = 0,
    Minus = 1,
}

/// A parsed scenario file.
pub struct WfScenario {
    inner: Scenario,
}

/// The recorded frames of one simulation.
pub struct WfRun {
    inner: RunRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WfStatus {
    match e {
        Error::Domain(_) => WfStatus::Domain,
        Error::Range(_) => WfStatus::Range,
        Error::Precondition(_) | Error::Config { .. } => WfStatus::InvalidArgument,
        _ => WfStatus::Runtime,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WfStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            WfStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            WfStatus::InvalidArgument
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            WfStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: caller guarantees `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn kernel(alpha: f64) -> Result<Kernel, Fail> {
    if alpha == 0.0 {
        Ok(Kernel::dirac())
    } else {
        Ok(Kernel::gaussian(alpha)?)
    }
}

fn side(s: WfSide) -> Side {
    match s {
        WfSide::Plus => Side::Plus,
        WfSide::Minus => Side::Minus,
    }
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn wf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Spreading speed of the local KPP delay equation, `2 sqrt(mu d (f'(0) - 1))`,
/// zero when `f'(0) <= 1`.
#[no_mangle]
pub extern "C" fn wf_kpp_local_speed(d: f64, mu: f64, fprime0: f64, speed: *mut f64) -> WfStatus {
    guard(|| {
        *out(speed, "speed")? = speeds::kpp_local_speed(d, mu, fprime0)?.value;
        Ok(())
    })
}

/// `2 sqrt(d h'(0))`.
#[no_mangle]
pub extern "C" fn wf_kpp_rd_speed(d: f64, hprime0: f64, speed: *mut f64) -> WfStatus {
    guard(|| {
        *out(speed, "speed")? = speeds::kpp_rd_speed(d, hprime0)?;
        Ok(())
    })
}

/// `inf_rho ln l(c, rho) / rho` for a Gaussian kernel of width `alpha`
/// (`alpha = 0` selects the point mass). `argmin_rho` may be null.
#[no_mangle]
pub extern "C" fn wf_dispersion_speed(
    d: f64,
    mu: f64,
    tau: f64,
    fprime0: f64,
    alpha: f64,
    c: f64,
    branch: WfSide,
    speed: *mut f64,
    argmin_rho: *mut f64,
) -> WfStatus {
    guard(|| {
        let speed = out(speed, "speed")?;
        let p = DispersionParams::new(d, mu, tau, fprime0, kernel(alpha)?)?;
        let m = speeds::dispersion_speed(&p, c, side(branch))?;
        *speed = m.speed;
        if let Some(r) = unsafe { argmin_rho.as_mut() } {
            *r = m.argmin_rho;
        }
        Ok(())
    })
}

/// Minimal wave speed from both branches. `c_star_dual` may be null.
#[no_mangle]
pub extern "C" fn wf_min_wave_speed(
    d: f64,
    mu: f64,
    tau: f64,
    fprime0: f64,
    alpha: f64,
    c_star: *mut f64,
    c_star_dual: *mut f64,
) -> WfStatus {
    guard(|| {
        let c_star = out(c_star, "c_star")?;
        let p = DispersionParams::new(d, mu, tau, fprime0, kernel(alpha)?)?;
        let w = speeds::min_wave_speed(&p)?;
        *c_star = w.c_star;
        if let Some(r) = unsafe { c_star_dual.as_mut() } {
            *r = w.c_star_dual;
        }
        Ok(())
    })
}

/// Parses a scenario document. Schema errors report `WF_STATUS_INVALID_ARGUMENT`
/// with the JSON pointer in the message.
///
/// # Safety
/// `json` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wf_scenario_from_json(json: *const c_char, scenario: *mut *mut WfScenario) -> WfStatus {
    guard(|| {
        let slot = out(scenario, "scenario")?;
        *slot = std::ptr::null_mut();
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Fail::Arg(format!("json is not UTF-8: {e}")))?;
        let inner = config::parse(text)?;
        inner.model_spec()?;
        inner.grid()?;
        *slot = Box::into_raw(Box::new(WfScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or come from [`wf_scenario_from_json`], freed once.
#[no_mangle]
pub unsafe extern "C" fn wf_scenario_free(scenario: *mut WfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario's `initial` and `run` sections. Tabulated initial data is
/// read relative to the working directory.
///
/// # Safety
/// `scenario` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn wf_scenario_simulate(scenario: *const WfScenario, run: *mut *mut WfRun) -> WfStatus {
    guard(|| {
        let slot = out(run, "run")?;
        *slot = std::ptr::null_mut();
        let s = &scenario.as_ref().ok_or(Fail::Null("scenario"))?.inner;
        let model = s.model_spec()?;
        s.check_width()?;
        let opts = s.sim_options()?;
        let u0 = s.initial(&model, Path::new("."))?;
        let inner = simulate(&model, u0, s.run()?.t_end, &opts, &mut [])?;
        *slot = Box::into_raw(Box::new(WfRun { inner }));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or come from [`wf_scenario_simulate`], freed once.
#[no_mangle]
pub unsafe extern "C" fn wf_run_free(run: *mut WfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded frames, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn wf_run_frame_count(run: *const WfRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.frames.len())
}

/// Number of grid points per frame, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn wf_run_grid_len(run: *const WfRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.frames[0].grid().len())
}

/// Time of frame `k`.
///
/// # Safety
/// `run` must be null or a live run handle; `t` null or writable.
#[no_mangle]
pub unsafe extern "C" fn wf_run_time(run: *const WfRun, k: usize, t: *mut f64) -> WfStatus {
    guard(|| {
        let r = &run.as_ref().ok_or(Fail::Null("run"))?.inner;
        let t = out(t, "t")?;
        *t = *r.times.get(k).ok_or_else(|| Fail::Arg(format!("frame {k} out of {}", r.times.len())))?;
        Ok(())
    })
}

/// Copies the grid abscissae into `xs`, which must hold `len` values with
/// `len` equal to [`wf_run_grid_len`].
///
/// # Safety
/// `run` must be null or a live run handle; `xs` null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn wf_run_grid(run: *const WfRun, xs: *mut f64, len: usize) -> WfStatus {
    guard(|| {
        let r = &run.as_ref().ok_or(Fail::Null("run"))?.inner;
        let g = *r.frames[0].grid();
        let dst = buffer(xs, len, g.len())?;
        for (i, x) in dst.iter_mut().enumerate() {
            *x = g.x(i);
        }
        Ok(())
    })
}

/// Copies frame `k` into `values`, which must hold `len` values with `len`
/// equal to [`wf_run_grid_len`].
///
/// # Safety
/// `run` must be null or a live run handle; `values` null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn wf_run_frame(run: *const WfRun, k: usize, values: *mut f64, len: usize) -> WfStatus {
    guard(|| {
        let r = &run.as_ref().ok_or(Fail::Null("run"))?.inner;
        let u = r.frames.get(k).ok_or_else(|| Fail::Arg(format!("frame {k} out of {}", r.frames.len())))?;
        buffer(values, len, u.grid().len())?.copy_from_slice(u.values());
        Ok(())
    })
}

/// Smallest and largest state value seen over every step of the run.
///
/// # Safety
/// `run` must be null or a live run handle; outputs null or writable.
#[no_mangle]
pub unsafe extern "C" fn wf_run_extremes(run: *const WfRun, min: *mut f64, max: *mut f64) -> WfStatus {
    guard(|| {
        let r = &run.as_ref().ok_or(Fail::Null("run"))?.inner;
        *out(min, "min")? = r.min_value;
        *out(max, "max")? = r.max_value;
        Ok(())
    })
}

unsafe fn buffer<'a>(p: *mut f64, len: usize, want: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null("buffer"));
    }
    if len != want {
        return Err(Fail::Arg(format!("buffer holds {len} values, need {want}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Level-crossing position of samples `values[i]` at `x_min + i dx`. Writes
/// NaN when no sample reaches `level`.
///
/// # Safety
/// `values` must be null or valid for `len` reads; `x` null or writable.
#[no_mangle]
pub unsafe extern "C" fn wf_level_position(
    values: *const f64,
    len: usize,
    x_min: f64,
    dx: f64,
    level: f64,
    side: WfFrontSide,
    x: *mut f64,
) -> WfStatus {
    guard(|| {
        let x = out(x, "x")?;
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let u = GridFunction::new(Grid::new(x_min, dx, len)?, v, ExtensionPolicy::ZERO)?;
        let s = match side {
            WfFrontSide::Rightmost => FrontSide::Rightmost,
            WfFrontSide::Leftmost => FrontSide::Leftmost,
        };
        *x = level_position(&u, level, s).unwrap_or(f64::NAN);
        Ok(())
    })
}
