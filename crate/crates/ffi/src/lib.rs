//! C ABI for gramsynth.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free`. Every fallible call returns a [`GsStatus`]; on
//! failure [`gs_last_error`] describes the most recent error on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gramsynth::harness::ExperimentConfig;
use gramsynth::picard::run_picard;
use gramsynth::{make_benchmark, Error, MapKind, PicardOutcome, Termination};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    UnknownSystem = 4,
    SingularGramian = 5,
    Diverged = 6,
    NotFullyActuated = 7,
    SolverFailure = 8,
    NonFinite = 9,
    Io = 10,
    OutOfRange = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsMapKind {
    General = 0,
    MinimumEnergy = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsTermination {
    EndpointTolerance = 0,
    FixedPointTolerance = 1,
    MaxIterations = 2,
    Diverged = 3,
}

/// Telemetry of one Picard pass.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GsIterationRecord {
    pub n: usize,
    pub err_end: f64,
    pub err_fp: f64,
    pub energy: f64,
    pub energy_sq_norm: f64,
    pub gramian_condition: f64,
    pub wall_time: f64,
}

/// Experiment configuration.
pub struct GsConfig {
    inner: ExperimentConfig,
}

/// Finished Picard run.
pub struct GsRun {
    outcome: PicardOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> GsStatus {
    match e {
        Error::Ode(_) => GsStatus::SolverFailure,
        Error::UnknownSystem(_) => GsStatus::UnknownSystem,
        Error::InvalidConfig(_) | Error::InvalidK(_) | Error::DimensionMismatch { .. } => GsStatus::InvalidConfig,
        Error::NonFiniteValue(_) => GsStatus::NonFinite,
        Error::SingularGramian { .. } => GsStatus::SingularGramian,
        Error::Diverged { .. } => GsStatus::Diverged,
        Error::NotFullyActuated(_) => GsStatus::NotFullyActuated,
        Error::Io(_) | Error::Serialization(_) => GsStatus::Io,
    }
}

fn fail(status: GsStatus, msg: impl Into<String>) -> GsStatus {
    set_error(msg);
    status
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (GsStatus, String)>) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(GsStatus::Panic, "panic inside gramsynth"),
    }
}

fn lift(e: Error) -> (GsStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GsStatus, String)> {
    if p.is_null() {
        return Err((GsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (GsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (GsStatus, String)> {
    p.as_ref().ok_or_else(|| (GsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (GsStatus, String)> {
    p.as_mut().ok_or_else(|| (GsStatus::NullPointer, format!("{what} is null")))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration (unicycle, general map).
#[no_mangle]
pub extern "C" fn gs_config_new() -> *mut GsConfig {
    Box::into_raw(Box::new(GsConfig { inner: ExperimentConfig::default() }))
}

/// Parse a TOML experiment config.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_config_from_toml(toml: *const c_char, out: *mut *mut GsConfig) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err((GsStatus::NullPointer, "out is null".into()));
        }
        let inner = ExperimentConfig::from_toml_str(str_arg(toml, "toml")?).map_err(lift)?;
        *out = Box::into_raw(Box::new(GsConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_config_free(cfg: *mut GsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live config and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set_system(cfg: *mut GsConfig, name: *const c_char) -> GsStatus {
    guard(|| {
        let cfg = handle_mut(cfg, "cfg")?;
        let name = str_arg(name, "name")?;
        make_benchmark(name, &cfg.inner.params).map_err(lift)?;
        cfg.inner.system = name.to_string();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set_map_kind(cfg: *mut GsConfig, kind: GsMapKind) -> GsStatus {
    guard(|| {
        handle_mut(cfg, "cfg")?.inner.synthesis.map_kind = match kind {
            GsMapKind::General => MapKind::General,
            GsMapKind::MinimumEnergy => MapKind::MinimumEnergy,
        };
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set_max_iterations(cfg: *mut GsConfig, n: usize) -> GsStatus {
    guard(|| {
        handle_mut(cfg, "cfg")?.inner.synthesis.max_iterations = n;
        Ok(())
    })
}

/// Endpoint and fixed-point tolerances.
///
/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set_tolerances(cfg: *mut GsConfig, eps_x: f64, eps_u: f64) -> GsStatus {
    guard(|| {
        let cfg = handle_mut(cfg, "cfg")?;
        if !(eps_x > 0.0 && eps_u > 0.0) {
            return Err((GsStatus::InvalidArgument, "tolerances must be positive".into()));
        }
        cfg.inner.synthesis.eps_x = eps_x;
        cfg.inner.synthesis.eps_u = eps_u;
        Ok(())
    })
}

/// Odd Simpson node count `K >= 3`; 0 restores the dimension-based default.
///
/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set_quadrature_points(cfg: *mut GsConfig, k: usize) -> GsStatus {
    guard(|| {
        let cfg = handle_mut(cfg, "cfg")?;
        if k != 0 && (k < 3 || k % 2 == 0) {
            return Err((GsStatus::InvalidArgument, format!("quadrature needs an odd node count >= 3, got {k}")));
        }
        cfg.inner.synthesis.quadrature_points = (k != 0).then_some(k);
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set_seed(cfg: *mut GsConfig, seed: u64) -> GsStatus {
    guard(|| {
        handle_mut(cfg, "cfg")?.inner.seed = seed;
        Ok(())
    })
}

/// Run the configured Picard iteration. Divergence is reported through the
/// run's termination, not as an error.
///
/// # Safety
/// `cfg` must be a live config and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_run_synthesis(cfg: *const GsConfig, out: *mut *mut GsRun) -> GsStatus {
    guard(|| {
        let cfg = &handle(cfg, "cfg")?.inner;
        if out.is_null() {
            return Err((GsStatus::NullPointer, "out is null".into()));
        }
        cfg.validate().map_err(lift)?;
        let mut params = cfg.params.clone();
        if cfg.system == "mindy_like" && params.seed.is_none() {
            params.seed = Some(cfg.seed);
        }
        let (_, problem) = make_benchmark(&cfg.system, &params).map_err(lift)?;
        let outcome = run_picard(&problem, &cfg.synthesis).map_err(lift)?;
        *out = Box::into_raw(Box::new(GsRun { outcome }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_run_free(run: *mut GsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live run and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_run_termination(run: *const GsRun, out: *mut GsTermination) -> GsStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let out = handle_mut(out, "out")?;
        *out = match run.outcome.termination {
            Termination::EndpointTolerance => GsTermination::EndpointTolerance,
            Termination::FixedPointTolerance => GsTermination::FixedPointTolerance,
            Termination::MaxIterations => GsTermination::MaxIterations,
            Termination::Diverged => GsTermination::Diverged,
        };
        Ok(())
    })
}

/// Number of telemetry records, 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live run.
#[no_mangle]
pub unsafe extern "C" fn gs_run_record_count(run: *const GsRun) -> usize {
    run.as_ref().map_or(0, |r| r.outcome.records.len())
}

/// # Safety
/// `run` must be a live run and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_run_record(run: *const GsRun, index: usize, out: *mut GsIterationRecord) -> GsStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let out = handle_mut(out, "out")?;
        let r = run
            .outcome
            .records
            .get(index)
            .ok_or_else(|| (GsStatus::OutOfRange, format!("record {index} out of range")))?;
        *out = GsIterationRecord {
            n: r.n,
            err_end: r.err_end,
            err_fp: r.err_fp,
            energy: r.energy,
            energy_sq_norm: r.energy_sq_norm,
            gramian_condition: r.gramian_condition,
            wall_time: r.wall_time,
        };
        Ok(())
    })
}

/// State and input dimensions of the steered system.
///
/// # Safety
/// `run` must be a live run; `d` and `k` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gs_run_dims(run: *const GsRun, d: *mut usize, k: *mut usize) -> GsStatus {
    guard(|| {
        let run = handle(run, "run")?;
        *handle_mut(d, "d")? = run.outcome.trajectory.endpoint.len();
        *handle_mut(k, "k")? = run.outcome.control.input_dim();
        Ok(())
    })
}

/// `1/2 y^T lambda`; `OutOfRange` when the run used the minimum-energy map.
///
/// # Safety
/// `run` must be a live run and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_run_certificate(run: *const GsRun, out: *mut f64) -> GsStatus {
    guard(|| {
        let run = handle(run, "run")?;
        *handle_mut(out, "out")? =
            run.outcome.certificate.ok_or_else(|| (GsStatus::OutOfRange, "no certificate for this map".into()))?;
        Ok(())
    })
}

unsafe fn write_vec(v: &[f64], out: *mut f64, len: usize) -> Result<(), (GsStatus, String)> {
    if out.is_null() {
        return Err((GsStatus::NullPointer, "out is null".into()));
    }
    if len != v.len() {
        return Err((GsStatus::InvalidArgument, format!("buffer holds {len} values, need {}", v.len())));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), out, len);
    Ok(())
}

/// Write `u(t)` (length `k`) into `out`.
///
/// # Safety
/// `run` must be a live run and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_run_eval_control(run: *const GsRun, t: f64, out: *mut f64, len: usize) -> GsStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let (t0, t1) = run.outcome.control.span();
        if !(t >= t0 && t <= t1) {
            return Err((GsStatus::OutOfRange, format!("t = {t} outside [{t0}, {t1}]")));
        }
        let u = run.outcome.control.eval(t).map_err(lift)?;
        write_vec(u.as_slice(), out, len)
    })
}

/// Write `x_u(t)` (length `d`) into `out`.
///
/// # Safety
/// `run` must be a live run and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_run_eval_state(run: *const GsRun, t: f64, out: *mut f64, len: usize) -> GsStatus {
    guard(|| {
        let run = handle(run, "run")?;
        let x = run.outcome.trajectory.state(t).map_err(|e| match e {
            Error::Ode(_) => (GsStatus::OutOfRange, e.to_string()),
            e => lift(e),
        })?;
        write_vec(x.as_slice(), out, len)
    })
}
