//! C ABI for `mlmc-fem`.
//!
//! Objects are opaque handles created by `mlmc_*_new`/`mlmc_run` and released
//! by the matching `*_free`. Every fallible call returns an [`MlmcStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`mlmc_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mlmc_fem::error::MlmcError;
use mlmc_fem::mlmc::{calibrate_tol1, run_mlmc, Allocation, Calibration, MlmcConfig, MlmcReport as CoreReport, RefinementMode};
use mlmc_fem::problems::Problem;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverDiverged = 3,
    RefinementLimit = 4,
    LevelCap = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlmcMode {
    Uniform = 0,
    Adaptive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlmcAllocation {
    Giles = 0,
    Theoretical = 1,
}

/// A benchmark problem with its random data.
pub struct MlmcProblem {
    inner: Problem,
}

/// Settings of an MLMC run.
pub struct MlmcSettings {
    inner: MlmcConfig,
}

/// Calibrated initial estimator norm.
pub struct MlmcCalibration {
    inner: Calibration,
}

/// Result of an MLMC run.
pub struct MlmcReport {
    inner: CoreReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MlmcStatus, msg: impl Into<String>) -> MlmcStatus {
    set_error(msg.into());
    status
}

fn from_mlmc(e: MlmcError) -> MlmcStatus {
    let status = match e {
        MlmcError::SolverDiverged { .. } => MlmcStatus::SolverDiverged,
        MlmcError::RefinementLimit { .. } => MlmcStatus::RefinementLimit,
        MlmcError::LevelCap { .. } => MlmcStatus::LevelCap,
        MlmcError::Invalid(_) => MlmcStatus::InvalidArgument,
        MlmcError::Fem(_) | MlmcError::Mesh(_) | MlmcError::Problem(_) => MlmcStatus::Numerical,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`MlmcStatus::Panic`].
fn guard(f: impl FnOnce() -> MlmcStatus) -> MlmcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            fail(MlmcStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn give<T>(out: *mut *mut T, value: T) -> MlmcStatus {
    *out = Box::into_raw(Box::new(value));
    MlmcStatus::Ok
}

macro_rules! deref {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(MlmcStatus::NullPointer, concat!("null pointer: ", stringify!($p))),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(MlmcStatus::NullPointer, concat!("null pointer: ", stringify!($p))),
        }
    };
}

macro_rules! check_out {
    ($p:expr) => {
        if $p.is_null() {
            return fail(MlmcStatus::NullPointer, concat!("null pointer: ", stringify!($p)));
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn mlmc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Short name of a status code as a static string.
#[no_mangle]
pub extern "C" fn mlmc_status_name(status: MlmcStatus) -> *const c_char {
    let s: &'static str = match status {
        MlmcStatus::Ok => "ok\0",
        MlmcStatus::NullPointer => "null pointer\0",
        MlmcStatus::InvalidArgument => "invalid argument\0",
        MlmcStatus::SolverDiverged => "solver diverged\0",
        MlmcStatus::RefinementLimit => "refinement limit\0",
        MlmcStatus::LevelCap => "level cap\0",
        MlmcStatus::Numerical => "numerical error\0",
        MlmcStatus::BufferTooSmall => "buffer too small\0",
        MlmcStatus::Io => "i/o error\0",
        MlmcStatus::Panic => "panic\0",
    };
    s.as_ptr().cast()
}

// problems

/// Poisson benchmark on the square with singularity strength `beta > 0`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mlmc_problem_poisson(beta: f64, out: *mut *mut MlmcProblem) -> MlmcStatus {
    guard(|| {
        check_out!(out);
        match Problem::poisson(beta) {
            Ok(p) => give(out, MlmcProblem { inner: p }),
            Err(e) => fail(MlmcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// One-dimensional obstacle benchmark.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mlmc_problem_obstacle(out: *mut *mut MlmcProblem) -> MlmcStatus {
    guard(|| {
        check_out!(out);
        give(out, MlmcProblem { inner: Problem::obstacle() })
    })
}

/// Space dimension of the problem, 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_problem_dim(problem: *const MlmcProblem) -> u32 {
    problem.as_ref().map_or(0, |p| p.inner.dim() as u32)
}

/// # Safety
/// `problem` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlmc_problem_free(problem: *mut MlmcProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

// settings

/// Default settings for `problem` in the given refinement mode.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_new(problem: *const MlmcProblem, mode: MlmcMode, out: *mut *mut MlmcSettings) -> MlmcStatus {
    guard(|| {
        let p = deref!(problem);
        check_out!(out);
        let mode = match mode {
            MlmcMode::Uniform => RefinementMode::Uniform,
            MlmcMode::Adaptive => RefinementMode::Adaptive,
        };
        give(out, MlmcSettings { inner: MlmcConfig::for_problem(&p.inner, mode) })
    })
}

/// # Safety
/// `settings` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_free(settings: *mut MlmcSettings) {
    if !settings.is_null() {
        drop(Box::from_raw(settings));
    }
}

/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_set_seed(settings: *mut MlmcSettings, seed: u64, replica: u32) -> MlmcStatus {
    guard(|| {
        let s = deref_mut!(settings);
        s.inner.seed = seed;
        s.inner.replica = replica;
        MlmcStatus::Ok
    })
}

/// Dörfler parameter in `(0, 1]`.
///
/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_set_theta(settings: *mut MlmcSettings, theta: f64) -> MlmcStatus {
    guard(|| {
        let s = deref_mut!(settings);
        if !(theta > 0.0 && theta <= 1.0) {
            return fail(MlmcStatus::InvalidArgument, format!("theta = {theta} outside (0, 1]"));
        }
        s.inner.theta = theta;
        MlmcStatus::Ok
    })
}

/// Minimal sample count per level, at least 2.
///
/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_set_m_min(settings: *mut MlmcSettings, m_min: usize) -> MlmcStatus {
    guard(|| {
        let s = deref_mut!(settings);
        if m_min < 2 {
            return fail(MlmcStatus::InvalidArgument, "m_min must be at least 2");
        }
        s.inner.m_min = m_min;
        MlmcStatus::Ok
    })
}

/// Level tolerance ratio in `(0, 1)`.
///
/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_set_q(settings: *mut MlmcSettings, q: f64) -> MlmcStatus {
    guard(|| {
        let s = deref_mut!(settings);
        if !(q > 0.0 && q < 1.0) {
            return fail(MlmcStatus::InvalidArgument, format!("q = {q} outside (0, 1)"));
        }
        s.inner.q = q;
        MlmcStatus::Ok
    })
}

/// Algebraic solver tolerance factor, positive.
///
/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_set_sigma_alg(settings: *mut MlmcSettings, sigma_alg: f64) -> MlmcStatus {
    guard(|| {
        let s = deref_mut!(settings);
        if !(sigma_alg > 0.0) {
            return fail(MlmcStatus::InvalidArgument, "sigma_alg must be positive");
        }
        s.inner.solver.sigma_alg = sigma_alg;
        MlmcStatus::Ok
    })
}

/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_set_allocation(settings: *mut MlmcSettings, allocation: MlmcAllocation) -> MlmcStatus {
    guard(|| {
        let s = deref_mut!(settings);
        s.inner.allocation = match allocation {
            MlmcAllocation::Giles => Allocation::Giles,
            MlmcAllocation::Theoretical => Allocation::Theoretical,
        };
        MlmcStatus::Ok
    })
}

/// Samples used when `mlmc_run` calibrates on its own.
///
/// # Safety
/// `settings` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_settings_set_calibration_samples(settings: *mut MlmcSettings, n: usize) -> MlmcStatus {
    guard(|| {
        let s = deref_mut!(settings);
        if n == 0 {
            return fail(MlmcStatus::InvalidArgument, "calibration needs at least one sample");
        }
        s.inner.calibration_samples = n;
        MlmcStatus::Ok
    })
}

// calibration

/// Estimates the initial estimator norm from `n` samples drawn with `settings`' seed.
///
/// # Safety
/// `problem` and `settings` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_calibrate(problem: *const MlmcProblem, settings: *const MlmcSettings, n: usize, out: *mut *mut MlmcCalibration) -> MlmcStatus {
    guard(|| {
        let p = deref!(problem);
        let s = deref!(settings);
        check_out!(out);
        if n == 0 {
            return fail(MlmcStatus::InvalidArgument, "calibration needs at least one sample");
        }
        match calibrate_tol1(&p.inner, s.inner.seed, n, &s.inner.solver) {
            Ok(c) => give(out, MlmcCalibration { inner: c }),
            Err(e) => from_mlmc(e),
        }
    })
}

/// Calibrated `‖η^{(1)}‖`, NaN for NULL.
///
/// # Safety
/// `calibration` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_calibration_eta1(calibration: *const MlmcCalibration) -> f64 {
    calibration.as_ref().map_or(f64::NAN, |c| c.inner.eta1_norm)
}

/// # Safety
/// `calibration` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlmc_calibration_free(calibration: *mut MlmcCalibration) {
    if !calibration.is_null() {
        drop(Box::from_raw(calibration));
    }
}

// runs

/// Runs the MLMC estimator to tolerance `tol`. `calibration` may be NULL, in which
/// case the run calibrates first.
///
/// # Safety
/// `problem` and `settings` must be live handles, `calibration` NULL or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_run(
    problem: *const MlmcProblem,
    settings: *const MlmcSettings,
    calibration: *const MlmcCalibration,
    tol: f64,
    out: *mut *mut MlmcReport,
) -> MlmcStatus {
    guard(|| {
        let p = deref!(problem);
        let s = deref!(settings);
        check_out!(out);
        let cal = calibration.as_ref().map(|c| &c.inner);
        match run_mlmc(&p.inner, tol, &s.inner, cal) {
            Ok(r) => give(out, MlmcReport { inner: r }),
            Err(e) => from_mlmc(e),
        }
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_free(report: *mut MlmcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of levels used, 0 for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_num_levels(report: *const MlmcReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.num_levels())
}

/// Total unknowns over all samples and levels, 0 for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_total_cost(report: *const MlmcReport) -> u64 {
    report.as_ref().map_or(0, |r| r.inner.total_cost)
}

/// Per-level statistics for `level` in `1..=num_levels`. Any output pointer may be NULL.
///
/// # Safety
/// `report` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_level(
    report: *const MlmcReport,
    level: usize,
    samples: *mut usize,
    variance: *mut f64,
    avg_cost: *mut f64,
) -> MlmcStatus {
    guard(|| {
        let r = deref!(report);
        let Some(stats) = level.checked_sub(1).and_then(|l| r.inner.levels.get(l)) else {
            return fail(MlmcStatus::InvalidArgument, format!("level {level} outside 1..={}", r.inner.num_levels()));
        };
        if let Some(m) = samples.as_mut() {
            *m = stats.samples();
        }
        if let Some(v) = variance.as_mut() {
            *v = stats.variance();
        }
        if let Some(c) = avg_cost.as_mut() {
            *c = stats.avg_cost();
        }
        MlmcStatus::Ok
    })
}

/// Number of vertices of the estimate's mesh, 0 for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_num_vertices(report: *const MlmcReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.estimate.mesh().num_vertices())
}

/// Copies the nodal values of the estimate into `values[0..len]`; `len` must be at least the vertex count.
///
/// # Safety
/// `report` must be a live handle and `values` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_values(report: *const MlmcReport, values: *mut f64, len: usize) -> MlmcStatus {
    guard(|| {
        let r = deref!(report);
        check_out!(values);
        let v = r.inner.estimate.values();
        if len < v.len() {
            return fail(MlmcStatus::BufferTooSmall, format!("need {} values, got {len}", v.len()));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), values, v.len());
        MlmcStatus::Ok
    })
}

/// Copies vertex coordinates as interleaved `(x, y)` pairs; `len` must be at least twice the vertex count.
/// One-dimensional meshes report `y = 0`.
///
/// # Safety
/// `report` must be a live handle and `coords` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_coords(report: *const MlmcReport, coords: *mut f64, len: usize) -> MlmcStatus {
    guard(|| {
        let r = deref!(report);
        check_out!(coords);
        let c = r.inner.estimate.mesh().coords();
        if len < 2 * c.len() {
            return fail(MlmcStatus::BufferTooSmall, format!("need {} values, got {len}", 2 * c.len()));
        }
        let out = std::slice::from_raw_parts_mut(coords, 2 * c.len());
        for (k, p) in c.iter().enumerate() {
            out[2 * k] = p[0];
            out[2 * k + 1] = p[1];
        }
        MlmcStatus::Ok
    })
}

/// Full H¹ distance between the estimate and a quadrature reference of `E[u]`.
///
/// # Safety
/// `report` and `problem` must be live handles and `error` writable.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_h1_error(report: *const MlmcReport, problem: *const MlmcProblem, resolution: usize, error: *mut f64) -> MlmcStatus {
    guard(|| {
        let r = deref!(report);
        let p = deref!(problem);
        check_out!(error);
        match p.inner.reference(resolution) {
            Ok(reference) => {
                *error = reference.h1_distance(&r.inner.estimate, true);
                MlmcStatus::Ok
            }
            Err(e) => fail(MlmcStatus::Numerical, e.to_string()),
        }
    })
}

/// Writes the JSON summary as a NUL-terminated string into `buf[0..cap]`.
/// `needed` (may be NULL) receives the required size including the NUL, also on
/// [`MlmcStatus::BufferTooSmall`]; `buf` may be NULL when `cap` is 0.
///
/// # Safety
/// `report` must be a live handle and `buf` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_json(report: *const MlmcReport, buf: *mut c_char, cap: usize, needed: *mut usize) -> MlmcStatus {
    guard(|| {
        let r = deref!(report);
        let text = match serde_json::to_string(&r.inner.json()) {
            Ok(t) => t,
            Err(e) => return fail(MlmcStatus::Numerical, e.to_string()),
        };
        let size = text.len() + 1;
        if let Some(n) = needed.as_mut() {
            *n = size;
        }
        if cap < size || buf.is_null() {
            return fail(MlmcStatus::BufferTooSmall, format!("need {size} bytes, got {cap}"));
        }
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast(), text.len());
        *buf.add(text.len()) = 0;
        MlmcStatus::Ok
    })
}

/// Writes the plain-text dump of the estimate's mesh to the file at `path`.
///
/// # Safety
/// `report` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mlmc_report_write_mesh(report: *const MlmcReport, path: *const c_char) -> MlmcStatus {
    guard(|| {
        let r = deref!(report);
        if path.is_null() {
            return fail(MlmcStatus::NullPointer, "null pointer: path");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(MlmcStatus::InvalidArgument, "path is not UTF-8");
        };
        let written = std::fs::File::create(path).and_then(|f| r.inner.estimate.mesh().write_dump(std::io::BufWriter::new(f)));
        match written {
            Ok(()) => MlmcStatus::Ok,
            Err(e) => fail(MlmcStatus::Io, format!("{path}: {e}")),
        }
    })
}
