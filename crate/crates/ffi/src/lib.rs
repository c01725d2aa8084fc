//! C ABI for the trimfit solvers.
//!
//! Problems and results are opaque heap handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`TrimfitStatus`]; the message of the most recent failure on the calling
//! thread is available from [`trimfit_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use nalgebra::{Vector2, Vector3};
use trimfit::geom::{CameraModel, Correspondence, Pose};
use trimfit::synthbench::{generate_scene, ScenarioConfig};
use trimfit::{Error, SolverConfig, SolverKind, SolverResult};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimfitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegenerateGeometry = 3,
    TooFewPoints = 4,
    PointAtInfinity = 5,
    Panic = 6,
}

/// Solver selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimfitSolver {
    Epnp = 0,
    Reppnp = 1,
    ReppnpIncr = 2,
    Upnp = 3,
    RobustUpnp = 4,
    RobustUpnpIncr = 5,
    P3pRansac = 6,
}

impl From<TrimfitSolver> for SolverKind {
    fn from(s: TrimfitSolver) -> Self {
        match s {
            TrimfitSolver::Epnp => SolverKind::Epnp,
            TrimfitSolver::Reppnp => SolverKind::Reppnp,
            TrimfitSolver::ReppnpIncr => SolverKind::ReppnpIncr,
            TrimfitSolver::Upnp => SolverKind::Upnp,
            TrimfitSolver::RobustUpnp => SolverKind::RobustUpnp,
            TrimfitSolver::RobustUpnpIncr => SolverKind::RobustUpnpIncr,
            TrimfitSolver::P3pRansac => SolverKind::P3pRansac,
        }
    }
}

impl From<SolverKind> for TrimfitSolver {
    fn from(s: SolverKind) -> Self {
        match s {
            SolverKind::Epnp => TrimfitSolver::Epnp,
            SolverKind::Reppnp => TrimfitSolver::Reppnp,
            SolverKind::ReppnpIncr => TrimfitSolver::ReppnpIncr,
            SolverKind::Upnp => TrimfitSolver::Upnp,
            SolverKind::RobustUpnp => TrimfitSolver::RobustUpnp,
            SolverKind::RobustUpnpIncr => TrimfitSolver::RobustUpnpIncr,
            SolverKind::P3pRansac => TrimfitSolver::P3pRansac,
        }
    }
}

/// Solver and camera settings. Start from `trimfit_options_default()`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimfitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub ransac_iterations: usize,
    pub ransac_threshold_px: f64,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl TrimfitOptions {
    fn split(&self) -> Result<(SolverConfig, CameraModel), Error> {
        let config = SolverConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            restarts: self.restarts,
            seed: self.seed,
            ransac_iterations: self.ransac_iterations,
            ransac_threshold_px: self.ransac_threshold_px,
        };
        config.validate()?;
        let cam = CameraModel::new(self.focal, Vector2::new(self.cx, self.cy))?;
        Ok((config, cam))
    }
}

/// A set of 2D-3D correspondences, optionally with a known pose.
pub struct TrimfitProblem {
    correspondences: Vec<Correspondence>,
    ground_truth: Option<Pose>,
}

/// Outcome of one solve.
pub struct TrimfitResult {
    inner: SolverResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(err: Error) -> TrimfitStatus {
    set_last_error(&err.to_string());
    match err {
        Error::InvalidArgument(_) => TrimfitStatus::InvalidArgument,
        Error::DegenerateGeometry(_) => TrimfitStatus::DegenerateGeometry,
        Error::TooFewPoints { .. } => TrimfitStatus::TooFewPoints,
        Error::PointAtInfinity => TrimfitStatus::PointAtInfinity,
    }
}

fn null(what: &str) -> TrimfitStatus {
    set_last_error(&format!("null pointer: {what}"));
    TrimfitStatus::NullPointer
}

fn guard<F: FnOnce() -> TrimfitStatus + UnwindSafe>(f: F) -> TrimfitStatus {
    catch_unwind(f).unwrap_or_else(|_| {
        set_last_error("internal panic");
        TrimfitStatus::Panic
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn trimfit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn trimfit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn trimfit_status_name(status: TrimfitStatus) -> *const c_char {
    let s: &'static str = match status {
        TrimfitStatus::Ok => "ok\0",
        TrimfitStatus::NullPointer => "null_pointer\0",
        TrimfitStatus::InvalidArgument => "invalid_argument\0",
        TrimfitStatus::DegenerateGeometry => "degenerate_geometry\0",
        TrimfitStatus::TooFewPoints => "too_few_points\0",
        TrimfitStatus::PointAtInfinity => "point_at_infinity\0",
        TrimfitStatus::Panic => "panic\0",
    };
    s.as_ptr().cast()
}

/// Defaults: 20 iterations, tolerance 1e-10, 20 restarts, seed 0, 500 RANSAC
/// iterations at 6 px, focal 800, principal point (320, 240).
#[no_mangle]
pub extern "C" fn trimfit_options_default() -> TrimfitOptions {
    let config = SolverConfig::default();
    let cam = CameraModel::default();
    TrimfitOptions {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
        restarts: config.restarts,
        seed: config.seed,
        ransac_iterations: config.ransac_iterations,
        ransac_threshold_px: config.ransac_threshold_px,
        focal: cam.focal,
        cx: cam.principal.x,
        cy: cam.principal.y,
    }
}

/// Look up a solver by its CLI name, e.g. `"robust_upnp_incr"`.
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trimfit_solver_from_name(name: *const c_char, out: *mut TrimfitSolver) -> TrimfitStatus {
    if name.is_null() {
        return null("name");
    }
    if out.is_null() {
        return null("out");
    }
    let Ok(name) = CStr::from_ptr(name).to_str() else {
        set_last_error("solver name is not UTF-8");
        return TrimfitStatus::InvalidArgument;
    };
    match name.parse::<SolverKind>() {
        Ok(kind) => {
            *out = kind.into();
            TrimfitStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Build a problem from `n` bearings and `n` world points, each packed as
/// `xyz` triples. Bearings are normalised; zero or non-finite ones are rejected.
///
/// # Safety
/// `bearings` and `points` must each point to `3 * n` readable doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trimfit_problem_new(
    bearings: *const f64,
    points: *const f64,
    n: usize,
    out: *mut *mut TrimfitProblem,
) -> TrimfitStatus {
    if out.is_null() {
        return null("out");
    }
    *out = ptr::null_mut();
    if n > 0 && (bearings.is_null() || points.is_null()) {
        return null("bearings or points");
    }
    let (bearings, points) = if n == 0 {
        (&[][..], &[][..])
    } else {
        (
            std::slice::from_raw_parts(bearings, 3 * n),
            std::slice::from_raw_parts(points, 3 * n),
        )
    };
    guard(move || {
        let mut correspondences = Vec::with_capacity(n);
        for (i, (f, p)) in bearings.chunks_exact(3).zip(points.chunks_exact(3)).enumerate() {
            let f = Vector3::from_column_slice(f);
            let p = Vector3::from_column_slice(p);
            let norm = f.norm();
            if !(norm > 0.0 && norm.is_finite()) || !p.iter().all(|x| x.is_finite()) {
                return fail(Error::InvalidArgument(format!(
                    "correspondence {i} is not finite or has a zero bearing"
                )));
            }
            match Correspondence::new(f / norm, p) {
                Ok(c) => correspondences.push(c),
                Err(e) => return fail(e),
            }
        }
        *out = Box::into_raw(Box::new(TrimfitProblem {
            correspondences,
            ground_truth: None,
        }));
        TrimfitStatus::Ok
    })
}

/// Generate a synthetic problem: points in `[-2,2]x[-2,2]x[4,8]`, uniform
/// pixel noise, `floor(outlier_fraction * n)` random unit bearings, default
/// camera. The ground truth is kept on the handle.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trimfit_problem_generate(
    n: usize,
    noise_px: f64,
    outlier_fraction: f64,
    seed: u64,
    out: *mut *mut TrimfitProblem,
) -> TrimfitStatus {
    if out.is_null() {
        return null("out");
    }
    *out = ptr::null_mut();
    guard(move || {
        let cfg = ScenarioConfig::new(n, noise_px, outlier_fraction, seed);
        match generate_scene(&cfg, &CameraModel::default()) {
            Ok(scene) => {
                *out = Box::into_raw(Box::new(TrimfitProblem {
                    correspondences: scene.correspondences,
                    ground_truth: Some(scene.ground_truth),
                }));
                TrimfitStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a problem. Null is ignored.
///
/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trimfit_problem_free(problem: *mut TrimfitProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of correspondences; 0 for null.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trimfit_problem_len(problem: *const TrimfitProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.correspondences.len())
}

/// Copy correspondence `index` into `bearing[3]` and `point[3]`.
///
/// # Safety
/// `problem` must be a live handle; `bearing` and `point` must each hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn trimfit_problem_get(
    problem: *const TrimfitProblem,
    index: usize,
    bearing: *mut f64,
    point: *mut f64,
) -> TrimfitStatus {
    let Some(problem) = problem.as_ref() else {
        return null("problem");
    };
    if bearing.is_null() || point.is_null() {
        return null("bearing or point");
    }
    let Some(c) = problem.correspondences.get(index) else {
        return fail(Error::InvalidArgument(format!(
            "index {index} out of range for {} correspondences",
            problem.correspondences.len()
        )));
    };
    ptr::copy_nonoverlapping(c.f.as_ptr(), bearing, 3);
    ptr::copy_nonoverlapping(c.p.as_ptr(), point, 3);
    TrimfitStatus::Ok
}

/// Copy the ground-truth rotation (row-major) and translation of a generated
/// problem. Fails with `InvalidArgument` for problems built from data.
///
/// # Safety
/// `problem` must be a live handle; `rotation` must hold 9 doubles and
/// `translation` 3.
#[no_mangle]
pub unsafe extern "C" fn trimfit_problem_ground_truth(
    problem: *const TrimfitProblem,
    rotation: *mut f64,
    translation: *mut f64,
) -> TrimfitStatus {
    let Some(problem) = problem.as_ref() else {
        return null("problem");
    };
    let Some(pose) = &problem.ground_truth else {
        return fail(Error::InvalidArgument("problem has no ground truth".into()));
    };
    write_pose(pose, rotation, translation)
}

unsafe fn write_pose(pose: &Pose, rotation: *mut f64, translation: *mut f64) -> TrimfitStatus {
    if rotation.is_null() || translation.is_null() {
        return null("rotation or translation");
    }
    let row_major = pose.rotation.transpose();
    ptr::copy_nonoverlapping(row_major.as_ptr(), rotation, 9);
    ptr::copy_nonoverlapping(pose.translation.as_ptr(), translation, 3);
    TrimfitStatus::Ok
}

/// Run `solver` on `problem`. `options` may be null for the defaults.
///
/// # Safety
/// `problem` must be a live handle, `options` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn trimfit_solve(
    problem: *const TrimfitProblem,
    solver: TrimfitSolver,
    options: *const TrimfitOptions,
    out: *mut *mut TrimfitResult,
) -> TrimfitStatus {
    if out.is_null() {
        return null("out");
    }
    *out = ptr::null_mut();
    let Some(problem) = problem.as_ref() else {
        return null("problem");
    };
    let options = options.as_ref().copied().unwrap_or_else(|| trimfit_options_default());
    guard(move || {
        let (config, cam) = match options.split() {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        match SolverKind::from(solver).solve(&problem.correspondences, &cam, &config) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(TrimfitResult { inner }));
                TrimfitStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a result. Null is ignored.
///
/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trimfit_result_free(result: *mut TrimfitResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Copy the estimated rotation (row-major, world to camera) and translation.
///
/// # Safety
/// `result` must be a live handle; `rotation` must hold 9 doubles and
/// `translation` 3.
#[no_mangle]
pub unsafe extern "C" fn trimfit_result_pose(
    result: *const TrimfitResult,
    rotation: *mut f64,
    translation: *mut f64,
) -> TrimfitStatus {
    match result.as_ref() {
        Some(r) => write_pose(&r.inner.pose, rotation, translation),
        None => null("result"),
    }
}

/// Number of retained (inlier) ids; 0 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trimfit_result_inlier_count(result: *const TrimfitResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.inliers.len())
}

/// Copy up to `capacity` inlier ids (ascending) into `ids`; returns the
/// number copied.
///
/// # Safety
/// `result` must be null or a live handle; `ids` must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn trimfit_result_inliers(
    result: *const TrimfitResult,
    ids: *mut usize,
    capacity: usize,
) -> usize {
    let Some(r) = result.as_ref() else {
        return 0;
    };
    if ids.is_null() {
        return 0;
    }
    let count = r.inner.inliers.len().min(capacity);
    ptr::copy_nonoverlapping(r.inner.inliers.as_ptr(), ids, count);
    count
}

/// Trim iterations run (1 for single-shot solvers); 0 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trimfit_result_iterations(result: *const TrimfitResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.iterations)
}

/// Whether the solver met its convergence rule; false for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trimfit_result_converged(result: *const TrimfitResult) -> bool {
    result.as_ref().is_some_and(|r| r.inner.converged)
}
