use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use trimfit_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(trimfit_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn generated(n: usize, noise: f64, outliers: f64, seed: u64) -> *mut TrimfitProblem {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { trimfit_problem_generate(n, noise, outliers, seed, &mut p) },
        TrimfitStatus::Ok
    );
    p
}

#[test]
fn version_and_status_names() {
    let v = unsafe { CStr::from_ptr(trimfit_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let name = unsafe { CStr::from_ptr(trimfit_status_name(TrimfitStatus::TooFewPoints)) };
    assert_eq!(name.to_str().unwrap(), "too_few_points");
}

#[test]
fn solve_generated_problem_exactly() {
    let problem = generated(60, 0.0, 0.0, 4);
    assert_eq!(unsafe { trimfit_problem_len(problem) }, 60);
    let mut gt_r = [0.0; 9];
    let mut gt_t = [0.0; 3];
    assert_eq!(
        unsafe { trimfit_problem_ground_truth(problem, gt_r.as_mut_ptr(), gt_t.as_mut_ptr()) },
        TrimfitStatus::Ok
    );
    for solver in [
        TrimfitSolver::Epnp,
        TrimfitSolver::Reppnp,
        TrimfitSolver::ReppnpIncr,
        TrimfitSolver::Upnp,
        TrimfitSolver::RobustUpnp,
        TrimfitSolver::RobustUpnpIncr,
        TrimfitSolver::P3pRansac,
    ] {
        let mut result = ptr::null_mut();
        assert_eq!(
            unsafe { trimfit_solve(problem, solver, ptr::null(), &mut result) },
            TrimfitStatus::Ok
        );
        let mut r = [0.0; 9];
        let mut t = [0.0; 3];
        assert_eq!(
            unsafe { trimfit_result_pose(result, r.as_mut_ptr(), t.as_mut_ptr()) },
            TrimfitStatus::Ok
        );
        assert!(r.iter().zip(&gt_r).all(|(a, b)| (a - b).abs() < 1e-6), "{solver:?}");
        assert!(t.iter().zip(&gt_t).all(|(a, b)| (a - b).abs() < 1e-6), "{solver:?}");
        assert!(unsafe { trimfit_result_converged(result) });
        assert!(unsafe { trimfit_result_iterations(result) } >= 1);
        unsafe { trimfit_result_free(result) };
    }
    unsafe { trimfit_problem_free(problem) };
}

#[test]
fn problem_from_arrays_round_trips_and_inliers_copy() {
    let source = generated(40, 1.0, 0.25, 9);
    let n = unsafe { trimfit_problem_len(source) };
    let mut bearings = vec![0.0; 3 * n];
    let mut points = vec![0.0; 3 * n];
    for i in 0..n {
        let status =
            unsafe { trimfit_problem_get(source, i, bearings[3 * i..].as_mut_ptr(), points[3 * i..].as_mut_ptr()) };
        assert_eq!(status, TrimfitStatus::Ok);
    }
    let mut copy = ptr::null_mut();
    assert_eq!(
        unsafe { trimfit_problem_new(bearings.as_ptr(), points.as_ptr(), n, &mut copy) },
        TrimfitStatus::Ok
    );

    let mut options = trimfit_options_default();
    options.seed = 2;
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(
            trimfit_solve(source, TrimfitSolver::ReppnpIncr, &options, &mut a),
            TrimfitStatus::Ok
        );
        assert_eq!(
            trimfit_solve(copy, TrimfitSolver::ReppnpIncr, &options, &mut b),
            TrimfitStatus::Ok
        );
    }
    let count = unsafe { trimfit_result_inlier_count(a) };
    assert_eq!(count, n / 2);
    let mut ids_a = vec![usize::MAX; count];
    let mut ids_b = vec![usize::MAX; count];
    assert_eq!(unsafe { trimfit_result_inliers(a, ids_a.as_mut_ptr(), count) }, count);
    assert_eq!(unsafe { trimfit_result_inliers(b, ids_b.as_mut_ptr(), count) }, count);
    assert_eq!(ids_a, ids_b);
    assert!(ids_a.windows(2).all(|w| w[0] < w[1]));
    let mut short = [0usize; 3];
    assert_eq!(unsafe { trimfit_result_inliers(a, short.as_mut_ptr(), 3) }, 3);
    assert_eq!(short, ids_a[..3]);

    let mut gt_r = [0.0; 9];
    let mut gt_t = [0.0; 3];
    assert_eq!(
        unsafe { trimfit_problem_ground_truth(copy, gt_r.as_mut_ptr(), gt_t.as_mut_ptr()) },
        TrimfitStatus::InvalidArgument
    );
    unsafe {
        trimfit_result_free(a);
        trimfit_result_free(b);
        trimfit_problem_free(source);
        trimfit_problem_free(copy);
    }
}

#[test]
fn error_codes_and_messages() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { trimfit_problem_generate(5, 0.0, 0.0, 0, &mut p) },
        TrimfitStatus::InvalidArgument
    );
    assert!(p.is_null());
    assert!(last_error().contains("at least"));

    assert_eq!(
        unsafe { trimfit_problem_generate(20, 0.0, 0.0, 0, ptr::null_mut()) },
        TrimfitStatus::NullPointer
    );

    let bearings = [0.0, 0.0, 0.0];
    let points = [1.0, 2.0, 3.0];
    assert_eq!(
        unsafe { trimfit_problem_new(bearings.as_ptr(), points.as_ptr(), 1, &mut p) },
        TrimfitStatus::InvalidArgument
    );

    let tiny = generated(20, 0.0, 0.0, 1);
    let few: Vec<f64> = (0..3).flat_map(|_| [0.0, 0.0, 1.0]).collect();
    let mut three = ptr::null_mut();
    assert_eq!(
        unsafe {
            trimfit_problem_new(
                few.as_ptr(),
                [1.0, 0.0, 5.0, 0.0, 1.0, 5.0, 1.0, 1.0, 6.0].as_ptr(),
                3,
                &mut three,
            )
        },
        TrimfitStatus::Ok
    );
    let mut result = ptr::null_mut();
    assert_eq!(
        unsafe { trimfit_solve(three, TrimfitSolver::ReppnpIncr, ptr::null(), &mut result) },
        TrimfitStatus::TooFewPoints
    );
    assert!(result.is_null());

    let mut options = trimfit_options_default();
    options.restarts = 0;
    assert_eq!(
        unsafe { trimfit_solve(tiny, TrimfitSolver::Upnp, &options, &mut result) },
        TrimfitStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { trimfit_solve(ptr::null(), TrimfitSolver::Upnp, ptr::null(), &mut result) },
        TrimfitStatus::NullPointer
    );

    let mut solver = TrimfitSolver::Epnp;
    let name = CString::new("robust_upnp_incr").unwrap();
    assert_eq!(
        unsafe { trimfit_solver_from_name(name.as_ptr(), &mut solver) },
        TrimfitStatus::Ok
    );
    assert_eq!(solver, TrimfitSolver::RobustUpnpIncr);
    let bad = CString::new("ransac").unwrap();
    assert_eq!(
        unsafe { trimfit_solver_from_name(bad.as_ptr(), &mut solver) },
        TrimfitStatus::InvalidArgument
    );
    assert!(last_error().contains("unknown solver"));

    unsafe {
        trimfit_problem_free(tiny);
        trimfit_problem_free(three);
        trimfit_problem_free(ptr::null_mut());
        trimfit_result_free(ptr::null_mut());
        assert_eq!(trimfit_problem_len(ptr::null()), 0);
        assert_eq!(trimfit_result_inlier_count(ptr::null()), 0);
        assert!(!trimfit_result_converged(ptr::null()));
    }
}

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(header_dir().join("trimfit.h")).unwrap();
    for symbol in [
        "trimfit_version",
        "trimfit_last_error",
        "trimfit_options_default",
        "trimfit_problem_new",
        "trimfit_problem_generate",
        "trimfit_problem_free",
        "trimfit_solve",
        "trimfit_result_pose",
        "trimfit_result_inliers",
        "trimfit_result_free",
        "typedef struct TrimfitProblem TrimfitProblem;",
        "typedef struct TrimfitResult TrimfitResult;",
        "TRIMFIT_STATUS_TOO_FEW_POINTS = 4",
    ] {
        assert!(header.contains(symbol), "missing {symbol}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let cc = compiler().expect("a C compiler on PATH");
    // integration test binaries live in <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libtrimfit_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let out_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let bin = out_dir.join("c_smoke");
    let source = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c_smoke.c");
    let build = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&source)
        .arg("-I")
        .arg(header_dir())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));

    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("inliers 250"), "{stdout}");
    assert!(stdout.contains("small invalid_argument null"), "{stdout}");
}
