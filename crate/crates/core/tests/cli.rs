use std::fs;
use std::process::{Command, Output};

use trimfit::synthbench::{format_scene, generate_scene, trial_seed, ScenarioConfig};
use trimfit::{CameraModel, SolverConfig, SolverKind};

fn trimfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trimfit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SWEEP: [&str; 13] = [
    "sweep",
    "--axis",
    "outliers",
    "--values",
    "0.1,0.3",
    "--n",
    "300",
    "--noise",
    "3",
    "--trials",
    "4",
    "--solvers",
    "reppnp_incr,robust_upnp_incr",
];

#[test]
fn sweep_writes_one_row_per_solver_and_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let mut args = SWEEP.to_vec();
    args.extend(["--seed", "7", "--out", out.to_str().unwrap()]);
    let o = trimfit(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "solver,n,noise_px,outlier_frac,trials,mean_rot_err,median_rot_err,mean_pos_err,median_pos_err,mean_time_s"
    );
    assert_eq!(lines.len(), 1 + 2 * 2);
    let solvers: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        solvers,
        ["reppnp_incr", "robust_upnp_incr", "reppnp_incr", "robust_upnp_incr"]
    );
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 10));
}

#[test]
fn sweep_csv_is_byte_deterministic_without_timing() {
    let mut args = SWEEP.to_vec();
    args.extend(["--seed", "11", "--no-timing"]);
    let a = trimfit(&args);
    let b = trimfit(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn unknown_solver_is_a_usage_error() {
    let mut args = SWEEP.to_vec();
    args[12] = "reppnp_incr,ransac";
    let o = trimfit(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(trimfit(&["sweep", "--bogus"]).status.code(), Some(2));
}

#[test]
fn solve_rejects_empty_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let o = trimfit(&["solve", "--input", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));

    let scene = generate_scene(&ScenarioConfig::new(30, 1.0, 0.0, 3), &CameraModel::default()).unwrap();
    let mut lines: Vec<String> = format_scene(&scene.correspondences)
        .lines()
        .map(str::to_owned)
        .collect();
    lines[16] = "0 0 1 2 3".into();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, lines.join("\n")).unwrap();
    let o = trimfit(&["solve", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("17"), "{}", stderr(&o));

    let missing = dir.path().join("missing.txt");
    assert_eq!(
        trimfit(&["solve", "--input", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn dumped_scene_round_trips_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("scene.txt");
    let mut args = SWEEP.to_vec();
    args.extend(["--seed", "5", "--no-timing", "--dump-scene", dump.to_str().unwrap()]);
    let o = trimfit(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let seed = trial_seed(5, 0);
    let scene = generate_scene(&ScenarioConfig::new(300, 3.0, 0.1, seed), &CameraModel::default()).unwrap();
    assert_eq!(fs::read_to_string(&dump).unwrap(), format_scene(&scene.correspondences));
    assert!(stderr(&o).contains(&format!("solver seed {seed}")));

    let o = trimfit(&[
        "solve",
        "--input",
        dump.to_str().unwrap(),
        "--solver",
        "robust_upnp_incr",
        "--seed",
        &seed.to_string(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = SolverKind::RobustUpnpIncr
        .solve(
            &scene.correspondences,
            &CameraModel::default(),
            &SolverConfig::default().with_seed(seed),
        )
        .unwrap();
    let t = r.pose.translation;
    let text = stdout(&o);
    assert!(
        text.contains(&format!("translation {} {} {}\n", t.x, t.y, t.z)),
        "{text}"
    );
    for i in 0..3 {
        let m = r.pose.rotation;
        assert!(text.contains(&format!("rotation_row{i} {} {} {}\n", m[(i, 0)], m[(i, 1)], m[(i, 2)])));
    }
    assert!(text.contains("inliers 150/300"));
}

#[test]
fn bench_sort_reports_fraction_and_histogram() {
    let o = trimfit(&[
        "bench-sort",
        "--n",
        "2000",
        "--perturb",
        "1.0",
        "--trials",
        "20",
        "--bins",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("fraction"), "{text}");
    assert!(text.contains("full"), "{text}");
}

#[test]
fn bench_pnp_lists_requested_solvers() {
    let o = trimfit(&[
        "bench-pnp",
        "--n",
        "100",
        "--trials",
        "2",
        "--solvers",
        "epnp,p3p_ransac",
        "--outliers",
        "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("epnp") && text.contains("p3p_ransac"), "{text}");
}
