//! Command-line front end: `bench-sort`, `bench-pnp`, `sweep` and `solve`.
//!
//! Sweep output is CSV with the header [`CSV_HEADER`]. Exit codes: 0 on
//! success, 2 for unusable flags, 1 for runtime failures.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::builder::StyledStr;
use clap::{Args, CommandFactory, Parser, Subcommand};
use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geom::CameraModel;
use crate::solvers::{SolverConfig, SolverKind};
use crate::synthbench::{
    format_scene, generate_scene, mean, median, parse_scene, run_sweep, run_sweep_records, sort_microbench, Aggregate,
    NoiseModel, OutlierModel, ScenarioConfig, SweepAxis, SweepSpec,
};

pub const CSV_HEADER: &str =
    "solver,n,noise_px,outlier_frac,trials,mean_rot_err,median_rot_err,mean_pos_err,median_pos_err,mean_time_s";

#[derive(Debug, Parser)]
#[command(name = "trimfit", version, about = "Robust trim fitting benchmarks and PnP solves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time full, partial and incremental partial sorting of random arrays.
    BenchSort(BenchSortArgs),
    /// Compare solver accuracy and mean wall time on one scenario.
    BenchPnp(BenchPnpArgs),
    /// Sweep one scenario parameter and write aggregate errors as CSV.
    Sweep(SweepArgs),
    /// Solve a pose from a correspondence file.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
pub struct BenchSortArgs {
    /// Array length.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Half-width of the uniform value perturbation.
    #[arg(long, default_value_t = 1.0)]
    pub perturb: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Histogram bins printed per condition.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Args, Clone)]
pub struct ScenarioArgs {
    /// Number of correspondences.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Pixel noise magnitude.
    #[arg(long, default_value_t = 3.0)]
    pub noise: f64,
    /// Outlier fraction in [0, 0.5].
    #[arg(long, default_value_t = 0.3)]
    pub outliers: f64,
    /// Noise distribution: uniform or gaussian.
    #[arg(long, default_value = "uniform", value_parser = parse_noise_model)]
    pub noise_model: NoiseModel,
    /// Outlier bearings: sphere (uniform directions) or volume (towards random scene points).
    #[arg(long, default_value = "sphere", value_parser = parse_outlier_model)]
    pub outlier_model: OutlierModel,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Comma-separated solver names.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "epnp,reppnp,reppnp_incr,upnp,robust_upnp,robust_upnp_incr,p3p_ransac",
        value_parser = parse_solver
    )]
    pub solvers: Vec<SolverKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// RANSAC hypothesis count.
    #[arg(long, default_value_t = 500)]
    pub ransac_iterations: usize,
    /// RANSAC inlier threshold in pixels.
    #[arg(long, default_value_t = 6.0)]
    pub ransac_threshold: f64,
}

#[derive(Debug, Args)]
pub struct BenchPnpArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Swept parameter: n, noise or outliers.
    #[arg(long, value_parser = parse_axis)]
    pub axis: SweepAxis,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write 0 in the timing column so the CSV is byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
    /// Also write the first trial's scene at the first sweep value to this file.
    #[arg(long)]
    pub dump_scene: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Correspondence file, one `fx fy fz px py pz` per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "robust_upnp_incr", value_parser = parse_solver)]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Focal length in pixels (used for reprojection scores).
    #[arg(long, default_value_t = 800.0)]
    pub focal: f64,
    #[arg(long, default_value_t = 320.0)]
    pub cx: f64,
    #[arg(long, default_value_t = 240.0)]
    pub cy: f64,
    #[arg(long, default_value_t = 500)]
    pub ransac_iterations: usize,
    #[arg(long, default_value_t = 6.0)]
    pub ransac_threshold: f64,
}

fn parse_solver(s: &str) -> std::result::Result<SolverKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> std::result::Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_outlier_model(s: &str) -> std::result::Result<OutlierModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_noise_model(s: &str) -> std::result::Result<NoiseModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ScenarioArgs {
    fn base(&self) -> ScenarioConfig {
        ScenarioConfig {
            noise_model: self.noise_model,
            outlier_model: self.outlier_model,
            ..ScenarioConfig::new(self.n, self.noise, self.outliers, self.seed)
        }
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            ransac_iterations: self.ransac_iterations,
            ransac_threshold_px: self.ransac_threshold,
            ..SolverConfig::default()
        }
    }

    fn spec(&self, axis: SweepAxis, values: Vec<f64>) -> SweepSpec {
        SweepSpec {
            axis,
            values,
            trials: self.trials,
            solvers: self.solvers.clone(),
            base: self.base(),
            solver_config: self.solver_config(),
            camera: CameraModel::default(),
        }
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() && !e.to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for(args.get(1)));
            }
            return e.exit_code();
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match execute(&cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn usage_for(subcommand: Option<&OsString>) -> StyledStr {
    let mut root = Cli::command();
    root.build();
    let name = subcommand.and_then(|s| s.to_str()).unwrap_or_default();
    match root.find_subcommand_mut(name) {
        Some(sub) => sub.render_usage(),
        None => root.render_usage(),
    }
}

/// Run a parsed command, writing reports to `out`.
pub fn execute(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::BenchSort(a) => bench_sort(a, out),
        Command::BenchPnp(a) => bench_pnp(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Solve(a) => solve(a, out),
    }
}

fn io_err(e: io::Error) -> Error {
    Error::invalid(format!("i/o failure: {e}"))
}

fn bench_sort(a: &BenchSortArgs, out: &mut dyn Write) -> Result<()> {
    if a.trials == 0 || a.bins == 0 {
        return Err(Error::invalid("trials and bins must be positive"));
    }
    let r = sort_microbench(a.n, a.perturb, a.trials, a.seed)?;
    let conditions = [
        ("full_sort", &r.full_sort_s),
        ("partial_sort", &r.partial_sort_s),
        ("incremental_partial_sort", &r.incremental_sort_s),
    ];
    let lo = conditions
        .iter()
        .flat_map(|(_, v)| v.iter())
        .fold(f64::INFINITY, |m, x| m.min(*x));
    let hi = conditions
        .iter()
        .flat_map(|(_, v)| v.iter())
        .fold(0.0f64, |m, x| m.max(*x));
    let width = ((hi - lo) / a.bins as f64).max(f64::MIN_POSITIVE);
    let w = |e: io::Error| io_err(e);
    writeln!(out, "# n={} perturb={} trials={}", a.n, a.perturb, a.trials).map_err(w)?;
    writeln!(out, "condition,mean_time_s,median_time_s").map_err(w)?;
    for (name, times) in &conditions {
        writeln!(out, "{name},{},{}", mean(times), median(times)).map_err(w)?;
    }
    writeln!(out, "# histogram: bin_lower_s, counts per condition").map_err(w)?;
    writeln!(out, "bin_lower_s,full_sort,partial_sort,incremental_partial_sort").map_err(w)?;
    for b in 0..a.bins {
        let lower = lo + width * b as f64;
        let counts: Vec<usize> = conditions
            .iter()
            .map(|(_, v)| {
                v.iter()
                    .filter(|t| {
                        let idx = (((**t - lo) / width) as usize).min(a.bins - 1);
                        idx == b
                    })
                    .count()
            })
            .collect();
        writeln!(out, "{lower},{},{},{}", counts[0], counts[1], counts[2]).map_err(w)?;
    }
    writeln!(out, "op_fraction_mean,{}", r.mean_op_fraction()).map_err(w)?;
    writeln!(out, "op_fraction_median,{}", median(&r.op_fraction)).map_err(w)?;
    Ok(())
}

fn bench_pnp(a: &BenchPnpArgs, out: &mut dyn Write) -> Result<()> {
    let s = &a.scenario;
    let spec = s.spec(SweepAxis::N, vec![s.n as f64]);
    let points = run_sweep_records(&spec)?;
    let w = |e: io::Error| io_err(e);
    writeln!(
        out,
        "# n={} noise={} outliers={} trials={} seed={}",
        s.n, s.noise, s.outliers, s.trials, s.seed
    )
    .map_err(w)?;
    writeln!(
        out,
        "{:<18} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "solver", "mean_time_s", "mean_rot", "median_rot", "mean_pos", "median_pos", "converged"
    )
    .map_err(w)?;
    for point in &points {
        for (solver, records) in &point.records {
            let agg = Aggregate::from_records(&point.scenario, *solver, records);
            let conv = records.iter().filter(|r| r.converged).count();
            writeln!(
                out,
                "{:<18} {:>12.6} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>6}/{}",
                solver.name(),
                agg.mean_time_s,
                agg.mean_rotation_error,
                agg.median_rotation_error,
                agg.mean_position_error,
                agg.median_position_error,
                conv,
                records.len()
            )
            .map_err(w)?;
        }
    }
    Ok(())
}

/// CSV text for sweep aggregates, header included.
pub fn format_csv(rows: &[Aggregate], timing: bool) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let time = if timing { r.mean_time_s } else { 0.0 };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.solver.name(),
            r.n,
            r.noise_px,
            r.outlier_fraction,
            r.trials,
            r.mean_rotation_error,
            r.median_rotation_error,
            r.mean_position_error,
            r.median_position_error,
            time
        ));
    }
    s
}

fn sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let spec = a.scenario.spec(a.axis, a.values.clone());
    if let Some(path) = &a.dump_scene {
        let cfg = spec.scenario(spec.values[0], 0)?;
        let scene = generate_scene(&cfg, &spec.camera)?;
        fs::write(path, format_scene(&scene.correspondences)).map_err(io_err)?;
        eprintln!("scene written to {} (solver seed {})", path.display(), cfg.seed);
    }
    let csv = format_csv(&run_sweep(&spec)?, !a.no_timing);
    match &a.out {
        Some(path) => fs::write(path, csv).map_err(io_err),
        None => out.write_all(csv.as_bytes()).map_err(io_err),
    }
}

fn solve(a: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.input).map_err(|e| Error::invalid(format!("{}: {e}", a.input.display())))?;
    let corrs = parse_scene(&text)?;
    let cam = CameraModel::new(a.focal, Vector2::new(a.cx, a.cy))?;
    let config = SolverConfig {
        ransac_iterations: a.ransac_iterations,
        ransac_threshold_px: a.ransac_threshold,
        ..SolverConfig::default()
    }
    .with_seed(a.seed);
    let r = a.solver.solve(&corrs, &cam, &config)?;
    let q = r.pose.quaternion();
    let m = r.pose.rotation;
    let t = r.pose.translation;
    let w = |e: io::Error| io_err(e);
    writeln!(out, "solver {}", a.solver).map_err(w)?;
    writeln!(out, "quaternion_wxyz {} {} {} {}", q[0], q[1], q[2], q[3]).map_err(w)?;
    for i in 0..3 {
        writeln!(out, "rotation_row{} {} {} {}", i, m[(i, 0)], m[(i, 1)], m[(i, 2)]).map_err(w)?;
    }
    writeln!(out, "translation {} {} {}", t.x, t.y, t.z).map_err(w)?;
    writeln!(out, "inliers {}/{}", r.inliers.len(), corrs.len()).map_err(w)?;
    writeln!(out, "iterations {}", r.iterations).map_err(w)?;
    writeln!(out, "converged {}", r.converged).map_err(w)?;
    Ok(())
}
