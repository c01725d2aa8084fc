//! Synthetic scenes, solver sweeps and the sorting microbenchmark.
//!
//! All randomness comes from `ChaCha8Rng`. A scene is a pure function of its
//! [`ScenarioConfig`]; sweeps derive trial `j`'s scene seed as the first
//! output of `ChaCha8Rng::seed_from_u64(seed)` switched to stream `j`, so
//! every trial owns an independent stream and results are reproducible
//! across platforms.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::geom::{quaternion_to_rotation, rotation_error, CameraModel, Correspondence, Pose, Quat};
use crate::solvers::{SolverConfig, SolverKind, MIN_TRIM_POINTS};
use crate::trimsort::{ScoredEntry, TrimBoundary, TrimSorter};

/// Distribution of the per-axis pixel noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// Uniform in `[-noise, noise]`.
    #[default]
    Uniform,
    /// Zero-mean normal with standard deviation `noise`.
    Gaussian,
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NoiseModel::Uniform),
            "gaussian" => Ok(NoiseModel::Gaussian),
            _ => Err(Error::invalid(format!("unknown noise model '{s}'"))),
        }
    }
}

/// How the bearings of outlier correspondences are randomised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutlierModel {
    /// Uniform on the unit sphere.
    #[default]
    Sphere,
    /// Towards a uniform random point of the scene volume, so outliers stay
    /// in the field of view.
    Volume,
}

impl FromStr for OutlierModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(OutlierModel::Sphere),
            "volume" => Ok(OutlierModel::Volume),
            _ => Err(Error::invalid(format!("unknown outlier model '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    /// Pixel noise magnitude.
    pub noise_px: f64,
    /// Fraction of bearings replaced by random directions, in `[0, 0.5]`.
    pub outlier_fraction: f64,
    pub seed: u64,
    pub noise_model: NoiseModel,
    pub outlier_model: OutlierModel,
}

impl ScenarioConfig {
    pub fn new(n: usize, noise_px: f64, outlier_fraction: f64, seed: u64) -> Self {
        Self {
            n,
            noise_px,
            outlier_fraction,
            seed,
            noise_model: NoiseModel::Uniform,
            outlier_model: OutlierModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_TRIM_POINTS {
            return Err(Error::invalid(format!("scene needs at least {MIN_TRIM_POINTS} points")));
        }
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return Err(Error::invalid("noise must be finite and non-negative"));
        }
        if !(0.0..=0.5).contains(&self.outlier_fraction) {
            return Err(Error::invalid("outlier fraction must lie in [0, 0.5]"));
        }
        Ok(())
    }

    /// Number of randomised bearings, `floor(outlier_fraction * n)`.
    pub fn outlier_count(&self) -> usize {
        (self.outlier_fraction * self.n as f64).floor() as usize
    }
}

/// A generated problem with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub correspondences: Vec<Correspondence>,
    pub ground_truth: Pose,
    pub is_outlier: Vec<bool>,
}

/// Points uniform in `[-2,2] x [-2,2] x [4,8]` in the camera frame, pixel
/// noise added before back-projection, a random subset of bearings replaced
/// per [`OutlierModel`], world points `R^T (x - t)`.
pub fn generate_scene(config: &ScenarioConfig, cam: &CameraModel) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let q = random_unit_quaternion(&mut rng);
    let rotation = quaternion_to_rotation(&q);
    let translation = Vector3::from_fn(|_, _| rng.random_range(-2.0..=2.0));
    let ground_truth = Pose::new(rotation, translation);

    let gaussian = Normal::new(0.0, config.noise_px).map_err(|e| Error::invalid(e.to_string()))?;
    let mut correspondences = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let x = random_scene_point(&mut rng);
        let pixel = cam.project(&x).expect("scene points lie in front of the camera");
        let noise = match config.noise_model {
            NoiseModel::Uniform if config.noise_px > 0.0 => {
                Vector2::from_fn(|_, _| rng.random_range(-config.noise_px..=config.noise_px))
            }
            NoiseModel::Gaussian if config.noise_px > 0.0 => Vector2::from_fn(|_, _| gaussian.sample(&mut rng)),
            _ => Vector2::zeros(),
        };
        let f = if config.noise_px > 0.0 {
            cam.unproject(&(pixel + noise))
        } else {
            x.normalize()
        };
        let p = rotation.transpose() * (x - translation);
        correspondences.push(Correspondence::new(f, p)?);
    }

    let mut is_outlier = vec![false; config.n];
    for i in sample(&mut rng, config.n, config.outlier_count()).into_iter() {
        correspondences[i].f = match config.outlier_model {
            OutlierModel::Sphere => Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng)).normalize(),
            OutlierModel::Volume => random_scene_point(&mut rng).normalize(),
        };
        is_outlier[i] = true;
    }
    Ok(Scene {
        correspondences,
        ground_truth,
        is_outlier,
    })
}

/// Uniform in the camera-frame volume `[-2,2] x [-2,2] x [4,8]`.
fn random_scene_point(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-2.0..=2.0),
        rng.random_range(-2.0..=2.0),
        rng.random_range(4.0..=8.0),
    )
}

fn random_unit_quaternion(rng: &mut ChaCha8Rng) -> Quat {
    loop {
        let q = Quat::from_fn(|_, _| StandardNormal.sample(&mut *rng));
        let n = q.norm();
        if n > 1e-6 {
            return q / n;
        }
    }
}

/// Seed of trial `trial` in a run seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.next_u64()
}

/// Outcome of one solver on one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub solver: SolverKind,
    pub rotation_error: f64,
    pub position_error: f64,
    pub time_s: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Journal sizes per trim iteration (empty for non-trim solvers).
    pub journal_sizes: Vec<usize>,
}

/// Run `solver` on `scene`, timing only the solver call. A solver error is
/// recorded as a non-converged trial at the identity pose.
pub fn run_trial(solver: SolverKind, scene: &Scene, cam: &CameraModel, config: &SolverConfig) -> TrialRecord {
    let start = Instant::now();
    let outcome = solver.solve(&scene.correspondences, cam, config);
    let time_s = start.elapsed().as_secs_f64();
    let (pose, iterations, converged, journal_sizes) = match outcome {
        Ok(r) => (r.pose, r.iterations, r.converged, r.journal_sizes),
        Err(_) => (Pose::identity(), 0, false, Vec::new()),
    };
    TrialRecord {
        solver,
        rotation_error: rotation_error(&pose.rotation, &scene.ground_truth.rotation),
        position_error: (pose.translation - scene.ground_truth.translation).norm(),
        time_s,
        iterations,
        converged,
        journal_sizes,
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Swept scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    N,
    Noise,
    Outliers,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepAxis::N),
            "noise" => Ok(SweepAxis::Noise),
            "outliers" => Ok(SweepAxis::Outliers),
            _ => Err(Error::invalid(format!("unknown sweep axis '{s}'"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::N => "n",
            SweepAxis::Noise => "noise",
            SweepAxis::Outliers => "outliers",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    /// Scenario for the fields that are not swept; its seed is the run seed.
    pub base: ScenarioConfig,
    pub solver_config: SolverConfig,
    pub camera: CameraModel,
}

impl SweepSpec {
    /// Scenario of sweep point `value` for trial `trial`.
    pub fn scenario(&self, value: f64, trial: usize) -> Result<ScenarioConfig> {
        let mut cfg = self.base;
        match self.axis {
            SweepAxis::N => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(format!("point count {value} is not an integer")));
                }
                cfg.n = value as usize;
            }
            SweepAxis::Noise => cfg.noise_px = value,
            SweepAxis::Outliers => cfg.outlier_fraction = value,
        }
        cfg.seed = trial_seed(self.base.seed, trial as u64);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Mean and median errors of one solver at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub solver: SolverKind,
    pub n: usize,
    pub noise_px: f64,
    pub outlier_fraction: f64,
    pub trials: usize,
    pub mean_rotation_error: f64,
    pub median_rotation_error: f64,
    pub mean_position_error: f64,
    pub median_position_error: f64,
    pub mean_time_s: f64,
}

impl Aggregate {
    pub fn from_records(scenario: &ScenarioConfig, solver: SolverKind, records: &[TrialRecord]) -> Self {
        let rot: Vec<f64> = records.iter().map(|r| r.rotation_error).collect();
        let pos: Vec<f64> = records.iter().map(|r| r.position_error).collect();
        let time: Vec<f64> = records.iter().map(|r| r.time_s).collect();
        Self {
            solver,
            n: scenario.n,
            noise_px: scenario.noise_px,
            outlier_fraction: scenario.outlier_fraction,
            trials: records.len(),
            mean_rotation_error: mean(&rot),
            median_rotation_error: median(&rot),
            mean_position_error: mean(&pos),
            median_position_error: median(&pos),
            mean_time_s: mean(&time),
        }
    }
}

/// All per-trial records of a sweep, grouped by sweep point then solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub scenario: ScenarioConfig,
    pub records: Vec<(SolverKind, Vec<TrialRecord>)>,
}

/// Every solver runs on the same scenes; trial `j` uses the same seed at
/// every sweep point.
pub fn run_sweep_records(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    if spec.trials == 0 || spec.values.is_empty() || spec.solvers.is_empty() {
        return Err(Error::invalid("sweep needs trials, values and solvers"));
    }
    let mut points = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let mut records: Vec<(SolverKind, Vec<TrialRecord>)> = spec
            .solvers
            .iter()
            .map(|&s| (s, Vec::with_capacity(spec.trials)))
            .collect();
        let mut scenario = spec.scenario(value, 0)?;
        for trial in 0..spec.trials {
            scenario = spec.scenario(value, trial)?;
            let scene = generate_scene(&scenario, &spec.camera)?;
            let config = spec.solver_config.clone().with_seed(scenario.seed);
            for (solver, out) in records.iter_mut() {
                out.push(run_trial(*solver, &scene, &spec.camera, &config));
            }
        }
        scenario.seed = spec.base.seed;
        points.push(SweepPoint { scenario, records });
    }
    Ok(points)
}

/// [`run_sweep_records`] reduced to one [`Aggregate`] per (value, solver).
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<Aggregate>> {
    Ok(run_sweep_records(spec)?
        .iter()
        .flat_map(|p| {
            p.records
                .iter()
                .map(|(s, r)| Aggregate::from_records(&p.scenario, *s, r))
        })
        .collect())
}

/// Timings and operation counts of the three sorting conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrobenchReport {
    pub n: usize,
    pub perturbation: f64,
    /// Seconds per trial for a full sort from scratch.
    pub full_sort_s: Vec<f64>,
    /// Seconds per trial for a partial sort from scratch.
    pub partial_sort_s: Vec<f64>,
    /// Seconds per trial for the partial re-sort after perturbation.
    pub incremental_sort_s: Vec<f64>,
    /// Journal term operations over `k` (naive summation cost) per trial.
    pub op_fraction: Vec<f64>,
}

impl MicrobenchReport {
    pub fn mean_op_fraction(&self) -> f64 {
        mean(&self.op_fraction)
    }
}

/// Values uniform in `[-10, 10]`, perturbed by uniform `[-p, p]`. Scores are
/// offset by `10 + p` so they stay non-negative; the ordering is unchanged.
pub fn sort_microbench(n: usize, perturbation: f64, trials: usize, seed: u64) -> Result<MicrobenchReport> {
    if !(perturbation >= 0.0 && perturbation.is_finite()) {
        return Err(Error::invalid("perturbation must be finite and non-negative"));
    }
    if n < 2 {
        return Err(Error::invalid("microbench needs at least 2 values"));
    }
    let boundary = TrimBoundary::median(n)?;
    let offset = 10.0 + perturbation;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sorter = TrimSorter::new();
    let mut report = MicrobenchReport {
        n,
        perturbation,
        full_sort_s: Vec::with_capacity(trials),
        partial_sort_s: Vec::with_capacity(trials),
        incremental_sort_s: Vec::with_capacity(trials),
        op_fraction: Vec::with_capacity(trials),
    };
    for _ in 0..trials {
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..=10.0)).collect();
        let fresh: Vec<ScoredEntry> = values
            .iter()
            .enumerate()
            .map(|(i, v)| ScoredEntry::new(v + offset, i))
            .collect();

        let mut full = fresh.clone();
        let t = Instant::now();
        full.sort_unstable_by(ScoredEntry::cmp_key);
        report.full_sort_s.push(t.elapsed().as_secs_f64());

        let mut entries = fresh;
        let t = Instant::now();
        sorter.quicksort4trim(&mut entries, boundary)?;
        report.partial_sort_s.push(t.elapsed().as_secs_f64());

        for e in entries.iter_mut() {
            let delta = if perturbation > 0.0 {
                rng.random_range(-perturbation..=perturbation)
            } else {
                0.0
            };
            e.score = values[e.id] + delta + offset;
        }
        let t = Instant::now();
        let journal = sorter.quicksort4trim(&mut entries, boundary)?;
        report.incremental_sort_s.push(t.elapsed().as_secs_f64());
        report.op_fraction.push(journal.len() as f64 / boundary.k() as f64);
    }
    Ok(report)
}

/// One correspondence per line, `fx fy fz px py pz`, in shortest round-trip
/// decimal form.
pub fn format_scene(correspondences: &[Correspondence]) -> String {
    let mut out = String::new();
    for c in correspondences {
        out.push_str(&format!(
            "{} {} {} {} {} {}\n",
            c.f.x, c.f.y, c.f.z, c.p.x, c.p.y, c.p.z
        ));
    }
    out
}

/// Inverse of [`format_scene`]. Bearings within 1e-6 of unit length are
/// normalised; errors name the offending 1-based line. Blank lines are skipped.
pub fn parse_scene(text: &str) -> Result<Vec<Correspondence>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("line {lineno}: {e}")))?;
        if values.len() != 6 {
            return Err(Error::invalid(format!(
                "line {lineno}: expected 6 values, found {}",
                values.len()
            )));
        }
        let mut f = Vector3::new(values[0], values[1], values[2]);
        let p = Vector3::new(values[3], values[4], values[5]);
        let norm = f.norm();
        if !((norm - 1.0).abs() <= 1e-6) {
            return Err(Error::invalid(format!("line {lineno}: bearing norm {norm} is not 1")));
        }
        if (norm - 1.0).abs() > 1e-12 {
            f /= norm;
        }
        out.push(Correspondence::new(f, p).map_err(|e| Error::invalid(format!("line {lineno}: {e}")))?);
    }
    if out.is_empty() {
        return Err(Error::invalid("scene contains no correspondences"));
    }
    Ok(out)
}
