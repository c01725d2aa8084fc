//! EPnP and its trimmed variant REPPnP.
//!
//! The unknown is the stacked camera-frame control points `theta` (12
//! values). Each correspondence contributes a 2x12 block `D_i` with
//! `D_i theta = 0` for noise-free data, so `theta` is the nullspace of the
//! normal matrix `sum D_i^T D_i`. The trimmed solver alternates between
//! ranking samples by `|D_i theta|` and re-extracting the nullspace over the
//! lower half.

use nalgebra::{SVector, SymmetricEigen, Vector3, Vector4};

use super::{check_count, retained_ids, EnergyStep, SolverConfig, SolverResult, TrimMode, MIN_TRIM_POINTS};
use crate::accum::{normal_term, Matrix12, NormalAccumulator12};
use crate::error::{Error, Result};
use crate::geom::{
    build_d, control_points, umeyama_align, CameraModel, ControlPointSystem, Correspondence, DBlock, Pose,
    MIN_BEARING_DEPTH,
};
use crate::trimsort::{ScoredEntry, TrimBoundary, TrimSorter};

pub type Vector12 = SVector<f64, 12>;

/// Score given to correspondences whose bearing does not point into the
/// half-space in front of the camera.
const UNUSABLE_SCORE: f64 = f64::MAX;

/// Control points and per-sample constraint blocks.
struct EpnpSystem {
    controls: ControlPointSystem,
    blocks: Vec<Option<DBlock>>,
}

impl EpnpSystem {
    fn new(corrs: &[Correspondence]) -> Result<Self> {
        let points: Vec<Vector3<f64>> = corrs.iter().map(|c| c.p).collect();
        let controls = control_points(&points)?;
        let blocks: Vec<Option<DBlock>> = corrs
            .iter()
            .zip(&controls.alphas)
            .map(|(c, a)| (c.f.z > MIN_BEARING_DEPTH).then(|| build_d(a, &c.f).ok()).flatten())
            .collect();
        Ok(Self { controls, blocks })
    }

    fn len(&self) -> usize {
        self.blocks.len()
    }

    /// `D_i^T D_i`, zero for unusable samples.
    fn term(&self, id: usize) -> Matrix12 {
        self.blocks[id].as_ref().map_or_else(Matrix12::zeros, normal_term)
    }

    fn score(&self, id: usize, theta: &Vector12) -> f64 {
        self.blocks[id].as_ref().map_or(UNUSABLE_SCORE, |d| (d * theta).norm())
    }

    /// Fix the sign of `theta` by positive mean depth over `ids`, then align
    /// the control points with scale.
    fn pose(&self, theta: &Vector12, ids: &[usize]) -> Result<Pose> {
        let mut cams: [Vector3<f64>; 4] = std::array::from_fn(|j| theta.fixed_rows::<3>(3 * j).into_owned());
        let weights = ids
            .iter()
            .fold(Vector4::zeros(), |acc, &i| acc + self.controls.alphas[i]);
        let depth: f64 = (0..4).map(|j| weights[j] * cams[j].z).sum();
        if depth < 0.0 {
            cams.iter_mut().for_each(|c| *c = -*c);
        }
        let (aligned, scale) = umeyama_align(&self.controls.points, &cams)?;
        if !(scale > 0.0) {
            return Err(Error::degenerate("control point alignment collapsed"));
        }
        Ok(Pose::new(aligned.rotation, aligned.translation / scale))
    }
}

/// Unit eigenvector of the smallest eigenvalue, largest component positive.
pub fn nullspace_vector(a: &Matrix12) -> Vector12 {
    let eig = SymmetricEigen::new(*a);
    let v: Vector12 = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
    let pivot = v.iamax();
    if v[pivot] < 0.0 {
        -v
    } else {
        v
    }
}

fn sign_free_distance(a: &Vector12, b: &Vector12) -> f64 {
    (a - b).norm().min((a + b).norm())
}

/// EPnP over all correspondences (single nullspace vector).
pub fn epnp(correspondences: &[Correspondence], _cam: &CameraModel) -> Result<Pose> {
    check_count(correspondences.len(), 6)?;
    let system = EpnpSystem::new(correspondences)?;
    let mut acc = NormalAccumulator12::default();
    acc.rebuild_with(0..system.len(), system.len(), |i| system.term(i))?;
    let theta = nullspace_vector(acc.read());
    let all: Vec<usize> = (0..correspondences.len()).collect();
    system.pose(&theta, &all)
}

/// REPPnP with a full sort and a from-scratch accumulation every iteration.
pub fn reppnp(correspondences: &[Correspondence], _cam: &CameraModel, config: &SolverConfig) -> Result<SolverResult> {
    trimmed(correspondences, config, TrimMode::Full)
}

/// REPPnP with partial incremental sorting and journal-driven accumulation.
pub fn reppnp_incr(
    correspondences: &[Correspondence],
    _cam: &CameraModel,
    config: &SolverConfig,
) -> Result<SolverResult> {
    trimmed(correspondences, config, TrimMode::Incremental)
}

fn trimmed(corrs: &[Correspondence], config: &SolverConfig, mode: TrimMode) -> Result<SolverResult> {
    let n = corrs.len();
    check_count(n, MIN_TRIM_POINTS)?;
    config.validate()?;
    let system = EpnpSystem::new(corrs)?;
    let boundary = TrimBoundary::median(n)?;
    let k = boundary.k();

    let mut acc = NormalAccumulator12::default();
    acc.rebuild_with(0..n, n, |i| system.term(i))?;
    let mut theta = nullspace_vector(acc.read());
    let mut entries: Vec<ScoredEntry> = (0..n).map(|i| ScoredEntry::new(system.score(i, &theta), i)).collect();
    acc.rebuild_with(entries[..k].iter().map(|e| e.id), n, |i| system.term(i))?;

    let mut sorter = TrimSorter::new();
    let mut journal_sizes = Vec::new();
    let mut energy_steps = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let journal = mode.resort(&mut sorter, &mut entries, boundary)?;
        mode.refresh(&mut acc, &journal, &entries[..k], n, |i| system.term(i))?;
        let a = acc.read();
        let next = nullspace_vector(a);
        energy_steps.push(EnergyStep {
            previous: theta.dot(&(a * theta)),
            current: next.dot(&(a * next)),
        });
        let change = sign_free_distance(&next, &theta);
        theta = next;
        journal_sizes.push(journal.len());
        if journal.is_empty() && change < config.tolerance {
            converged = true;
            break;
        }
        for e in entries.iter_mut() {
            e.score = system.score(e.id, &theta);
        }
    }

    // Final fit from a fresh sum in id order, so both modes agree to the last bit.
    let inliers = retained_ids(&entries[..k]);
    acc.rebuild_with(inliers.iter().copied(), n, |i| system.term(i))?;
    let theta = nullspace_vector(acc.read());
    let pose = system.pose(&theta, &inliers)?;
    Ok(SolverResult {
        pose,
        inliers,
        iterations,
        converged,
        journal_sizes,
        energy_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rotation_error;
    use crate::synthbench::{generate_scene, OutlierModel, ScenarioConfig};

    fn scene(n: usize, noise: f64, outliers: f64, seed: u64) -> (Vec<Correspondence>, Pose, Vec<bool>) {
        scene_with(n, noise, outliers, seed, OutlierModel::Sphere)
    }

    fn scene_with(
        n: usize,
        noise: f64,
        outliers: f64,
        seed: u64,
        outlier_model: OutlierModel,
    ) -> (Vec<Correspondence>, Pose, Vec<bool>) {
        let cfg = ScenarioConfig {
            outlier_model,
            ..ScenarioConfig::new(n, noise, outliers, seed)
        };
        let s = generate_scene(&cfg, &CameraModel::default()).unwrap();
        (s.correspondences, s.ground_truth, s.is_outlier)
    }

    #[test]
    fn epnp_exact_on_clean_data() {
        for seed in 0..10 {
            let (corrs, gt, _) = scene(50, 0.0, 0.0, seed);
            let pose = epnp(&corrs, &CameraModel::default()).unwrap();
            assert!(rotation_error(&pose.rotation, &gt.rotation) < 1e-6);
            assert!((pose.translation - gt.translation).norm() < 1e-6);
        }
    }

    #[test]
    fn epnp_needs_six_points() {
        let (corrs, _, _) = scene(50, 0.0, 0.0, 1);
        assert!(matches!(
            epnp(&corrs[..5], &CameraModel::default()),
            Err(Error::TooFewPoints { needed: 6, got: 5 })
        ));
        assert!(matches!(
            reppnp_incr(&corrs[..11], &CameraModel::default(), &SolverConfig::default()),
            Err(Error::TooFewPoints { needed: 12, .. })
        ));
    }

    #[test]
    fn initial_full_accumulator_is_direct_sum() {
        let (corrs, _, _) = scene(2000, 3.0, 0.3, 4);
        let system = EpnpSystem::new(&corrs).unwrap();
        let mut acc = NormalAccumulator12::default();
        acc.rebuild_with(0..corrs.len(), corrs.len(), |i| system.term(i))
            .unwrap();
        let direct = system
            .blocks
            .iter()
            .flatten()
            .fold(Matrix12::zeros(), |a, d| a + d.transpose() * d);
        assert!(crate::accum::relative_frobenius(acc.read(), &direct) < 1e-12);
        let sym = acc.read() - acc.read().transpose();
        assert!(sym.amax() < 1e-12);
        let eig = SymmetricEigen::new(*acc.read());
        assert!(eig.eigenvalues.min() > -1e-9);
    }

    #[test]
    fn reppnp_recovers_pose_under_outliers() {
        // outlier bearings inside the field of view
        let (corrs, gt, outlier) = scene_with(200, 0.0, 0.3, 5, OutlierModel::Volume);
        let res = reppnp(&corrs, &CameraModel::default(), &SolverConfig::default()).unwrap();
        assert!(rotation_error(&res.pose.rotation, &gt.rotation) < 1e-6);
        assert_eq!(res.inliers.len(), 100);
        assert!(res.inliers.iter().all(|&i| !outlier[i]));
    }

    #[test]
    fn reppnp_without_outliers_is_close_to_epnp() {
        let cam = CameraModel::default();
        for seed in 0..10 {
            let (corrs, _, _) = scene(300, 0.5, 0.0, seed);
            let full = epnp(&corrs, &cam).unwrap();
            let res = reppnp(&corrs, &cam, &SolverConfig::default()).unwrap();
            assert_eq!(res.inliers.len(), 150);
            assert!(res.journal_sizes.len() == res.iterations);
            // rotation_error is sqrt(2) times the angle for small angles
            assert!(rotation_error(&res.pose.rotation, &full.rotation) < 1e-3 * 2f64.sqrt());
        }
    }

    #[test]
    fn full_and_incremental_agree() {
        let cam = CameraModel::default();
        for seed in 0..5 {
            let (corrs, _, _) = scene(2000, 3.0, 0.3, 100 + seed);
            let a = reppnp(&corrs, &cam, &SolverConfig::default()).unwrap();
            let b = reppnp_incr(&corrs, &cam, &SolverConfig::default()).unwrap();
            assert_eq!(a.inliers, b.inliers);
            assert!(rotation_error(&a.pose.rotation, &b.pose.rotation) < 1e-9);
            assert!((a.pose.translation - b.pose.translation).norm() < 1e-9);
        }
    }

    #[test]
    fn converged_run_ends_with_empty_journal() {
        let (corrs, _, _) = scene(500, 1.0, 0.2, 8);
        let res = reppnp_incr(&corrs, &CameraModel::default(), &SolverConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(*res.journal_sizes.last().unwrap(), 0);
        for step in &res.energy_steps {
            assert!(step.current <= step.previous + 1e-12 * step.previous.abs().max(1.0));
        }
    }
}
