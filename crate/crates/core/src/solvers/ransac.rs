use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_count, epnp, p3p, SolverResult};
use crate::error::{Error, Result};
use crate::geom::{reprojection_error, CameraModel, Correspondence, Pose};

/// Smallest consensus set for which a run counts as converged.
const MIN_CONSENSUS: usize = 4;
/// Smallest consensus set handed to the EPnP refit.
const MIN_REFIT: usize = 6;

/// Fixed-iteration RANSAC over P3P hypotheses, scored by pixel reprojection
/// error, with an EPnP refit on the best consensus set.
///
/// Deterministic for a given `seed`. When the refit fails (too few or
/// degenerate inliers) the best hypothesis is returned as is.
pub fn ransac_p3p(
    correspondences: &[Correspondence],
    cam: &CameraModel,
    threshold_px: f64,
    max_iterations: usize,
    seed: u64,
) -> Result<SolverResult> {
    let n = correspondences.len();
    check_count(n, MIN_CONSENSUS)?;
    if !(threshold_px > 0.0) || max_iterations == 0 {
        return Err(Error::invalid("threshold and iteration count must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Pose, usize)> = None;
    for _ in 0..max_iterations {
        let idx = sample(&mut rng, n, 3);
        let triple = [
            correspondences[idx.index(0)],
            correspondences[idx.index(1)],
            correspondences[idx.index(2)],
        ];
        for pose in p3p(&triple) {
            let support = correspondences
                .iter()
                .filter(|c| reprojection_error(&pose, c, cam) < threshold_px)
                .count();
            if best.as_ref().is_none_or(|(_, s)| support > *s) {
                best = Some((pose, support));
            }
        }
    }

    let Some((hypothesis, _)) = best else {
        return Ok(SolverResult {
            pose: Pose::identity(),
            inliers: Vec::new(),
            iterations: max_iterations,
            converged: false,
            journal_sizes: Vec::new(),
            energy_steps: Vec::new(),
        });
    };
    let inliers = consensus(&hypothesis, correspondences, cam, threshold_px);
    let pose = if inliers.len() >= MIN_REFIT {
        let subset: Vec<Correspondence> = inliers.iter().map(|&i| correspondences[i]).collect();
        epnp(&subset, cam).unwrap_or(hypothesis)
    } else {
        hypothesis
    };
    Ok(SolverResult {
        pose,
        converged: inliers.len() >= MIN_CONSENSUS,
        inliers,
        iterations: max_iterations,
        journal_sizes: Vec::new(),
        energy_steps: Vec::new(),
    })
}

fn consensus(pose: &Pose, corrs: &[Correspondence], cam: &CameraModel, threshold_px: f64) -> Vec<usize> {
    corrs
        .iter()
        .enumerate()
        .filter(|(_, c)| reprojection_error(pose, c, cam) < threshold_px)
        .map(|(i, _)| i)
        .collect()
}
