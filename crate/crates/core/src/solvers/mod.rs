//! Pose solvers.
//!
//! | name               | method                                                   |
//! |--------------------|----------------------------------------------------------|
//! | `epnp`             | EPnP nullspace over all samples                          |
//! | `reppnp`           | trimmed EPnP, full sort and naive accumulation per round |
//! | `reppnp_incr`      | trimmed EPnP, partial incremental sort and accumulation  |
//! | `upnp`             | object-space energy over all samples                     |
//! | `robust_upnp`      | trimmed UPnP, full sort and naive accumulation           |
//! | `robust_upnp_incr` | trimmed UPnP, partial incremental sort and accumulation  |
//! | `p3p_ransac`       | P3P hypotheses in a fixed-iteration RANSAC, EPnP refit   |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::{CameraModel, Correspondence, Pose};

mod p3p;
mod ransac;
mod reppnp;
mod upnp;

pub use p3p::p3p;
pub use ransac::ransac_p3p;
pub use reppnp::{epnp, nullspace_vector, reppnp, reppnp_incr};
pub use upnp::{
    assemble_energy, build_upnp_accumulators, minimize_quartic, minimize_quartic_from, quartic_energy,
    quartic_local_minima, riemannian_gradient, robust_upnp, robust_upnp_incr, translation_from_rotation, upnp,
    upnp_term, Matrix10, UpnpAccumulators,
};

/// Smallest input size accepted by the trimmed solvers; the retained half
/// must still determine the 12-dimensional EPnP system.
pub const MIN_TRIM_POINTS: usize = 12;

/// Tuning shared by all solvers. Every field has a documented default.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Upper bound on trim iterations.
    pub max_iterations: usize,
    /// Parameter change below which an unchanged retained set counts as converged.
    pub tolerance: f64,
    /// Random restarts of the quaternion minimiser (the warm start is extra).
    pub restarts: usize,
    /// Seed for every random choice a solver makes.
    pub seed: u64,
    /// RANSAC hypothesis count.
    pub ransac_iterations: usize,
    /// RANSAC inlier threshold in pixels.
    pub ransac_threshold_px: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            tolerance: 1e-10,
            restarts: 20,
            seed: 0,
            ransac_iterations: 500,
            ransac_threshold_px: 6.0,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || self.restarts == 0
            || self.ransac_iterations == 0
            || !(self.tolerance > 0.0)
            || !(self.ransac_threshold_px > 0.0)
        {
            return Err(Error::invalid("solver configuration values must be positive"));
        }
        Ok(())
    }
}

/// Trimmed energy of the retained set before and after one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyStep {
    /// Energy of the new retained set at the previous parameters.
    pub previous: f64,
    /// Energy of the new retained set at the updated parameters.
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub pose: Pose,
    /// Retained sample ids, ascending.
    pub inliers: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// `|plus| + |minus|` of every trim iteration.
    pub journal_sizes: Vec<usize>,
    /// Per-iteration energy bookkeeping of the trimmed solvers.
    pub energy_steps: Vec<EnergyStep>,
}

impl SolverResult {
    pub(crate) fn single_shot(pose: Pose, n: usize) -> Self {
        Self {
            pose,
            inliers: (0..n).collect(),
            iterations: 1,
            converged: true,
            journal_sizes: Vec::new(),
            energy_steps: Vec::new(),
        }
    }
}

/// The solvers selectable from the CLI and the C API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Epnp,
    Reppnp,
    ReppnpIncr,
    Upnp,
    RobustUpnp,
    RobustUpnpIncr,
    P3pRansac,
}

impl SolverKind {
    pub const ALL: [SolverKind; 7] = [
        SolverKind::Epnp,
        SolverKind::Reppnp,
        SolverKind::ReppnpIncr,
        SolverKind::Upnp,
        SolverKind::RobustUpnp,
        SolverKind::RobustUpnpIncr,
        SolverKind::P3pRansac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Epnp => "epnp",
            SolverKind::Reppnp => "reppnp",
            SolverKind::ReppnpIncr => "reppnp_incr",
            SolverKind::Upnp => "upnp",
            SolverKind::RobustUpnp => "robust_upnp",
            SolverKind::RobustUpnpIncr => "robust_upnp_incr",
            SolverKind::P3pRansac => "p3p_ransac",
        }
    }

    pub fn solve(
        self,
        correspondences: &[Correspondence],
        cam: &CameraModel,
        config: &SolverConfig,
    ) -> Result<SolverResult> {
        config.validate()?;
        let n = correspondences.len();
        match self {
            SolverKind::Epnp => Ok(SolverResult::single_shot(epnp(correspondences, cam)?, n)),
            SolverKind::Reppnp => reppnp(correspondences, cam, config),
            SolverKind::ReppnpIncr => reppnp_incr(correspondences, cam, config),
            SolverKind::Upnp => Ok(SolverResult::single_shot(upnp(correspondences, config)?, n)),
            SolverKind::RobustUpnp => robust_upnp(correspondences, cam, config),
            SolverKind::RobustUpnpIncr => robust_upnp_incr(correspondences, cam, config),
            SolverKind::P3pRansac => ransac_p3p(
                correspondences,
                cam,
                config.ransac_threshold_px,
                config.ransac_iterations,
                config.seed,
            ),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown solver '{s}'")))
    }
}

pub(crate) fn check_count(n: usize, needed: usize) -> Result<()> {
    if n < needed {
        Err(Error::TooFewPoints { needed, got: n })
    } else {
        Ok(())
    }
}

/// How a trimmed solver re-ranks samples and refreshes its accumulators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TrimMode {
    /// Full sort, accumulators summed from scratch over the retained half.
    Full,
    /// `quicksort4trim` plus journal replay.
    Incremental,
}

impl TrimMode {
    pub(crate) fn resort(
        self,
        sorter: &mut crate::trimsort::TrimSorter,
        entries: &mut [crate::trimsort::ScoredEntry],
        boundary: crate::trimsort::TrimBoundary,
    ) -> Result<crate::trimsort::SwapJournal> {
        match self {
            TrimMode::Full => sorter.full_sort(entries, boundary),
            TrimMode::Incremental => sorter.quicksort4trim(entries, boundary),
        }
    }

    /// Bring `acc` to the sum over `retained`. Terms are computed on demand:
    /// `Full` evaluates every retained term, `Incremental` only the journal's.
    pub(crate) fn refresh<T, F>(
        self,
        acc: &mut crate::accum::Accumulator<T>,
        journal: &crate::trimsort::SwapJournal,
        retained: &[crate::trimsort::ScoredEntry],
        n: usize,
        term_of: F,
    ) -> Result<()>
    where
        T: crate::accum::Term,
        F: Fn(usize) -> T,
    {
        let ids = retained.iter().map(|e| e.id);
        match self {
            TrimMode::Full => acc.rebuild_with(ids, n, term_of),
            TrimMode::Incremental => acc.update_with(journal, ids, n, term_of),
        }
    }
}

pub(crate) fn retained_ids(retained: &[crate::trimsort::ScoredEntry]) -> Vec<usize> {
    let mut ids: Vec<usize> = retained.iter().map(|e| e.id).collect();
    ids.sort_unstable();
    ids
}
