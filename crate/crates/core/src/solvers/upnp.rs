//! UPnP-style geometric solver and its trimmed variant.
//!
//! The object-space residual of sample `i` is the distance of `R p_i + t`
//! from the ray through `f_i`. With `R p = Phi(p) m(q)` and the optimal
//! translation eliminated, the summed squared residual is the quartic form
//! `m(q)^T A m(q)`, where `A` is assembled from five accumulators
//! (`H`, `A0`..`A3`) that are plain sums over the retained samples. The
//! trimmed solver keeps those five sums up to date from the sort journal.
//!
//! The quartic is minimised on the unit quaternion sphere by a multi-start
//! Riemannian Newton method.

use nalgebra::{Matrix3, Matrix4, SMatrix, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_count, retained_ids, EnergyStep, SolverConfig, SolverResult, TrimMode, MIN_TRIM_POINTS};
use crate::accum::{Accumulator, Term};
use crate::error::{Error, Result};
use crate::geom::{
    canonical_sign, monomials_raw, phi, quaternion_to_rotation, reprojection_error, CameraModel, Correspondence, Pose,
    Quat,
};
use crate::trimsort::{ScoredEntry, TrimBoundary, TrimSorter};

pub type Matrix10 = SMatrix<f64, 10, 10>;
type Matrix3x10 = SMatrix<f64, 3, 10>;
type Matrix10x3 = SMatrix<f64, 10, 3>;
type Matrix10x4 = SMatrix<f64, 10, 4>;
type Matrix4x3 = SMatrix<f64, 4, 3>;

/// Largest accepted condition number of `H`.
const MAX_H_CONDITION: f64 = 1e12;
const MAX_NEWTON_STEPS: usize = 60;

/// The five sums from which the quartic energy matrix is assembled.
///
/// A single correspondence's contribution has the same shape, so this type
/// doubles as the per-sample term of an [`Accumulator`].
#[derive(Debug, Clone, PartialEq)]
pub struct UpnpAccumulators {
    /// `sum (I - f f^T)`
    pub h: Matrix3<f64>,
    /// `sum (f f^T - I) Phi(p)`
    pub a0: Matrix3x10,
    /// `sum Phi^T (f f^T - I)^2 Phi`
    pub a1: Matrix10,
    /// `sum Phi^T (f f^T - I)^2`
    pub a2: Matrix10x3,
    /// `sum (f f^T - I)^2`
    pub a3: Matrix3<f64>,
}

impl Term for UpnpAccumulators {
    fn zero() -> Self {
        Self {
            h: Matrix3::zeros(),
            a0: Matrix3x10::zeros(),
            a1: Matrix10::zeros(),
            a2: Matrix10x3::zeros(),
            a3: Matrix3::zeros(),
        }
    }

    fn add_assign(&mut self, o: &Self) {
        self.h += o.h;
        self.a0 += o.a0;
        self.a1 += o.a1;
        self.a2 += o.a2;
        self.a3 += o.a3;
    }

    fn sub_assign(&mut self, o: &Self) {
        self.h -= o.h;
        self.a0 -= o.a0;
        self.a1 -= o.a1;
        self.a2 -= o.a2;
        self.a3 -= o.a3;
    }

    fn symmetrize(&mut self) {
        self.h.symmetrize();
        self.a1.symmetrize();
        self.a3.symmetrize();
    }
}

impl UpnpAccumulators {
    fn scaled(mut self, w: f64) -> Self {
        self.h *= w;
        self.a0 *= w;
        self.a1 *= w;
        self.a2 *= w;
        self.a3 *= w;
        self
    }
}

/// Contribution of one correspondence with unit weight.
pub fn upnp_term(c: &Correspondence) -> UpnpAccumulators {
    let m = c.f * c.f.transpose() - Matrix3::identity();
    let m2 = m * m;
    let phi = phi(&c.p);
    let a2 = phi.transpose() * m2;
    UpnpAccumulators {
        h: -m,
        a0: m * phi,
        a1: a2 * phi,
        a2,
        a3: m2,
    }
}

/// Weighted sums over all correspondences. Fails when `H` is singular.
pub fn build_upnp_accumulators(correspondences: &[Correspondence], weights: &[f64]) -> Result<UpnpAccumulators> {
    if weights.len() != correspondences.len() {
        return Err(Error::invalid("one weight per correspondence required"));
    }
    let mut acc = UpnpAccumulators::zero();
    for (c, &w) in correspondences.iter().zip(weights) {
        if w != 0.0 {
            acc.add_assign(&upnp_term(c).scaled(w));
        }
    }
    acc.symmetrize();
    h_inverse(&acc.h)?;
    Ok(acc)
}

fn h_inverse(h: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let eig = SymmetricEigen::new(*h);
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 0.0) || hi / lo > MAX_H_CONDITION {
        return Err(Error::degenerate(
            "bearings are (nearly) parallel; translation is undetermined",
        ));
    }
    let inv_diag = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    Ok(eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())
}

/// The 10x10 matrix with `m(q)^T A m(q)` equal to the summed squared
/// object-space residual at the optimal translation for rotation `q`.
pub fn assemble_energy(acc: &UpnpAccumulators) -> Result<Matrix10> {
    let h_inv = h_inverse(&acc.h)?;
    let h_inv_a0 = h_inv * acc.a0;
    let cross = acc.a2 * h_inv_a0;
    let mut energy = acc.a1 + cross + cross.transpose() + h_inv_a0.transpose() * acc.a3 * h_inv_a0;
    energy.symmetrize();
    Ok(energy)
}

/// `t = H^-1 A0 m(q)`, the translation minimising the residual for fixed `q`.
pub fn translation_from_rotation(acc: &UpnpAccumulators, q: &Quat) -> Result<Vector3<f64>> {
    Ok(h_inverse(&acc.h)? * acc.a0 * monomials_raw(q))
}

/// `m(q)^T A m(q)`.
#[inline]
pub fn quartic_energy(a: &Matrix10, q: &Quat) -> f64 {
    let m = monomials_raw(q);
    m.dot(&(a * m))
}

fn monomial_jacobian(q: &Quat) -> Matrix10x4 {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    #[rustfmt::skip]
    let j = Matrix10x4::from_row_slice(&[
        2.0 * w, 0.0,     0.0,     0.0,
        x,       w,       0.0,     0.0,
        y,       0.0,     w,       0.0,
        z,       0.0,     0.0,     w,
        0.0,     2.0 * x, 0.0,     0.0,
        0.0,     y,       x,       0.0,
        0.0,     z,       0.0,     x,
        0.0,     0.0,     2.0 * y, 0.0,
        0.0,     0.0,     z,       y,
        0.0,     0.0,     0.0,     2.0 * z,
    ]);
    j
}

/// `sum_k b_k * d^2 m_k / dq^2`; each monomial's Hessian is constant.
fn monomial_curvature(b: &SMatrix<f64, 10, 1>) -> Matrix4<f64> {
    #[rustfmt::skip]
    let c = Matrix4::new(
        2.0 * b[0], b[1],       b[2],       b[3],
        b[1],       2.0 * b[4], b[5],       b[6],
        b[2],       b[5],       2.0 * b[7], b[8],
        b[3],       b[6],       b[8],       2.0 * b[9],
    );
    c
}

/// Orthonormal basis of the tangent space at unit `q` (Householder columns).
fn tangent_basis(q: &Quat) -> Matrix4x3 {
    let mut v = *q;
    v[0] += if q[0] >= 0.0 { 1.0 } else { -1.0 };
    let reflector = Matrix4::identity() - v * v.transpose() * (2.0 / v.norm_squared());
    reflector.fixed_columns::<3>(1).into_owned()
}

/// Riemannian gradient of the quartic at unit `q`.
pub fn riemannian_gradient(a: &Matrix10, q: &Quat) -> Quat {
    let m = monomials_raw(q);
    let g = monomial_jacobian(q).transpose() * (a * m) * 2.0;
    g - q * q.dot(&g)
}

/// Saddle-free Newton descent on the sphere from `start`.
fn descend(a: &Matrix10, start: &Quat, scale: f64) -> Quat {
    let mut q = start.normalize();
    let mut f = quartic_energy(a, &q);
    for _ in 0..MAX_NEWTON_STEPS {
        let m = monomials_raw(&q);
        let b = a * m;
        let jac = monomial_jacobian(&q);
        let grad = jac.transpose() * b * 2.0;
        let hess = (jac.transpose() * a * jac + monomial_curvature(&b)) * 2.0;
        let basis = tangent_basis(&q);
        let g3 = basis.transpose() * grad;
        if g3.norm() <= 1e-15 * scale {
            break;
        }
        let h3 = basis.transpose() * hess * basis - Matrix3::identity() * q.dot(&grad);
        let eig = SymmetricEigen::new(h3);
        let floor = 1e-12 * scale;
        let mut step = Vector3::zeros();
        for i in 0..3 {
            let u = eig.eigenvectors.column(i);
            step -= u * (u.dot(&g3) / eig.eigenvalues[i].abs().max(floor));
        }
        let dir = basis * step;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = (q + dir * alpha).normalize();
            let fc = quartic_energy(a, &cand);
            if fc < f {
                q = cand;
                f = fc;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Energy is flat to rounding here; keep a full step while it shrinks the gradient.
            let cand = (q + dir).normalize();
            if tangent_gradient_norm(a, &cand) < g3.norm() {
                q = cand;
                f = quartic_energy(a, &q);
            } else {
                break;
            }
        }
    }
    q
}

fn tangent_gradient_norm(a: &Matrix10, q: &Quat) -> f64 {
    let grad = monomial_jacobian(q).transpose() * (a * monomials_raw(q)) * 2.0;
    (tangent_basis(q).transpose() * grad).norm()
}

/// Multi-start minimisation of `m(q)^T A m(q)` over unit quaternions, using
/// `config.restarts` random starts drawn from `config.seed`.
pub fn minimize_quartic(a: &Matrix10, config: &SolverConfig) -> Quat {
    minimize_quartic_from(a, config, &[])
}

/// As [`minimize_quartic`], with extra warm starts tried before the random ones.
pub fn minimize_quartic_from(a: &Matrix10, config: &SolverConfig, warm_starts: &[Quat]) -> Quat {
    quartic_local_minima(a, config, warm_starts)[0].0
}

/// Distinct local minima reached from the warm and random starts, with their
/// energies, in ascending order of energy. Never empty.
pub fn quartic_local_minima(a: &Matrix10, config: &SolverConfig, warm_starts: &[Quat]) -> Vec<(Quat, f64)> {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let random = (0..config.restarts).map(|_| {
        let v = Quat::from_fn(|_, _| StandardNormal.sample(&mut rng));
        v.normalize()
    });
    let starts: Vec<Quat> = warm_starts.iter().copied().chain(random).collect();

    let mut minima: Vec<(Quat, f64)> = Vec::new();
    for s in &starts {
        let q = canonical_sign(&descend(a, s, scale));
        let e = quartic_energy(a, &q);
        match minima
            .iter_mut()
            .find(|(m, _)| (m - q).norm().min((m + q).norm()) < 1e-6)
        {
            Some(seen) if e < seen.1 => *seen = (q, e),
            Some(_) => {}
            None => minima.push((q, e)),
        }
    }
    if minima.is_empty() {
        minima.push((
            Quat::new(1.0, 0.0, 0.0, 0.0),
            quartic_energy(a, &Quat::new(1.0, 0.0, 0.0, 0.0)),
        ));
    }
    minima.sort_by(|x, y| x.1.total_cmp(&y.1));
    minima
}

fn pose_from(acc: &UpnpAccumulators, q: &Quat) -> Result<Pose> {
    Ok(Pose::new(quaternion_to_rotation(q), translation_from_rotation(acc, q)?))
}

/// Lowest-energy local minimum that puts the majority of `ids` in front of
/// the camera; the line-based residual alone cannot tell front from back.
/// Falls back to the global minimum.
fn select_pose(
    acc: &UpnpAccumulators,
    minima: &[(Quat, f64)],
    corrs: &[Correspondence],
    ids: &[usize],
) -> Result<(Quat, Pose)> {
    for (q, _) in minima {
        let pose = pose_from(acc, q)?;
        let in_front = ids
            .iter()
            .filter(|&&i| corrs[i].f.dot(&pose.transform(&corrs[i].p)) > 0.0)
            .count();
        if 2 * in_front > ids.len() {
            return Ok((*q, pose));
        }
    }
    let q = minima[0].0;
    Ok((q, pose_from(acc, &q)?))
}

/// Non-robust solve over all correspondences.
pub fn upnp(correspondences: &[Correspondence], config: &SolverConfig) -> Result<Pose> {
    let n = correspondences.len();
    check_count(n, 3)?;
    let acc = build_upnp_accumulators(correspondences, &vec![1.0; n])?;
    let minima = quartic_local_minima(&assemble_energy(&acc)?, config, &[]);
    let all: Vec<usize> = (0..n).collect();
    Ok(select_pose(&acc, &minima, correspondences, &all)?.1)
}

/// Trimmed UPnP with a full sort and from-scratch accumulation per round.
pub fn robust_upnp(
    correspondences: &[Correspondence],
    cam: &CameraModel,
    config: &SolverConfig,
) -> Result<SolverResult> {
    trimmed(correspondences, cam, config, TrimMode::Full)
}

/// Trimmed UPnP with partial incremental sorting and journal-driven updates
/// of all five accumulators.
pub fn robust_upnp_incr(
    correspondences: &[Correspondence],
    cam: &CameraModel,
    config: &SolverConfig,
) -> Result<SolverResult> {
    trimmed(correspondences, cam, config, TrimMode::Incremental)
}

fn trimmed(corrs: &[Correspondence], cam: &CameraModel, config: &SolverConfig, mode: TrimMode) -> Result<SolverResult> {
    let n = corrs.len();
    check_count(n, MIN_TRIM_POINTS)?;
    config.validate()?;
    let boundary = TrimBoundary::median(n)?;
    let k = boundary.k();
    let term_of = |i: usize| upnp_term(&corrs[i]);

    let mut acc = Accumulator::<UpnpAccumulators>::default();
    acc.rebuild_with(0..n, n, term_of)?;
    let all: Vec<usize> = (0..n).collect();
    let minima = quartic_local_minima(&assemble_energy(acc.read())?, config, &[]);
    let (mut q, mut pose) = select_pose(acc.read(), &minima, corrs, &all)?;
    let mut entries: Vec<ScoredEntry> = corrs
        .iter()
        .enumerate()
        .map(|(i, c)| ScoredEntry::new(reprojection_error(&pose, c, cam), i))
        .collect();
    acc.rebuild_with(entries[..k].iter().map(|e| e.id), n, term_of)?;

    let mut sorter = TrimSorter::new();
    let mut journal_sizes = Vec::new();
    let mut energy_steps = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let journal = mode.resort(&mut sorter, &mut entries, boundary)?;
        mode.refresh(&mut acc, &journal, &entries[..k], n, term_of)?;
        let energy = assemble_energy(acc.read())?;
        let minima = quartic_local_minima(&energy, config, &[q]);
        let retained = retained_ids(&entries[..k]);
        let (next_q, next_pose) = select_pose(acc.read(), &minima, corrs, &retained)?;
        energy_steps.push(EnergyStep {
            previous: quartic_energy(&energy, &q),
            current: quartic_energy(&energy, &next_q),
        });
        let change = (next_q - q)
            .norm()
            .min((next_q + q).norm())
            .max((next_pose.translation - pose.translation).norm());
        q = next_q;
        pose = next_pose;
        journal_sizes.push(journal.len());
        if journal.is_empty() && change < config.tolerance {
            converged = true;
            break;
        }
        for e in entries.iter_mut() {
            e.score = reprojection_error(&pose, &corrs[e.id], cam);
        }
    }

    // Final fit from a fresh sum in id order, so both modes see the same energy.
    let inliers = retained_ids(&entries[..k]);
    acc.rebuild_with(inliers.iter().copied(), n, term_of)?;
    let minima = quartic_local_minima(&assemble_energy(acc.read())?, config, &[q]);
    let (_, pose) = select_pose(acc.read(), &minima, corrs, &inliers)?;
    Ok(SolverResult {
        pose,
        inliers,
        iterations,
        converged,
        journal_sizes,
        energy_steps,
    })
}
