//! Minimal three-point pose.
//!
//! The depths along the three bearings follow from the law of cosines in the
//! three camera-frame triangles. Writing `s2 = u s1`, `s3 = v s1` gives two
//! quadratics in `u` whose resultant is a quartic in `v`. Each real root is
//! polished, turned into depths, refined by Newton steps on the distance
//! equations and aligned rigidly with the world triangle.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::geom::{rigid_align, Correspondence, Pose};

/// Candidates whose bearing residual exceeds this are discarded.
const MAX_BEARING_RESIDUAL: f64 = 1e-9;

/// Up to four poses consistent with three correspondences.
///
/// Collinear or coincident world points, and inputs for which no real
/// positive-depth solution exists, give an empty vector.
pub fn p3p(correspondences: &[Correspondence; 3]) -> Vec<Pose> {
    let [c1, c2, c3] = correspondences;
    let (p1, p2, p3) = (c1.p, c2.p, c3.p);
    let a2 = (p2 - p3).norm_squared();
    let b2 = (p1 - p3).norm_squared();
    let c2_ = (p1 - p2).norm_squared();
    let extent = a2.max(b2).max(c2_);
    if !(extent > 0.0) || (p2 - p1).cross(&(p3 - p1)).norm_squared() < 1e-20 * extent * extent {
        return Vec::new();
    }

    let cos_a = c2.f.dot(&c3.f);
    let cos_b = c1.f.dot(&c3.f);
    let cos_g = c1.f.dot(&c2.f);

    // A u^2 + B u + C(v) = 0 and A u^2 + E(v) u + F(v) = 0, with A = b^2.
    let a = b2;
    let b = -2.0 * b2 * cos_g;
    // 1 + v^2 - 2 v cos_b
    let w = [1.0, -2.0 * cos_b, 1.0];
    let c = [b2 - c2_ * w[0], -c2_ * w[1], -c2_ * w[2]];
    let e = [0.0, -2.0 * b2 * cos_a];
    let f = [-a2 * w[0], -a2 * w[1], b2 - a2 * w[2]];

    // Resultant (AF - CA)^2 - (AE - BA)(BF - CE), all polynomials in v.
    let af_ca = poly_scale(&poly_sub(&f, &c), a);
    let ae_ba = poly_scale(&poly_sub(&e, &[b]), a);
    let bf_ce = poly_sub(&poly_scale(&f, b), &poly_mul(&c, &e));
    let resultant = poly_sub(&poly_mul(&af_ca, &af_ca), &poly_mul(&ae_ba, &bf_ce));

    let mut poses: Vec<Pose> = Vec::new();
    for v in real_roots(&resultant) {
        let denom = b - poly_eval(&e, v);
        if denom.abs() < 1e-14 * a.max(1.0) {
            continue;
        }
        let u = (poly_eval(&f, v) - poly_eval(&c, v)) / denom;
        let q = poly_eval(&w, v);
        if !(q > 0.0) {
            continue;
        }
        let s1 = (b2 / q).sqrt();
        let depths = Vector3::new(s1, u * s1, v * s1);
        if depths.iter().any(|d| !(*d > 0.0)) {
            continue;
        }
        let depths = refine_depths(depths, [c1.f, c2.f, c3.f], [a2, b2, c2_]);
        if depths.iter().any(|d| !(*d > 0.0)) {
            continue;
        }
        let cam = [c1.f * depths[0], c2.f * depths[1], c3.f * depths[2]];
        let Ok(pose) = rigid_align(&[p1, p2, p3], &cam) else {
            continue;
        };
        let consistent = correspondences
            .iter()
            .all(|c| (pose.transform(&c.p).normalize() - c.f).norm() < MAX_BEARING_RESIDUAL);
        let duplicate = poses
            .iter()
            .any(|o| (o.rotation - pose.rotation).amax() < 1e-9 && (o.translation - pose.translation).amax() < 1e-9);
        if consistent && !duplicate {
            poses.push(pose);
        }
    }
    poses
}

/// Newton iterations on `|s_i f_i - s_j f_j|^2 = d_ij^2`.
fn refine_depths(mut s: Vector3<f64>, f: [Vector3<f64>; 3], d2: [f64; 3]) -> Vector3<f64> {
    // pairs (j, k) opposite to the squared distances a^2 (2,3), b^2 (1,3), c^2 (1,2)
    const PAIRS: [(usize, usize); 3] = [(1, 2), (0, 2), (0, 1)];
    for _ in 0..8 {
        let mut r = Vector3::zeros();
        let mut jac = Matrix3::zeros();
        for (row, &(j, k)) in PAIRS.iter().enumerate() {
            let cjk = f[j].dot(&f[k]);
            r[row] = s[j] * s[j] + s[k] * s[k] - 2.0 * s[j] * s[k] * cjk - d2[row];
            jac[(row, j)] = 2.0 * s[j] - 2.0 * s[k] * cjk;
            jac[(row, k)] = 2.0 * s[k] - 2.0 * s[j] * cjk;
        }
        let Some(step) = jac.lu().solve(&r) else {
            break;
        };
        s -= step;
        if step.norm() <= 1e-15 * s.norm() {
            break;
        }
    }
    s
}

fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn poly_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Real roots of a polynomial (coefficients ascending) via its companion
/// matrix, each polished by Newton steps.
fn real_roots(p: &[f64]) -> Vec<f64> {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(scale > 0.0) {
        return Vec::new();
    }
    let mut deg = p.len() - 1;
    while deg > 0 && p[deg].abs() <= 1e-13 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = p[deg];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -p[i] / lead;
    }
    let derivative: Vec<f64> = (1..=deg).map(|i| p[i] * i as f64).collect();
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-4 * (1.0 + z.re.abs()))
        .map(|z| {
            let mut x = z.re;
            for _ in 0..4 {
                let d = poly_eval(&derivative, x);
                if d == 0.0 {
                    break;
                }
                x -= poly_eval(&p[..=deg], x) / d;
            }
            x
        })
        .filter(|x| x.is_finite())
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geom::{quaternion_to_rotation, rotation_error, Quat};

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let q = Quat::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let t = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        Pose::new(quaternion_to_rotation(&q), t)
    }

    fn triple(rng: &mut ChaCha8Rng, pose: &Pose) -> [Correspondence; 3] {
        std::array::from_fn(|_| {
            let cam = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(4.0..8.0),
            );
            let world = pose.rotation.transpose() * (cam - pose.translation);
            Correspondence::new(cam.normalize(), world).unwrap()
        })
    }

    #[test]
    fn poly_helpers() {
        assert_eq!(poly_mul(&[1.0, 1.0], &[-1.0, 1.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(poly_eval(&[1.0, 2.0, 3.0], 2.0), 17.0);
        let mut roots = real_roots(&poly_mul(&poly_mul(&[-1.0, 1.0], &[-2.0, 1.0]), &[1.0, 0.0, 1.0]));
        roots.sort_by(f64::total_cmp);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 1.0).abs() < 1e-12 && (roots[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_among_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut found = 0;
        for _ in 0..500 {
            let pose = random_pose(&mut rng);
            let corrs = triple(&mut rng, &pose);
            let candidates = p3p(&corrs);
            assert!(candidates.len() <= 4);
            for c in &candidates {
                assert!(c.is_proper_rotation(1e-9));
                for corr in &corrs {
                    let x = c.transform(&corr.p);
                    assert!(x.dot(&corr.f) > 0.0);
                    assert!((x.normalize() - corr.f).norm() < 1e-9);
                }
            }
            if candidates.iter().any(|c| {
                rotation_error(&c.rotation, &pose.rotation) < 1e-6 && (c.translation - pose.translation).norm() < 1e-6
            }) {
                found += 1;
            }
        }
        assert!(found >= 498, "truth recovered in {found}/500 cases");
    }

    #[test]
    fn collinear_points_give_nothing() {
        let pose = Pose::identity();
        let corrs = [0.0, 1.0, 2.5].map(|s| {
            let p = Vector3::new(s, 0.5 * s, 5.0 + s);
            Correspondence::new(pose.transform(&p).normalize(), p).unwrap()
        });
        assert!(p3p(&corrs).is_empty());
        let same = [corrs[0]; 3];
        assert!(p3p(&same).is_empty());
    }
}
