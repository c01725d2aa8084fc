//! Camera model, EPnP control points, quaternion monomials and error metrics.
//!
//! Quaternions are plain `Vector4`s ordered `(w, x, y, z)`, scalar first.

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen, Vector2, Vector3, Vector4};

use crate::error::{Error, Result};

/// Unit quaternion `(w, x, y, z)`.
pub type Quat = Vector4<f64>;
pub type Monomials = SVector<f64, 10>;
pub type PhiMatrix = SMatrix<f64, 3, 10>;
pub type DBlock = SMatrix<f64, 2, 12>;

/// Reprojection error reported when a point or bearing lies behind the camera.
pub const BEHIND_CAMERA_PX: f64 = 1e6;

/// Smallest `|f_z|` accepted when forming the EPnP constraint rows.
pub const MIN_BEARING_DEPTH: f64 = 1e-6;

/// A unit bearing in the camera frame paired with a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub f: Vector3<f64>,
    pub p: Vector3<f64>,
}

impl Correspondence {
    /// Validates that both vectors are finite and `f` is unit length (1e-12).
    pub fn new(f: Vector3<f64>, p: Vector3<f64>) -> Result<Self> {
        if !f.iter().chain(p.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("correspondence has non-finite component"));
        }
        if (f.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("bearing norm {} is not 1", f.norm())));
        }
        Ok(Self { f, p })
    }
}

/// Rigid transform from world to camera frame: `x_c = R x_w + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotation as a canonical unit quaternion.
    pub fn quaternion(&self) -> Quat {
        rotation_to_quaternion(&self.rotation)
    }

    pub fn is_proper_rotation(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).amax() < tol && (r.determinant() - 1.0).abs() < tol
    }
}

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub focal: f64,
    pub principal: Vector2<f64>,
}

impl Default for CameraModel {
    /// Focal length 800 px, principal point at the centre of a 640x480 image.
    fn default() -> Self {
        Self {
            focal: 800.0,
            principal: Vector2::new(320.0, 240.0),
        }
    }
}

impl CameraModel {
    pub fn new(focal: f64, principal: Vector2<f64>) -> Result<Self> {
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::invalid(format!("focal length {focal} must be positive")));
        }
        Ok(Self { focal, principal })
    }

    /// Pixel of a camera-frame point (or direction); `None` unless `z > 0`.
    pub fn project(&self, x: &Vector3<f64>) -> Option<Vector2<f64>> {
        if x.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(x.x / x.z, x.y / x.z) * self.focal + self.principal)
    }

    /// Unit bearing through pixel `uv`.
    pub fn unproject(&self, uv: &Vector2<f64>) -> Vector3<f64> {
        let xy = (uv - self.principal) / self.focal;
        Vector3::new(xy.x, xy.y, 1.0).normalize()
    }
}

/// Four world control points with per-point barycentric weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointSystem {
    pub points: [Vector3<f64>; 4],
    pub alphas: Vec<Vector4<f64>>,
}

impl ControlPointSystem {
    /// `sum_j alpha_j c_j` for the given control points.
    pub fn combine(alpha: &Vector4<f64>, controls: &[Vector3<f64>; 4]) -> Vector3<f64> {
        controls
            .iter()
            .zip(alpha.iter())
            .fold(Vector3::zeros(), |acc, (c, a)| acc + c * *a)
    }
}

/// EPnP control points: the centroid plus the three principal axes scaled by
/// the standard deviation of the cloud along each axis.
pub fn control_points(points: &[Vector3<f64>]) -> Result<ControlPointSystem> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let scatter = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - centroid;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    if !(sigma[0] > 0.0) || sigma[2] < 1e-6 * sigma[0] {
        return Err(Error::degenerate(
            "points are coincident or (near) coplanar; planar control points unsupported",
        ));
    }

    let mut controls = [centroid; 4];
    let mut basis = Matrix3::zeros();
    for (col, &i) in order.iter().enumerate() {
        let mut axis: Vector3<f64> = eig.eigenvectors.column(i).into_owned();
        let pivot = axis.iamax();
        if axis[pivot] < 0.0 {
            axis = -axis;
        }
        let offset = axis * (eig.eigenvalues[i] / n).sqrt();
        controls[col + 1] = centroid + offset;
        basis.set_column(col, &offset);
    }
    let inv = basis
        .try_inverse()
        .ok_or_else(|| Error::degenerate("control point basis is singular"))?;
    let alphas = points
        .iter()
        .map(|p| {
            let a = inv * (p - centroid);
            Vector4::new(1.0 - a.x - a.y - a.z, a.x, a.y, a.z)
        })
        .collect();
    Ok(ControlPointSystem {
        points: controls,
        alphas,
    })
}

/// The 2x12 EPnP constraint block `alpha^T (x) [1 0 -u; 0 1 -v]` with
/// `u = f_x / f_z`, `v = f_y / f_z`.
pub fn build_d(alpha: &Vector4<f64>, f: &Vector3<f64>) -> Result<DBlock> {
    if f.z.abs() <= MIN_BEARING_DEPTH || !f.z.is_finite() {
        return Err(Error::PointAtInfinity);
    }
    let u = f.x / f.z;
    let v = f.y / f.z;
    let mut d = DBlock::zeros();
    for j in 0..4 {
        let a = alpha[j];
        d[(0, 3 * j)] = a;
        d[(0, 3 * j + 2)] = -a * u;
        d[(1, 3 * j + 1)] = a;
        d[(1, 3 * j + 2)] = -a * v;
    }
    Ok(d)
}

/// Degree-two monomials of a unit quaternion, ordered
/// `(ww, wx, wy, wz, xx, xy, xz, yy, yz, zz)`.
pub fn monomials(q: &Quat) -> Result<Monomials> {
    if (q.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("quaternion norm {} is not 1", q.norm())));
    }
    Ok(monomials_raw(q))
}

/// [`monomials`] without the unit-norm check.
#[inline]
pub fn monomials_raw(q: &Quat) -> Monomials {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Monomials::from_column_slice(&[w * w, w * x, w * y, w * z, x * x, x * y, x * z, y * y, y * z, z * z])
}

/// The 3x10 matrix with `phi(p) * monomials(q) == R(q) * p`.
#[rustfmt::skip]
pub fn phi(p: &Vector3<f64>) -> PhiMatrix {
    let (a, b, c) = (p.x, p.y, p.z);
    PhiMatrix::from_row_slice(&[
    //  ww  wx        wy        wz        xx  xy        xz        yy  yz        zz
        a,  0.0,      2.0 * c, -2.0 * b,  a,  2.0 * b,  2.0 * c, -a,  0.0,     -a,
        b, -2.0 * c,  0.0,      2.0 * a, -b,  2.0 * a,  0.0,      b,  2.0 * c, -b,
        c,  2.0 * b, -2.0 * a,  0.0,     -c,  0.0,      2.0 * a, -c,  2.0 * b,  c,
    ])
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quaternion_to_rotation(q: &Quat) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    )
}

/// Unit quaternion of a rotation matrix, with canonical sign.
pub fn rotation_to_quaternion(r: &Matrix3<f64>) -> Quat {
    let trace = r.trace();
    let q = if trace > 0.0 {
        let s = 0.5 / (trace + 1.0).sqrt();
        Quat::new(
            0.25 / s,
            (r[(2, 1)] - r[(1, 2)]) * s,
            (r[(0, 2)] - r[(2, 0)]) * s,
            (r[(1, 0)] - r[(0, 1)]) * s,
        )
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
        Quat::new(
            (r[(2, 1)] - r[(1, 2)]) / s,
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
        )
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = 2.0 * (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt();
        Quat::new(
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
        )
    } else {
        let s = 2.0 * (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt();
        Quat::new(
            (r[(1, 0)] - r[(0, 1)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
        )
    };
    canonical_sign(&q.normalize())
}

/// Flip `q` so that its first non-zero component is positive.
pub fn canonical_sign(q: &Quat) -> Quat {
    match q.iter().find(|v| **v != 0.0) {
        Some(v) if *v < 0.0 => -q,
        _ => *q,
    }
}

/// Similarity `(R, t, s)` minimising `sum |target_i - (s R source_i + t)|^2`
/// with `det R = +1`. The returned pose carries `t`; `s` is returned beside it.
pub fn umeyama_align(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Result<(Pose, f64)> {
    align(source, target, true)
}

/// Rigid `(R, t)` minimising `sum |target_i - (R source_i + t)|^2`.
pub fn rigid_align(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Result<Pose> {
    align(source, target, false).map(|(pose, _)| pose)
}

fn align(source: &[Vector3<f64>], target: &[Vector3<f64>], with_scale: bool) -> Result<(Pose, f64)> {
    if source.len() != target.len() {
        return Err(Error::invalid("source and target sizes differ"));
    }
    if source.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: source.len(),
        });
    }
    let n = source.len() as f64;
    let mu_s = source.iter().sum::<Vector3<f64>>() / n;
    let mu_t = target.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut spread = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, t) in source.iter().zip(target) {
        let ds = s - mu_s;
        cov += (t - mu_t) * ds.transpose();
        spread += ds * ds.transpose();
        var_s += ds.norm_squared();
    }
    cov /= n;
    var_s /= n;

    let sv = spread.singular_values();
    let mut sv_sorted = [sv[0], sv[1], sv[2]];
    sv_sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sv_sorted[0] > 0.0) || sv_sorted[1] < 1e-12 * sv_sorted[0] {
        return Err(Error::degenerate("source points are coincident or collinear"));
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        // flip the axis of the smallest singular value
        let smallest = svd.singular_values.imin();
        d[(smallest, smallest)] = -1.0;
    }
    let rotation = u * d * v_t;
    let scale = if with_scale {
        (svd.singular_values.component_mul(&d.diagonal())).sum() / var_s
    } else {
        1.0
    };
    let translation = mu_t - scale * rotation * mu_s;
    Ok((Pose::new(rotation, translation), scale))
}

/// `|R^T R_gt - I|_F`, equal to `2 sqrt(2) sin(phi / 2)` for residual angle `phi`.
pub fn rotation_error(r: &Matrix3<f64>, r_gt: &Matrix3<f64>) -> f64 {
    (r.transpose() * r_gt - Matrix3::identity()).norm()
}

/// Pixel distance between the projection of `R p + t` and the projection of
/// the bearing. Points or bearings behind the camera report [`BEHIND_CAMERA_PX`].
pub fn reprojection_error(pose: &Pose, corr: &Correspondence, cam: &CameraModel) -> f64 {
    match (cam.project(&pose.transform(&corr.p)), cam.project(&corr.f)) {
        (Some(a), Some(b)) => (a - b).norm().min(BEHIND_CAMERA_PX),
        _ => BEHIND_CAMERA_PX,
    }
}
