use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};

use super::{SegmentLabel, TrajectoryError, TrajectoryPlan};
use crate::scene::{CameraPose, Intrinsics};

/// An ellipse `center + a·cos θ·u + b·sin θ·v` in the camera-center plane.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPath {
    pub center: Vector3<f64>,
    pub basis_u: Vector3<f64>,
    pub basis_v: Vector3<f64>,
    pub radii: (f64, f64),
    pub look_at: Vector3<f64>,
    /// Intrinsics given to sampled poses (copied from the first fitted pose).
    pub intrinsics: Intrinsics,
}

impl OrbitPath {
    pub fn point(&self, theta: f64) -> Vector3<f64> {
        self.center + self.basis_u * (self.radii.0 * theta.cos()) + self.basis_v * (self.radii.1 * theta.sin())
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.basis_u.cross(&self.basis_v)
    }

    /// Look-at pose on the ellipse at angle `theta` (world up is +y).
    pub fn pose_at(&self, pose_id: impl Into<String>, theta: f64) -> Result<CameraPose, TrajectoryError> {
        Ok(CameraPose::look_at(
            pose_id,
            self.point(theta),
            self.look_at,
            Vector3::y(),
            self.intrinsics,
        )?)
    }

    /// Angle of the ellipse point closest to `p`: dense scan, then
    /// golden-section refinement to 1e-8 rad.
    pub fn nearest_angle(&self, p: &Vector3<f64>) -> f64 {
        let dist = |t: f64| (self.point(t) - p).norm_squared();
        const SAMPLES: usize = 720;
        let step = TAU / SAMPLES as f64;
        let best = (0..SAMPLES)
            .min_by(|&i, &j| dist(i as f64 * step).total_cmp(&dist(j as f64 * step)))
            .expect("non-empty scan");
        let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (dist(x1), dist(x2));
        while hi - lo > 1e-8 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = dist(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = dist(x2);
            }
        }
        (0.5 * (lo + hi)).rem_euclid(TAU)
    }

    /// Signed plane distance and normalized in-plane conic residual of `p`.
    pub fn residual(&self, p: &Vector3<f64>) -> (f64, f64) {
        let d = p - self.center;
        let x = d.dot(&self.basis_u) / self.radii.0;
        let y = d.dot(&self.basis_v) / self.radii.1;
        (d.dot(&self.normal()), x * x + y * y - 1.0)
    }
}

/// Fit a plane to the camera centers, an ellipse to the centers projected
/// into that plane, and a look-at target common to all optical axes.
pub fn fit_orbit_path(poses: &[CameraPose]) -> Result<OrbitPath, TrajectoryError> {
    if poses.len() < 3 {
        return Err(TrajectoryError::DegenerateGeometry(format!(
            "need at least 3 poses, got {}",
            poses.len()
        )));
    }
    let centers: Vec<Vector3<f64>> = poses.iter().map(CameraPose::center).collect();
    let centroid = centers.iter().sum::<Vector3<f64>>() / centers.len() as f64;
    let mut scatter = Matrix3::zeros();
    for c in &centers {
        let d = c - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (l0, l1) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(l0 > 0.0) || l1 <= 1e-18 * l0.max(1e-300) || l1.sqrt() < 1e-9 {
        return Err(TrajectoryError::DegenerateGeometry("camera centers are collinear".into()));
    }
    let e1: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
    let e2: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
    let pts: Vec<Vector2<f64>> = centers
        .iter()
        .map(|c| Vector2::new((c - centroid).dot(&e1), (c - centroid).dot(&e2)))
        .collect();

    let (c2, axes, radii) = fit_ellipse_2d(&pts)
        .or_else(|| fit_circle_2d(&pts))
        .ok_or_else(|| TrajectoryError::DegenerateGeometry("no ellipse fits the camera centers".into()))?;
    let center = centroid + e1 * c2.x + e2 * c2.y;
    let basis_u = (e1 * axes.0.x + e2 * axes.0.y).normalize();
    let mut basis_v = (e1 * axes.1.x + e2 * axes.1.y).normalize();
    // Orient the plane normal toward +y so angles increase consistently.
    if basis_u.cross(&basis_v).y < 0.0 {
        basis_v = -basis_v;
    }
    let look_at = focus_point(poses).unwrap_or(center);
    Ok(OrbitPath {
        center,
        basis_u,
        basis_v,
        radii,
        look_at,
        intrinsics: poses[0].intrinsics,
    })
}

type Fit2d = (Vector2<f64>, (Vector2<f64>, Vector2<f64>), (f64, f64));

/// Algebraic least-squares conic fit (smallest singular vector) on
/// RMS-normalized coordinates; `None` unless the conic is a real ellipse.
fn fit_ellipse_2d(pts: &[Vector2<f64>]) -> Option<Fit2d> {
    if pts.len() < 5 {
        return None;
    }
    let mean = pts.iter().sum::<Vector2<f64>>() / pts.len() as f64;
    let s = (pts.iter().map(|p| (p - mean).norm_squared()).sum::<f64>() / pts.len() as f64).sqrt();
    if !(s > 0.0) {
        return None;
    }
    let q: Vec<Vector2<f64>> = pts.iter().map(|p| (p - mean) / s).collect();
    let d = DMatrix::from_fn(q.len(), 6, |i, j| {
        let (x, y) = (q[i].x, q[i].y);
        [x * x, x * y, y * y, x, y, 1.0][j]
    });
    let eig = SymmetricEigen::new(d.transpose() * &d);
    let k = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(k);
    let (a, b, c, dd, e, f) = (v[0], v[1], v[2], v[3], v[4], v[5]);
    if b * b - 4.0 * a * c >= 0.0 {
        return None;
    }
    let m = Matrix2::new(2.0 * a, b, b, 2.0 * c);
    let c0 = m.try_inverse()? * Vector2::new(-dd, -e);
    let f0 = a * c0.x * c0.x + b * c0.x * c0.y + c * c0.y * c0.y + dd * c0.x + e * c0.y + f;
    let quad = SymmetricEigen::new(Matrix2::new(a, b / 2.0, b / 2.0, c));
    let r0 = -f0 / quad.eigenvalues[0];
    let r1 = -f0 / quad.eigenvalues[1];
    if !(r0 > 0.0 && r1 > 0.0) {
        return None;
    }
    let u: Vector2<f64> = quad.eigenvectors.column(0).into();
    let w: Vector2<f64> = quad.eigenvectors.column(1).into();
    Some((mean + c0 * s, (u, w), (r0.sqrt() * s, r1.sqrt() * s)))
}

/// Algebraic circle fit `x² + y² + Dx + Ey + F = 0`.
fn fit_circle_2d(pts: &[Vector2<f64>]) -> Option<Fit2d> {
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| [pts[i].x, pts[i].y, 1.0][j]);
    let rhs = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|p| -(p.x * p.x + p.y * p.y)));
    let sol = (a.transpose() * &a).try_inverse()? * (a.transpose() * rhs);
    let c = Vector2::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = c.norm_squared() - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    let r = r2.sqrt();
    Some((c, (Vector2::x(), Vector2::y()), (r, r)))
}

/// Least-squares point closest to every camera's optical axis.
fn focus_point(poses: &[CameraPose]) -> Option<Vector3<f64>> {
    let mut lhs = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for p in poses {
        let d = p.forward();
        let proj = Matrix3::identity() - d * d.transpose();
        lhs += proj;
        rhs += proj * p.center();
    }
    let eig = SymmetricEigen::new(lhs);
    if eig.eigenvalues.min() < 1e-6 * eig.eigenvalues.max() {
        return None;
    }
    lhs.try_inverse().map(|inv| inv * rhs)
}

/// `n` look-at poses at uniform angle steps over `arc`. A full turn
/// (`|θ_end − θ_start| = 2π`) is treated as a closed loop without repeating
/// the start pose.
pub fn sample_ellipse(orbit: &OrbitPath, arc: (f64, f64), n: usize) -> Result<TrajectoryPlan, TrajectoryError> {
    if n == 0 {
        return Err(TrajectoryError::InvalidArgument("ellipse sampling needs n >= 1".into()));
    }
    let span = arc.1 - arc.0;
    let closed = (span.abs() - TAU).abs() < 1e-12;
    let step = if n == 1 {
        0.0
    } else if closed {
        span / n as f64
    } else {
        span / (n - 1) as f64
    };
    let poses = (0..n)
        .map(|k| orbit.pose_at(format!("orbit_{k:03}"), arc.0 + step * k as f64))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrajectoryPlan {
        labels: vec![SegmentLabel::Orbit; n],
        poses,
        source_refs: None,
        fallback: false,
        warnings: Vec::new(),
    })
}

/// Wrap an angle difference into `(-π, π]`.
pub(crate) fn wrap_angle(d: f64) -> f64 {
    let w = (d + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
