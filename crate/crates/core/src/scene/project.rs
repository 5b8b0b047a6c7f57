use nalgebra::{Matrix2, Matrix2x3, Vector3};

use super::{CameraPose, GaussianSplat, Intrinsics, SceneError};

/// Splats at or in front of this camera-space depth are culled (meters).
pub const NEAR_PLANE: f64 = 0.01;
/// Added to both diagonal entries of every projected covariance (px²).
pub const LOW_PASS_FLOOR: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projected {
    pub mean2d: [f64; 2],
    pub cov2d: Matrix2<f64>,
    pub depth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    Visible(Projected),
    /// Behind the near plane; excluded from rendering.
    Culled,
}

impl Projection {
    pub fn visible(&self) -> Option<&Projected> {
        match self {
            Projection::Visible(p) => Some(p),
            Projection::Culled => None,
        }
    }
}

/// Camera-space point to pixel coordinates.
#[inline]
pub(crate) fn project_point(k: &Intrinsics, t: &Vector3<f64>) -> [f64; 2] {
    [k.fx * t.x / t.z + k.cx, k.fy * t.y / t.z + k.cy]
}

/// Jacobian of [`project_point`] at camera-space point `t`.
#[inline]
pub(crate) fn camera_jacobian(k: &Intrinsics, t: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / t.z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * t.x * iz2,
        0.0,
        k.fy * iz,
        -k.fy * t.y * iz2,
    )
}

/// EWA projection: `cov2d = J W Σ Wᵀ Jᵀ + 0.3 I`, depth = camera-space z.
pub fn project_gaussian(splat: &GaussianSplat, camera: &CameraPose) -> Result<Projection, SceneError> {
    let sigma = splat.covariance()?;
    let t = camera.world_to_camera(&Vector3::from(splat.mean));
    if !(t.z > NEAR_PLANE) {
        return Ok(Projection::Culled);
    }
    let k = &camera.intrinsics;
    let jw = camera_jacobian(k, &t) * camera.rotation_matrix();
    let mut cov2d = jw * sigma * jw.transpose();
    cov2d = (cov2d + cov2d.transpose()) * 0.5;
    cov2d[(0, 0)] += LOW_PASS_FLOOR;
    cov2d[(1, 1)] += LOW_PASS_FLOOR;
    Ok(Projection::Visible(Projected {
        mean2d: project_point(k, &t),
        cov2d,
        depth: t.z,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Intrinsics;
    use nalgebra::{Matrix3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam(focal: f64) -> CameraPose {
        CameraPose::new(
            "c",
            [1.0, 0.0, 0.0, 0.0],
            [0.0; 3],
            Intrinsics {
                fx: focal,
                fy: focal,
                cx: 31.5,
                cy: 20.0,
                width: 64,
                height: 48,
            },
        )
        .unwrap()
    }

    #[test]
    fn on_axis_splat_lands_on_principal_point() {
        let s = GaussianSplat::isotropic([0.0, 0.0, 1.0], 1e-4, 0.5, [0.5; 3], 0);
        let p = *project_gaussian(&s, &cam(100.0)).unwrap().visible().unwrap();
        assert_eq!(p.mean2d, [31.5, 20.0]);
        assert_eq!(p.depth, 1.0);
    }

    #[test]
    fn doubling_focal_doubles_offset() {
        let s = GaussianSplat::isotropic([0.3, -0.1, 2.0], 0.1, 0.5, [0.5; 3], 0);
        let a = *project_gaussian(&s, &cam(100.0)).unwrap().visible().unwrap();
        let b = *project_gaussian(&s, &cam(200.0)).unwrap().visible().unwrap();
        assert!(((b.mean2d[0] - 31.5) - 2.0 * (a.mean2d[0] - 31.5)).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_culled() {
        let s = GaussianSplat::isotropic([0.0, 0.0, -1.0], 0.1, 0.5, [0.5; 3], 0);
        assert_eq!(project_gaussian(&s, &cam(100.0)).unwrap(), Projection::Culled);
        let s = GaussianSplat::isotropic([0.0, 0.0, 0.005], 0.1, 0.5, [0.5; 3], 0);
        assert_eq!(project_gaussian(&s, &cam(100.0)).unwrap(), Projection::Culled);
    }

    /// Linearized propagation with a central-difference Jacobian of the
    /// full world-to-pixel map.
    #[test]
    fn cov2d_matches_numerical_jacobian_propagation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let q = UnitQuaternion::from_euler_angles(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            let camera = CameraPose::new(
                "c",
                [q.w, q.i, q.j, q.k],
                [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 3.0],
                cam(80.0).intrinsics,
            )
            .unwrap();
            let mut s = GaussianSplat::isotropic(
                [0; 3].map(|_| rng.random_range(-0.5..0.5)),
                1.0,
                0.5,
                [0.5; 3],
                0,
            );
            s.scale_raw = [0; 3].map(|_| rng.random_range(-3.0..-1.0));
            s.rotation_raw = [0; 4].map(|_| rng.random_range(-1.0..1.0));
            let p = *project_gaussian(&s, &camera).unwrap().visible().unwrap();

            let f = |x: Vector3<f64>| project_point(&camera.intrinsics, &camera.world_to_camera(&x));
            let mu = Vector3::from(s.mean);
            let h = 1e-5;
            let mut jac = Matrix2x3::zeros();
            for a in 0..3 {
                let mut e = Vector3::zeros();
                e[a] = h;
                let (fp, fm) = (f(mu + e), f(mu - e));
                jac[(0, a)] = (fp[0] - fm[0]) / (2.0 * h);
                jac[(1, a)] = (fp[1] - fm[1]) / (2.0 * h);
            }
            let sigma: Matrix3<f64> = s.covariance().unwrap();
            let want = jac * sigma * jac.transpose() + Matrix2::identity() * LOW_PASS_FLOOR;
            for (a, b) in p.cov2d.iter().zip(want.iter()) {
                assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-3), "{} vs {}", p.cov2d, want);
            }
        }
    }

    #[test]
    fn depth_order_follows_camera_z() {
        let c = cam(100.0);
        let near = GaussianSplat::isotropic([0.5, 0.0, 1.5], 0.1, 0.5, [0.5; 3], 0);
        let far = GaussianSplat::isotropic([-0.5, 0.2, 2.5], 0.1, 0.5, [0.5; 3], 0);
        let dn = project_gaussian(&near, &c).unwrap().visible().unwrap().depth;
        let df = project_gaussian(&far, &c).unwrap().visible().unwrap().depth;
        assert!(dn < df);
    }
}
