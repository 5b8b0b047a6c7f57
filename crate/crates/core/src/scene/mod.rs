//! Gaussian primitives, pinhole cameras and the per-splat geometry used by the
//! rasterizer.

mod camera;
mod covariance;
mod project;
pub mod sh;

pub use camera::{unit_quaternion, CameraPose, Intrinsics};
pub use covariance::{build_covariance, rotation_matrix};
pub(crate) use covariance::covariance_backward;

pub(crate) fn covariance_backward_for(
    splat: &GaussianSplat,
    d_sigma: &Matrix3<f64>,
) -> ([f64; 3], [f64; 4]) {
    covariance_backward(splat.scale_raw, splat.rotation_raw, d_sigma)
}
pub use project::{project_gaussian, Projected, Projection, LOW_PASS_FLOOR, NEAR_PLANE};
pub(crate) use project::camera_jacobian;
pub use sh::eval_sh;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),
    #[error("shape mismatch: expected {expected} coefficients, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("invalid camera `{pose_id}`: {reason}")]
    InvalidCamera { pose_id: String, reason: String },
    #[error("unsupported SH degree {0} (max 3)")]
    ShDegree(usize),
}

pub const MAX_SH_DEGREE: usize = 3;

/// Number of SH coefficients per color channel at `degree`.
pub const fn sh_basis_len(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Stored SH length for one splat (three channels, coefficient-major).
pub const fn sh_len(degree: usize) -> usize {
    3 * sh_basis_len(degree)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One anisotropic Gaussian in its unconstrained storage form.
///
/// Scale is stored as `ln s`, opacity as `logit σ` and rotation as an
/// unnormalized quaternion `(w, x, y, z)`. SH coefficients are laid out
/// coefficient-major: `sh[3 * k + channel]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSplat {
    pub mean: [f64; 3],
    pub scale_raw: [f64; 3],
    pub rotation_raw: [f64; 4],
    pub opacity_raw: f64,
    pub sh: Vec<f64>,
}

impl GaussianSplat {
    /// Isotropic splat with a constant (degree-0 projected) color.
    pub fn isotropic(mean: [f64; 3], scale: f64, opacity: f64, rgb: [f64; 3], degree: usize) -> Self {
        let mut sh = vec![0.0; sh_len(degree)];
        for c in 0..3 {
            sh[c] = sh::rgb_to_dc(rgb[c]);
        }
        Self {
            mean,
            scale_raw: [scale.ln(); 3],
            rotation_raw: [1.0, 0.0, 0.0, 0.0],
            opacity_raw: logit(opacity),
            sh,
        }
    }

    pub fn scale(&self) -> [f64; 3] {
        self.scale_raw.map(f64::exp)
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_raw)
    }

    pub fn rotation(&self) -> Result<UnitQuaternion<f64>, SceneError> {
        let [w, x, y, z] = self.rotation_raw;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n > 1e-12) {
            return Err(SceneError::InvalidPrimitive(format!(
                "degenerate rotation quaternion (norm {n:e})"
            )));
        }
        Ok(UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(
            w / n,
            x / n,
            y / n,
            z / n,
        )))
    }

    pub fn covariance(&self) -> Result<Matrix3<f64>, SceneError> {
        build_covariance(self.scale_raw, self.rotation_raw)
    }

    pub fn mean_vec(&self) -> Vector3<f64> {
        Vector3::from(self.mean)
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite())
            && self.scale_raw.iter().all(|v| v.is_finite())
            && self.rotation_raw.iter().all(|v| v.is_finite())
            && self.opacity_raw.is_finite()
            && self.sh.iter().all(|v| v.is_finite())
    }
}

/// An ordered collection of splats sharing one SH degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub splats: Vec<GaussianSplat>,
    pub sh_degree: usize,
    pub background: [f64; 3],
}

impl Scene {
    pub fn new(sh_degree: usize, background: [f64; 3]) -> Result<Self, SceneError> {
        if sh_degree > MAX_SH_DEGREE {
            return Err(SceneError::ShDegree(sh_degree));
        }
        Ok(Self {
            splats: Vec::new(),
            sh_degree,
            background,
        })
    }

    pub fn with_splats(
        sh_degree: usize,
        background: [f64; 3],
        splats: Vec<GaussianSplat>,
    ) -> Result<Self, SceneError> {
        let mut scene = Self::new(sh_degree, background)?;
        for s in splats {
            scene.push(s)?;
        }
        Ok(scene)
    }

    pub fn push(&mut self, splat: GaussianSplat) -> Result<(), SceneError> {
        let expected = sh_len(self.sh_degree);
        if splat.sh.len() != expected {
            return Err(SceneError::Shape {
                expected,
                actual: splat.sh.len(),
            });
        }
        self.splats.push(splat);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn sh_len(&self) -> usize {
        sh_len(self.sh_degree)
    }

    /// Checks the per-splat SH length invariant.
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.sh_degree > MAX_SH_DEGREE {
            return Err(SceneError::ShDegree(self.sh_degree));
        }
        let expected = self.sh_len();
        for s in &self.splats {
            if s.sh.len() != expected {
                return Err(SceneError::Shape {
                    expected,
                    actual: s.sh.len(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_transforms_keep_invariants() {
        let s = GaussianSplat::isotropic([0.0; 3], 0.25, 0.3, [0.2, 0.4, 0.6], 1);
        assert!(s.scale().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!((s.opacity() - 0.3).abs() < 1e-12);
        assert_eq!(s.sh.len(), 12);
        let mut extreme = s.clone();
        extreme.opacity_raw = 800.0;
        assert!(extreme.opacity() <= 1.0);
        extreme.opacity_raw = -800.0;
        assert!(extreme.opacity() >= 0.0);
    }

    #[test]
    fn scene_rejects_wrong_sh_length() {
        let mut scene = Scene::new(2, [0.0; 3]).unwrap();
        let s = GaussianSplat::isotropic([0.0; 3], 1.0, 0.5, [0.5; 3], 1);
        assert_eq!(
            scene.push(s),
            Err(SceneError::Shape {
                expected: 27,
                actual: 12
            })
        );
        assert!(Scene::new(4, [0.0; 3]).is_err());
    }

    #[test]
    fn degenerate_rotation_is_rejected() {
        let mut s = GaussianSplat::isotropic([0.0; 3], 1.0, 0.5, [0.5; 3], 0);
        s.rotation_raw = [0.0; 4];
        assert!(matches!(s.rotation(), Err(SceneError::InvalidPrimitive(_))));
    }
}
