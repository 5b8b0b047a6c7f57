use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};

use super::SceneError;

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    /// Symmetric intrinsics with the principal point at the image center.
    pub fn centered(focal: f64, width: u32, height: u32) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            width,
            height,
        }
    }
}

/// Rigid world-to-camera pose plus intrinsics (camera looks down +z, y down).
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPose {
    pub pose_id: String,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub intrinsics: Intrinsics,
}

/// Build a unit quaternion from `(w, x, y, z)`.
///
/// Inputs whose squared norm is already 1 to within a few ulps are kept
/// bit-for-bit so that normalized values survive serialization round trips.
pub fn unit_quaternion(wxyz: [f64; 4]) -> Option<UnitQuaternion<f64>> {
    let [w, x, y, z] = wxyz;
    let n2 = w * w + x * x + y * y + z * z;
    if !(n2.is_finite() && n2 > 1e-24) {
        return None;
    }
    let q = Quaternion::new(w, x, y, z);
    if (n2 - 1.0).abs() <= 8.0 * f64::EPSILON {
        Some(UnitQuaternion::new_unchecked(q))
    } else {
        Some(UnitQuaternion::new_normalize(q))
    }
}

impl CameraPose {
    pub fn new(
        pose_id: impl Into<String>,
        rotation_wxyz: [f64; 4],
        translation: [f64; 3],
        intrinsics: Intrinsics,
    ) -> Result<Self, SceneError> {
        let pose_id = pose_id.into();
        let rotation = unit_quaternion(rotation_wxyz).ok_or_else(|| SceneError::InvalidCamera {
            pose_id: pose_id.clone(),
            reason: "degenerate rotation quaternion".into(),
        })?;
        let pose = Self {
            pose_id,
            rotation,
            translation: Vector3::from(translation),
            intrinsics,
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Camera at `eye` looking at `target`, with `up` mapped to image-up (-y).
    pub fn look_at(
        pose_id: impl Into<String>,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        intrinsics: Intrinsics,
    ) -> Result<Self, SceneError> {
        let pose_id = pose_id.into();
        let rotation = look_at_rotation(eye, target, up).ok_or_else(|| SceneError::InvalidCamera {
            pose_id: pose_id.clone(),
            reason: "look-at direction is degenerate or parallel to up".into(),
        })?;
        let translation = -(rotation * eye);
        let pose = Self {
            pose_id,
            rotation,
            translation,
            intrinsics,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |reason: &str| {
            Err(SceneError::InvalidCamera {
                pose_id: self.pose_id.clone(),
                reason: reason.to_string(),
            })
        };
        let k = &self.intrinsics;
        if (self.rotation.quaternion().norm() - 1.0).abs() > 1e-9 {
            return bad("rotation is not a unit quaternion");
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return bad("non-finite translation");
        }
        if !(k.fx > 0.0 && k.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if k.width == 0 || k.height == 0 {
            return bad("image size must be positive");
        }
        if !(k.cx >= 0.0 && k.cx < f64::from(k.width) && k.cy >= 0.0 && k.cy < f64::from(k.height)) {
            return bad("principal point outside the image");
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }

    /// Quaternion as `(w, x, y, z)`.
    pub fn rotation_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    /// Optical axis (+z of the camera) in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.inverse() * Vector3::z()
    }

    pub fn with_id(mut self, pose_id: impl Into<String>) -> Self {
        self.pose_id = pose_id.into();
        self
    }
}

/// World-to-camera rotation for a camera at `eye` looking at `target`.
pub(crate) fn look_at_rotation(
    eye: Vector3<f64>,
    target: Vector3<f64>,
    up: Vector3<f64>,
) -> Option<UnitQuaternion<f64>> {
    let z = (target - eye).try_normalize(1e-12)?;
    // Camera y points down, so it is the negated component of `up` orthogonal to z.
    let y = (-(up - z * up.dot(&z))).try_normalize(1e-9)?;
    let x = y.cross(&z);
    // Rows are the camera axes expressed in world coordinates.
    let m = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    Some(UnitQuaternion::from_rotation_matrix(
        &Rotation3::from_matrix_unchecked(m),
    ))
}
