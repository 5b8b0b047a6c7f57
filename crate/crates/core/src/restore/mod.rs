//! The restoration boundary: requests carry rendered novel views plus two
//! clean references, and a backend returns fixed frames.

mod backends;
mod remote;
mod spec;

pub use backends::{
    BlendRestorer, DirectoryGroundTruth, GroundTruthStore, IdentityRestorer, OracleRestorer,
    RenderedGroundTruth,
};
pub use remote::{
    RemoteRestorer, RemoteWorker, RequestManifest, ResponseManifest, DEFAULT_POLL_INTERVAL,
    DEFAULT_TIMEOUT, WorkerHandle,
};
pub use spec::RestorerSpec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;
use crate::scene::CameraPose;

#[derive(Debug, Error)]
pub enum RestoreError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RestoreStatus {
    Ok,
    Partial,
    Failed,
}

/// Rendered novel views to be fixed, conditioned on two reference views.
#[derive(Clone, Debug)]
pub struct RestorationRequest {
    pub scene_id: String,
    pub round: usize,
    pub frames: Vec<Image>,
    pub frame_poses: Vec<CameraPose>,
    pub ref_images: [Image; 2],
    pub ref_poses: [CameraPose; 2],
}

impl RestorationRequest {
    pub fn validate(&self) -> Result<(), RestoreError> {
        let bad = |m: String| Err(RestoreError::InvalidRequest(m));
        if !is_safe_component(&self.scene_id) {
            return bad(format!("scene_id `{}` is not a plain name", self.scene_id));
        }
        if self.frames.len() != self.frame_poses.len() {
            return bad(format!(
                "{} frames but {} frame poses",
                self.frames.len(),
                self.frame_poses.len()
            ));
        }
        let shaped = |img: &Image, pose: &CameraPose| img.width == pose.width() && img.height == pose.height();
        for (i, (f, p)) in self.frames.iter().zip(&self.frame_poses).enumerate() {
            if !shaped(f, p) {
                return bad(format!("frame {i} resolution does not match pose `{}`", p.pose_id));
            }
        }
        for (img, pose) in self.ref_images.iter().zip(&self.ref_poses) {
            if !shaped(img, pose) {
                return bad(format!("reference image does not match pose `{}`", pose.pose_id));
            }
        }
        if crate::io::check_unique(self.frame_poses.iter().map(|p| p.pose_id.as_str())).is_err() {
            return bad("frame pose ids are not unique".into());
        }
        Ok(())
    }
}

/// Fixed frames in request order. On `Partial`, `restored[i]` is false for
/// frames the backend passed through untouched.
#[derive(Clone, Debug)]
pub struct RestorationResponse {
    pub fixed_frames: Vec<Image>,
    pub restored: Vec<bool>,
    pub backend: String,
    pub status: RestoreStatus,
    pub message: Option<String>,
}

impl RestorationResponse {
    pub fn ok(backend: impl Into<String>, fixed_frames: Vec<Image>) -> Self {
        Self {
            restored: vec![true; fixed_frames.len()],
            fixed_frames,
            backend: backend.into(),
            status: RestoreStatus::Ok,
            message: None,
        }
    }

    pub fn failed(backend: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            fixed_frames: Vec::new(),
            restored: Vec::new(),
            backend: backend.into(),
            status: RestoreStatus::Failed,
            message: Some(message.into()),
        }
    }

    /// Frames that were actually restored, paired with their request index.
    pub fn usable_frames(&self) -> impl Iterator<Item = (usize, &Image)> {
        let usable = self.status != RestoreStatus::Failed;
        self.fixed_frames
            .iter()
            .enumerate()
            .filter(move |(i, _)| usable && self.restored.get(*i).copied().unwrap_or(false))
    }
}

pub trait Restorer: Send + Sync {
    fn name(&self) -> String;

    /// Backend-specific restoration of a validated request.
    fn restore_frames(&self, request: &RestorationRequest) -> RestorationResponse;
}

/// Validate `request`, run `backend`, and downgrade any response that breaks
/// the frame count, ordering or resolution contract to `Failed`.
pub fn restore(request: &RestorationRequest, backend: &dyn Restorer) -> Result<RestorationResponse, RestoreError> {
    request.validate()?;
    let response = backend.restore_frames(request);
    if response.status == RestoreStatus::Failed {
        return Ok(response);
    }
    let n = request.frames.len();
    let consistent = response.fixed_frames.len() == n
        && response.restored.len() == n
        && response
            .fixed_frames
            .iter()
            .zip(&request.frames)
            .all(|(a, b)| a.same_shape(b));
    if !consistent {
        return Ok(RestorationResponse::failed(
            response.backend,
            format!("backend returned frames inconsistent with the {n} requested"),
        ));
    }
    Ok(response)
}

pub(crate) fn is_safe_component(s: &str) -> bool {
    !s.is_empty()
        && s != "."
        && s != ".."
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::raster::{render, RenderConfig};
    use crate::scene::{Intrinsics, Scene};
    use crate::synthetic::{blob_scene, ring_cameras, rng};
    use nalgebra::Vector3;

    pub fn gt_scene() -> Scene {
        let mut s = blob_scene(&mut rng(5), 40, 0.8, 0);
        s.background = [0.2, 0.1, 0.3];
        s
    }

    pub fn poses(count: usize) -> Vec<CameraPose> {
        ring_cameras("p", count, 3.0, 0.5, Vector3::zeros(), 0.1, Intrinsics::centered(20.0, 24, 16))
    }

    /// A request whose frames are renders of a degraded scene and whose
    /// references are clean renders.
    pub fn request(frames: usize) -> RestorationRequest {
        let gt = gt_scene();
        let mut degraded = gt.clone();
        for s in &mut degraded.splats {
            s.mean[0] += 0.15;
        }
        let cfg = RenderConfig::default();
        let all = poses(frames + 2);
        let img = |scene: &Scene, p: &CameraPose| render(scene, p, &cfg).unwrap().rgb;
        RestorationRequest {
            scene_id: "demo".into(),
            round: 1,
            frames: all[2..].iter().map(|p| img(&degraded, p)).collect(),
            frame_poses: all[2..].to_vec(),
            ref_images: [img(&gt, &all[0]), img(&gt, &all[1])],
            ref_poses: [all[0].clone(), all[1].clone()],
        }
    }
}
