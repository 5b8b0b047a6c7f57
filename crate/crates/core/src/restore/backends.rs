use std::collections::HashMap;
use std::path::PathBuf;

use super::{RestorationRequest, RestorationResponse, RestoreError, Restorer};
use crate::image::Image;
use crate::raster::{render, RenderConfig};
use crate::scene::{CameraPose, Scene};

/// Returns the artifact frames unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityRestorer;

impl Restorer for IdentityRestorer {
    fn name(&self) -> String {
        "identity".into()
    }

    fn restore_frames(&self, request: &RestorationRequest) -> RestorationResponse {
        RestorationResponse::ok(self.name(), request.frames.clone())
    }
}

/// Source of clean frames for arbitrary poses.
pub trait GroundTruthStore: Send + Sync {
    fn ground_truth(&self, pose: &CameraPose) -> Option<Image>;
}

impl GroundTruthStore for HashMap<String, Image> {
    fn ground_truth(&self, pose: &CameraPose) -> Option<Image> {
        self.get(&pose.pose_id).cloned()
    }
}

/// Renders a known ground-truth scene at the requested pose.
#[derive(Clone, Debug)]
pub struct RenderedGroundTruth {
    pub scene: Scene,
    pub config: RenderConfig,
}

impl GroundTruthStore for RenderedGroundTruth {
    fn ground_truth(&self, pose: &CameraPose) -> Option<Image> {
        render(&self.scene, pose, &self.config).ok().map(|f| f.rgb)
    }
}

/// Reads `<dir>/<pose_id>.png`.
#[derive(Clone, Debug)]
pub struct DirectoryGroundTruth {
    pub dir: PathBuf,
}

impl GroundTruthStore for DirectoryGroundTruth {
    fn ground_truth(&self, pose: &CameraPose) -> Option<Image> {
        if !super::is_safe_component(&pose.pose_id) {
            return None;
        }
        crate::io::load_png(&self.dir.join(format!("{}.png", pose.pose_id))).ok()
    }
}

fn lookup_all(store: &dyn GroundTruthStore, request: &RestorationRequest) -> Result<Vec<Image>, String> {
    request
        .frame_poses
        .iter()
        .zip(&request.frames)
        .map(|(pose, frame)| match store.ground_truth(pose) {
            Some(gt) if gt.same_shape(frame) => Ok(gt),
            Some(_) => Err(format!("ground truth for pose `{}` has the wrong resolution", pose.pose_id)),
            None => Err(format!("no ground truth for pose `{}`", pose.pose_id)),
        })
        .collect()
}

/// Returns ground-truth frames looked up by pose.
pub struct OracleRestorer {
    store: Box<dyn GroundTruthStore>,
}

impl OracleRestorer {
    pub fn new(store: impl GroundTruthStore + 'static) -> Self {
        Self { store: Box::new(store) }
    }
}

impl Restorer for OracleRestorer {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn restore_frames(&self, request: &RestorationRequest) -> RestorationResponse {
        match lookup_all(self.store.as_ref(), request) {
            Ok(frames) => RestorationResponse::ok(self.name(), frames),
            Err(msg) => RestorationResponse::failed(self.name(), msg),
        }
    }
}

/// Pixelwise `β·GT + (1−β)·artifact`.
pub struct BlendRestorer {
    beta: f64,
    store: Box<dyn GroundTruthStore>,
}

impl BlendRestorer {
    pub fn new(beta: f64, store: impl GroundTruthStore + 'static) -> Result<Self, RestoreError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(RestoreError::Config(format!("blend beta {beta} outside [0, 1]")));
        }
        Ok(Self { beta, store: Box::new(store) })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Restorer for BlendRestorer {
    fn name(&self) -> String {
        format!("blend:{}", self.beta)
    }

    fn restore_frames(&self, request: &RestorationRequest) -> RestorationResponse {
        let gts = match lookup_all(self.store.as_ref(), request) {
            Ok(g) => g,
            Err(msg) => return RestorationResponse::failed(self.name(), msg),
        };
        let b = self.beta;
        let frames = gts
            .into_iter()
            .zip(&request.frames)
            .map(|(gt, art)| {
                let data = if b == 1.0 {
                    gt.data
                } else if b == 0.0 {
                    art.data.clone()
                } else {
                    gt.data.iter().zip(&art.data).map(|(g, a)| b * g + (1.0 - b) * a).collect()
                };
                Image { width: art.width, height: art.height, data }
            })
            .collect();
        RestorationResponse::ok(self.name(), frames)
    }
}
