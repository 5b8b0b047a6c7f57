//! Sparse-view reconstruction: point initialization, the baseline fit and the
//! iterative render → restore → retrain loop.

mod init;
mod recon;
mod train;

pub use init::{filter_visible_points, initialize_scene, is_visible, INIT_OPACITY};
pub use recon::{
    fit_baseline, run_iterative_from, run_iterative_recon, AuditEvent, GenSetPolicy, ReconOutcome,
    RoundFailure, RoundSummary,
};
pub use train::{evaluate_views, render_views, train_scene, TrainLog};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;
use crate::io::InitPoint;
use crate::optim::{LossWeights, OptimError, TrainConfig};
use crate::raster::{RenderConfig, RenderError};
use crate::restore::RestoreError;
use crate::scene::{CameraPose, SceneError};
use crate::trajectory::TrajectoryError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("initialization failed: {0}")]
    Init(String),
    #[error("invalid job: {0}")]
    Job(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}

/// A posed image used for supervision or evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub pose: CameraPose,
    pub image: Image,
}

/// How novel views are sampled between each adjacent reference pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    /// Poses per plan including both references.
    pub frames: usize,
    /// `(n₁, n₂, n₃)`; proportional to the 8/33/8 split when absent.
    pub split: Option<(usize, usize, usize)>,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self { frames: 49, split: None }
    }
}

/// Everything needed to reconstruct one scene from sparse views.
#[derive(Clone, Debug)]
pub struct ReconJob {
    pub scene_id: String,
    /// The `K` reference views, in trajectory order.
    pub input_views: Vec<View>,
    pub init_points: Vec<InitPoint>,
    /// Held-out views for per-round metrics; the input views are used when empty.
    pub eval_views: Vec<View>,
    pub rounds: usize,
    pub trajectory: TrajectorySpec,
    pub baseline: TrainConfig,
    pub refine: TrainConfig,
    pub loss: LossWeights,
    pub render: RenderConfig,
    pub sh_degree: usize,
    pub background: [f64; 3],
    pub gen_policy: GenSetPolicy,
    pub seed: u64,
    /// Where per-round PLY snapshots, metrics and the audit log are written.
    pub output_dir: Option<PathBuf>,
}

impl ReconJob {
    pub fn new(scene_id: impl Into<String>, input_views: Vec<View>, init_points: Vec<InitPoint>) -> Self {
        Self {
            scene_id: scene_id.into(),
            input_views,
            init_points,
            eval_views: Vec::new(),
            rounds: 3,
            trajectory: TrajectorySpec::default(),
            baseline: TrainConfig::default(),
            refine: TrainConfig::default(),
            loss: LossWeights::default(),
            render: RenderConfig::default(),
            sh_degree: 0,
            background: [0.0; 3],
            gen_policy: GenSetPolicy::default(),
            seed: 0,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.input_views.len() < 2 {
            return Err(PipelineError::Job(format!(
                "need at least 2 input views, got {}",
                self.input_views.len()
            )));
        }
        if !crate::restore::is_safe_component(&self.scene_id) {
            return Err(PipelineError::Job(format!("scene_id `{}` is not a plain name", self.scene_id)));
        }
        for v in self.input_views.iter().chain(&self.eval_views) {
            v.pose.validate()?;
            if v.image.width != v.pose.width() || v.image.height != v.pose.height() {
                return Err(PipelineError::Job(format!(
                    "image for `{}` does not match its intrinsics",
                    v.pose.pose_id
                )));
            }
        }
        crate::io::check_unique(self.input_views.iter().map(|v| v.pose.pose_id.as_str()))?;
        if self.trajectory.frames < 2 {
            return Err(PipelineError::Job("trajectory frames must be at least 2".into()));
        }
        if let Some((a, b, c)) = self.trajectory.split {
            if a + b + c != self.trajectory.frames {
                return Err(PipelineError::Job("trajectory split does not sum to frames".into()));
            }
        }
        self.baseline.validate()?;
        self.refine.validate()?;
        self.loss.validate()?;
        self.render.validate()?;
        Ok(())
    }

    pub fn input_poses(&self) -> Vec<CameraPose> {
        self.input_views.iter().map(|v| v.pose.clone()).collect()
    }
}
