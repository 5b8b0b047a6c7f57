//! Photometric losses and metrics, the annealed reconstruction objective,
//! adaptive-moment updates and densify/prune maintenance.

mod adam;
mod densify;
mod loss;
mod ssim;

pub use adam::{optimize_step, AdamState, ADAM_BETAS, ADAM_EPS};
pub use densify::{densify_and_prune, DensifyOutcome, DensifyStats};
pub use loss::{
    anneal_lambda, l1_loss, l1_loss_with_grad, photometric_loss, psnr, total_loss, ImagePair, LossWeights,
    TotalLoss, PSNR_CAP_DB,
};
pub use ssim::{ssim, ssim_with_grad, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("image shape mismatch: {0}x{1} vs {2}x{3}")]
    Shape(usize, usize, usize, usize),
    #[error("{0} renders but {1} targets")]
    PairCount(usize, usize),
    #[error("invalid config: {0}")]
    Config(String),
}

pub(crate) fn check_shape(a: &crate::Image, b: &crate::Image) -> Result<(), OptimError> {
    if a.same_shape(b) && a.data.len() == b.data.len() && a.data.len() == 3 * a.width * a.height {
        Ok(())
    } else {
        Err(OptimError::Shape(a.width, a.height, b.width, b.height))
    }
}

/// Per-group learning rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub mean: f64,
    pub scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub sh: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            mean: 1.6e-3,
            scale: 5e-3,
            rotation: 1e-3,
            opacity: 2.5e-2,
            sh: 2.5e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rates: LearningRates,
    /// Densify every this many iterations; 0 disables densification.
    pub densify_interval: usize,
    /// Mean pixel-space positional gradient norm that triggers densification.
    pub densify_grad_threshold: f64,
    pub prune_opacity_threshold: f64,
    pub max_splats: usize,
    /// Splats whose largest scale exceeds this (meters) are split, others cloned.
    pub split_scale_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rates: LearningRates::default(),
            densify_interval: 0,
            densify_grad_threshold: 2e-4,
            prune_opacity_threshold: 5e-3,
            max_splats: 100_000,
            split_scale_threshold: 0.05,
        }
    }
}

impl TrainConfig {
    /// Zero iterations is accepted and means "no optimization".
    pub fn validate(&self) -> Result<(), OptimError> {
        let lr = &self.learning_rates;
        if [lr.mean, lr.scale, lr.rotation, lr.opacity, lr.sh]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(OptimError::Config("learning rates must be finite and non-negative".into()));
        }
        if !(self.densify_grad_threshold > 0.0
            && self.prune_opacity_threshold > 0.0
            && self.split_scale_threshold > 0.0)
        {
            return Err(OptimError::Config("thresholds must be positive".into()));
        }
        if self.max_splats == 0 {
            return Err(OptimError::Config("max_splats must be positive".into()));
        }
        Ok(())
    }
}
