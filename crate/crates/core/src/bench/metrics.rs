use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::optim::{psnr, ssim, OptimError};

/// Whether an evaluated pose was used for training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewSplit {
    Train,
    HeldOut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub pose_id: String,
    pub psnr: f64,
    pub ssim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<ViewSplit>,
}

impl FrameMetrics {
    pub fn compute(pose_id: impl Into<String>, candidate: &Image, gt: &Image) -> Result<Self, OptimError> {
        Ok(Self {
            pose_id: pose_id.into(),
            psnr: psnr(candidate, gt)?,
            ssim: ssim(candidate, gt)?,
            split: None,
        })
    }
}

/// Per-frame PSNR/SSIM rows with their per-scene means, plus optional
/// externally computed scores keyed by metric name and pose id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scene_id: String,
    pub per_frame: Vec<FrameMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub external: BTreeMap<String, BTreeMap<String, f64>>,
}

impl MetricsReport {
    pub fn from_frames(scene_id: impl Into<String>, per_frame: Vec<FrameMetrics>) -> Self {
        let n = per_frame.len().max(1) as f64;
        let mean_psnr = per_frame.iter().map(|f| f.psnr).sum::<f64>() / n;
        let mean_ssim = per_frame.iter().map(|f| f.ssim).sum::<f64>() / n;
        Self {
            scene_id: scene_id.into(),
            per_frame,
            mean_psnr,
            mean_ssim,
            external: BTreeMap::new(),
        }
    }

    /// Mean of an external metric over its rows.
    pub fn external_mean(&self, metric: &str) -> Option<f64> {
        let rows = self.external.get(metric)?;
        (!rows.is_empty()).then(|| rows.values().sum::<f64>() / rows.len() as f64)
    }

    /// Means restricted to one split, if any rows carry it.
    pub fn split_means(&self, split: ViewSplit) -> Option<(f64, f64)> {
        let rows: Vec<_> = self.per_frame.iter().filter(|f| f.split == Some(split)).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some((
            rows.iter().map(|f| f.psnr).sum::<f64>() / n,
            rows.iter().map(|f| f.ssim).sum::<f64>() / n,
        ))
    }
}
