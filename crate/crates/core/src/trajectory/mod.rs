//! Camera paths between reference views: interpolation, ellipse orbits and the
//! reference-guided hybrid.

mod guided;
mod interp;
mod orbit;

pub use guided::{default_split, sample_reference_guided, DEFAULT_SPLIT_49};
pub use interp::{interpolate_pose, sample_interpolation, slerp};
pub use orbit::{fit_orbit_path, sample_ellipse, OrbitPath};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{CameraPose, SceneError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentLabel {
    Reference,
    Interp,
    Orbit,
}

impl SegmentLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentLabel::Reference => "reference",
            SegmentLabel::Interp => "interp",
            SegmentLabel::Orbit => "orbit",
        }
    }
}

/// An ordered camera path with one label per pose.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPlan {
    pub poses: Vec<CameraPose>,
    pub labels: Vec<SegmentLabel>,
    /// Pose ids of the two references the plan connects, if any.
    pub source_refs: Option<(String, String)>,
    /// Set when a reference-guided plan fell back to pure interpolation.
    pub fallback: bool,
    pub warnings: Vec<String>,
}

impl TrajectoryPlan {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Poses that are not labeled as references.
    pub fn novel_poses(&self) -> impl Iterator<Item = &CameraPose> {
        self.poses
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l != SegmentLabel::Reference)
            .map(|(p, _)| p)
    }
}

pub(crate) fn frame_id(a: &CameraPose, b: &CameraPose, k: usize) -> String {
    format!("{}_{}_{k:03}", a.pose_id, b.pose_id)
}

/// One plan per adjacent reference pair. Two references are joined by
/// interpolation; three or more share one fitted orbit and use
/// reference-guided plans with `split` (proportional by default). A failed
/// orbit fit falls back to interpolation and is reported in the warnings.
pub fn plan_reference_path(
    poses: &[CameraPose],
    frames: usize,
    split: Option<(usize, usize, usize)>,
) -> Result<(Vec<TrajectoryPlan>, Vec<String>), TrajectoryError> {
    if poses.len() < 2 {
        return Err(TrajectoryError::InvalidArgument("a reference path needs at least two poses".into()));
    }
    let mut warnings = Vec::new();
    let orbit = if poses.len() >= 3 {
        match fit_orbit_path(poses) {
            Ok(o) => Some(o),
            Err(e) => {
                warnings.push(format!("orbit fit failed ({e}); using interpolation"));
                None
            }
        }
    } else {
        None
    };
    let split = split.unwrap_or_else(|| default_split(frames));
    let plans = poses
        .windows(2)
        .map(|pair| match &orbit {
            Some(o) => sample_reference_guided(&pair[0], &pair[1], o, frames, split),
            None => sample_interpolation(&pair[0], &pair[1], frames),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((plans, warnings))
}
