use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, IoError};
use crate::scene::{CameraPose, Intrinsics, SceneError};

/// One camera entry, optionally paired with an image on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraRecord {
    pub pose: CameraPose,
    pub image: Option<PathBuf>,
}

impl CameraRecord {
    pub fn new(pose: CameraPose) -> Self {
        Self { pose, image: None }
    }

    /// Image path resolved against the directory of the cameras file.
    pub fn image_path(&self, base: &Path) -> Option<PathBuf> {
        self.image.as_ref().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) })
    }
}

/// Serialized form of one camera, shared by the cameras file and job manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub pose_id: String,
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

impl CameraEntry {
    pub fn from_pose(pose: &CameraPose, image: Option<PathBuf>) -> Self {
        let k = pose.intrinsics;
        Self {
            pose_id: pose.pose_id.clone(),
            quaternion: pose.rotation_wxyz(),
            translation: pose.translation.into(),
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            image,
        }
    }

    /// Validated pose with a normalized quaternion.
    pub fn to_pose(&self) -> Result<CameraPose, SceneError> {
        let intrinsics = Intrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        };
        CameraPose::new(self.pose_id.clone(), self.quaternion, self.translation, intrinsics)
    }
}

pub fn cameras_to_json(records: &[CameraRecord]) -> Result<String, IoError> {
    check_unique(records.iter().map(|r| r.pose.pose_id.as_str()))?;
    let entries: Vec<CameraEntry> = records
        .iter()
        .map(|r| CameraEntry::from_pose(&r.pose, r.image.clone()))
        .collect();
    Ok(serde_json::to_string_pretty(&entries)?)
}

/// Parse a cameras list; quaternions are normalized and pose ids must be unique.
pub fn cameras_from_json(text: &str) -> Result<Vec<CameraRecord>, IoError> {
    let entries: Vec<CameraEntry> = serde_json::from_str(text)?;
    check_unique(entries.iter().map(|e| e.pose_id.as_str()))?;
    entries
        .into_iter()
        .map(|e| {
            let pose = e.to_pose()?;
            Ok(CameraRecord { pose, image: e.image })
        })
        .collect()
}

pub fn save_cameras(path: &Path, records: &[CameraRecord]) -> Result<(), IoError> {
    write_file(path, cameras_to_json(records)?.as_bytes())
}

pub fn load_cameras(path: &Path) -> Result<Vec<CameraRecord>, IoError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::Parse("cameras file is not UTF-8".into()))?;
    cameras_from_json(&text)
}

pub(crate) fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), IoError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(SceneError::InvalidCamera {
                pose_id: id.to_string(),
                reason: "duplicate pose id".into(),
            }
            .into());
        }
    }
    Ok(())
}
