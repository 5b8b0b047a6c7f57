//! On-disk formats: binary PLY scenes, cameras JSON, COLMAP text points and
//! 8-bit PNG frames. Every writer goes through [`write_atomic`].

mod cameras;
pub(crate) use cameras::check_unique;
mod colmap;
mod ply;
mod png;

pub use cameras::{
    cameras_from_json, cameras_to_json, load_cameras, save_cameras, CameraEntry, CameraRecord,
};
pub use colmap::{load_points3d, parse_points3d, InitPoint};
pub use ply::{load_ply, read_ply, save_ply, save_ply_with, write_ply, PlyPrecision};
pub use png::{decode_png, encode_png, load_png, save_png};

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::scene::SceneError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

impl IoError {
    pub(crate) fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Write `bytes` to a sibling temporary file, sync it and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|e| IoError::file(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    write_atomic(path, bytes).map_err(|e| IoError::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn missing_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_atomic(&dir.path().join("nope/a.bin"), b"x").is_err());
    }
}
