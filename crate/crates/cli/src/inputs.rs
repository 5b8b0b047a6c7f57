use std::path::{Path, PathBuf};

use gsfix_core::io::{load_cameras, load_ply, load_png, load_points3d, write_file, InitPoint};
use gsfix_core::pipeline::View;
use gsfix_core::scene::sh;
use serde::Serialize;

use crate::error::CliError;

pub fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Posed images from a cameras file. With `images`, each frame is looked up
/// in that directory by the entry's file name, or `<pose_id>.png` when the
/// entry names none; otherwise the entry's path is resolved against the
/// cameras file.
pub fn load_views(cameras: &Path, images: Option<&Path>) -> Result<Vec<View>, CliError> {
    let base = parent_dir(cameras);
    load_cameras(cameras)?
        .into_iter()
        .map(|record| {
            let id = record.pose.pose_id.clone();
            let path = match images {
                Some(dir) => match record.image.as_ref().and_then(|p| p.file_name()) {
                    Some(name) => dir.join(name),
                    None => dir.join(format!("{id}.png")),
                },
                None => record
                    .image_path(&base)
                    .ok_or_else(|| CliError::Input(format!("camera `{id}` has no image; pass --images")))?,
            };
            let image = load_png(&path)?;
            let k = record.pose.intrinsics;
            if (image.width, image.height) != (k.width as usize, k.height as usize) {
                return Err(CliError::Input(format!(
                    "{}: image is {}x{} but camera `{id}` is {}x{}",
                    path.display(),
                    image.width,
                    image.height,
                    k.width,
                    k.height
                )));
            }
            Ok(View { pose: record.pose, image })
        })
        .collect()
}

/// Initialization points from a COLMAP `points3D.txt`, or from the splat
/// means and base colors of a `.ply` scene.
pub fn load_points(path: &Path) -> Result<Vec<InitPoint>, CliError> {
    let is_ply = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if !is_ply {
        return Ok(load_points3d(path)?);
    }
    let scene = load_ply(path)?;
    Ok(scene
        .splats
        .iter()
        .map(|s| InitPoint {
            position: s.mean,
            rgb: [0, 1, 2].map(|c| sh::dc_to_rgb(s.sh[c]).clamp(0.0, 1.0)),
        })
        .collect())
}

pub fn parse_background(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [r, g, b] if parts.iter().all(|v| (0.0..=1.0).contains(v)) => Ok([r, g, b]),
        _ => Err("expected three comma-separated values in [0, 1]".into()),
    }
}

pub fn parse_split(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err("expected three comma-separated counts".into()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    write_file(path, text.as_bytes())?;
    Ok(())
}
