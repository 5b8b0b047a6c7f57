use nalgebra::Vector3;
use rayon::prelude::*;

use super::PipelineError;
use crate::io::InitPoint;
use crate::scene::{logit, sh, sh_len, CameraPose, GaussianSplat, Scene, NEAR_PLANE};

/// Opacity given to every freshly initialized splat.
pub const INIT_OPACITY: f64 = 0.1;

/// True when `p` lies in front of the near plane and projects inside the
/// image, whose pixels span `[-0.5, W - 0.5) × [-0.5, H - 0.5)`.
pub fn is_visible(p: &Vector3<f64>, pose: &CameraPose) -> bool {
    let c = pose.world_to_camera(p);
    if !(c.z > NEAR_PLANE) {
        return false;
    }
    let k = &pose.intrinsics;
    let u = k.fx * c.x / c.z + k.cx;
    let v = k.fy * c.y / c.z + k.cy;
    u >= -0.5 && u < f64::from(k.width) - 0.5 && v >= -0.5 && v < f64::from(k.height) - 0.5
}

/// Points seen by at least one training camera, in input order.
pub fn filter_visible_points(points: &[InitPoint], poses: &[CameraPose]) -> Vec<InitPoint> {
    points
        .iter()
        .filter(|pt| {
            let p = Vector3::from(pt.position);
            poses.iter().any(|pose| is_visible(&p, pose))
        })
        .copied()
        .collect()
}

/// Mean distance to the (up to) three nearest other points.
fn knn_scales(points: &[InitPoint]) -> Vec<f64> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let pa = Vector3::from(a.position);
            let mut best = [f64::INFINITY; 3];
            for (j, b) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = (Vector3::from(b.position) - pa).norm();
                if d < best[2] {
                    best[2] = d;
                    best.sort_by(f64::total_cmp);
                }
            }
            let found: Vec<f64> = best.into_iter().filter(|d| d.is_finite()).collect();
            found.iter().sum::<f64>() / found.len() as f64
        })
        .collect()
}

/// One isotropic splat per point: scale from the mean 3-NN distance,
/// opacity [`INIT_OPACITY`], degree-0 color from the point color and
/// zero higher-order SH.
pub fn initialize_scene(points: &[InitPoint], sh_degree: usize, background: [f64; 3]) -> Result<Scene, PipelineError> {
    if points.is_empty() {
        return Err(PipelineError::Init("no visible points to initialize from".into()));
    }
    if points.len() < 2 {
        return Err(PipelineError::Init("at least two points are needed to estimate splat scales".into()));
    }
    let scales = knn_scales(points);
    let mut scene = Scene::new(sh_degree, background)?;
    for (pt, dist) in points.iter().zip(scales) {
        let mut coeffs = vec![0.0; sh_len(sh_degree)];
        for c in 0..3 {
            coeffs[c] = sh::rgb_to_dc(pt.rgb[c]);
        }
        scene.push(GaussianSplat {
            mean: pt.position,
            scale_raw: [dist.max(1e-7).ln(); 3],
            rotation_raw: [1.0, 0.0, 0.0, 0.0],
            opacity_raw: logit(INIT_OPACITY),
            sh: coeffs,
        })?;
    }
    Ok(scene)
}
