use nalgebra::Vector3;

use super::{RenderConfig, RenderError, RenderedFrame, MAX_ALPHA};
use crate::image::Image;
use crate::scene::{self, CameraPose, Projection, Scene};

struct Candidate {
    index: usize,
    depth: f64,
    mean2d: [f64; 2],
    inv_cov: nalgebra::Matrix2<f64>,
    opacity: f64,
    color: [f64; 3],
}

/// Brute-force renderer: every splat is tested at every pixel, sorted per
/// pixel by `(depth, index)`. No tiling or bounding rectangles.
pub fn render_reference(
    scene: &Scene,
    camera: &CameraPose,
    config: &RenderConfig,
) -> Result<RenderedFrame, RenderError> {
    config.validate()?;
    camera.validate()?;
    scene.validate()?;
    let center = camera.center();
    let mut candidates = Vec::new();
    for (index, splat) in scene.splats.iter().enumerate() {
        if !splat.is_finite() {
            return Err(RenderError::NonFinite { index });
        }
        let Projection::Visible(p) = scene::project_gaussian(splat, camera)
            .map_err(|source| RenderError::Splat { index, source })?
        else {
            continue;
        };
        let Some(inv_cov) = p.cov2d.try_inverse() else {
            continue;
        };
        let dir: Vector3<f64> = (splat.mean_vec() - center).normalize();
        let color = scene::eval_sh(&splat.sh, dir.into(), scene.sh_degree)?;
        candidates.push(Candidate {
            index,
            depth: p.depth,
            mean2d: p.mean2d,
            inv_cov,
            opacity: splat.opacity(),
            color,
        });
    }

    let (w, h) = (camera.width(), camera.height());
    let bg = config.background_for(scene);
    let mut frame = RenderedFrame {
        rgb: Image::new(w, h),
        alpha: vec![0.0; w * h],
        contributors: vec![0; w * h],
    };
    let mut hits: Vec<(f64, usize, f64, [f64; 3])> = Vec::new();
    for py in 0..h {
        for px in 0..w {
            hits.clear();
            for c in &candidates {
                let d = nalgebra::Vector2::new(px as f64 - c.mean2d[0], py as f64 - c.mean2d[1]);
                let g = (-0.5 * d.dot(&(c.inv_cov * d))).min(0.0).exp();
                let alpha = (c.opacity * g).min(MAX_ALPHA);
                if alpha >= config.alpha_cutoff {
                    hits.push((c.depth, c.index, alpha, c.color));
                }
            }
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut color = [0.0; 3];
            let mut t = 1.0;
            let mut count = 0;
            for &(_, _, alpha, c) in &hits {
                let next_t = t * (1.0 - alpha);
                if next_t < config.transmittance_floor {
                    break;
                }
                for ch in 0..3 {
                    color[ch] += c[ch] * alpha * t;
                }
                t = next_t;
                count += 1;
            }
            frame
                .rgb
                .set_pixel(px, py, [0, 1, 2].map(|ch| (color[ch] + t * bg[ch]).clamp(0.0, 1.0)));
            frame.alpha[py * w + px] = 1.0 - t;
            frame.contributors[py * w + px] = count;
        }
    }
    Ok(frame)
}
