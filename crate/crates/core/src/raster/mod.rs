//! Tile-based forward compositing, a brute-force reference renderer and the
//! analytic backward pass.

mod backward;
pub mod gradcheck;
mod grads;
mod reference;

pub use backward::render_backward;
pub use grads::{GradientBuffer, ParamGroup};
pub use reference::render_reference;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;
use crate::scene::{self, sh, CameraPose, Projection, Scene, SceneError};

/// Per-splat α is clamped to this value before compositing.
pub const MAX_ALPHA: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("splat {index} has non-finite parameters")]
    NonFinite { index: usize },
    #[error("splat {index}: {source}")]
    Splat { index: usize, source: SceneError },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid render config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub tile_size: usize,
    /// Per-splat contributions with α below this are skipped.
    pub alpha_cutoff: f64,
    /// Compositing stops before transmittance would drop below this.
    pub transmittance_floor: f64,
    /// Overrides the scene background when set.
    pub background: Option<[f64; 3]>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            tile_size: 16,
            alpha_cutoff: 1.0 / 255.0,
            transmittance_floor: 1e-4,
            background: None,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.tile_size < 4 {
            return Err(RenderError::Config("tile_size must be at least 4".into()));
        }
        if !(self.alpha_cutoff > 0.0 && self.alpha_cutoff < 1.0) {
            return Err(RenderError::Config("alpha_cutoff must lie in (0, 1)".into()));
        }
        if !(self.transmittance_floor > 0.0 && self.transmittance_floor < 1.0) {
            return Err(RenderError::Config(
                "transmittance_floor must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn background_for(&self, scene: &Scene) -> [f64; 3] {
        self.background.unwrap_or(scene.background)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedFrame {
    pub rgb: Image,
    /// Accumulated opacity, `1 - final transmittance`.
    pub alpha: Vec<f64>,
    pub contributors: Vec<u32>,
}

/// Screen-space state of one visible splat.
#[derive(Clone, Debug)]
pub(crate) struct Prepared {
    pub index: usize,
    pub depth: f64,
    pub cam: Vector3<f64>,
    pub mean2d: [f64; 2],
    /// Inverse of cov2d as `(a, b, c)` for `[[a, b], [b, c]]`.
    pub conic: [f64; 3],
    pub opacity: f64,
    pub color: [f64; 3],
    /// Unnormalized viewing direction (splat mean minus camera center).
    pub view: Vector3<f64>,
    /// Inclusive pixel bounds `(x0, x1, y0, y1)`.
    pub rect: (usize, usize, usize, usize),
}

/// Project, shade and depth-sort every splat that can contribute.
pub(crate) fn prepare(
    scene: &Scene,
    camera: &CameraPose,
    config: &RenderConfig,
) -> Result<Vec<Prepared>, RenderError> {
    config.validate()?;
    camera.validate()?;
    scene.validate()?;
    let (w, h) = (camera.width(), camera.height());
    let center = camera.center();
    let n_basis = scene::sh_basis_len(scene.sh_degree);
    let mut out = Vec::with_capacity(scene.len());
    for (index, splat) in scene.splats.iter().enumerate() {
        if !splat.is_finite() {
            return Err(RenderError::NonFinite { index });
        }
        let projected = match scene::project_gaussian(splat, camera)
            .map_err(|source| RenderError::Splat { index, source })?
        {
            Projection::Visible(p) => p,
            Projection::Culled => continue,
        };
        let opacity = splat.opacity();
        if opacity < config.alpha_cutoff {
            continue;
        }
        let cov = projected.cov2d;
        let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(0, 1)];
        if !(det > 0.0) {
            continue;
        }
        let conic = [cov[(1, 1)] / det, -cov[(0, 1)] / det, cov[(0, 0)] / det];
        // Beyond this Mahalanobis radius the splat's α is below the cutoff.
        let m2 = 2.0 * (opacity / config.alpha_cutoff).ln();
        let ex = (m2 * cov[(0, 0)]).sqrt();
        let ey = (m2 * cov[(1, 1)]).sqrt();
        let [mx, my] = projected.mean2d;
        let Some(rect) = pixel_range(mx, ex, w).zip(pixel_range(my, ey, h)) else {
            continue;
        };
        let view = splat.mean_vec() - center;
        let dir = view / view.norm();
        let color = sh::eval_unchecked(&splat.sh, &sh::basis(scene.sh_degree, dir.into()), n_basis);
        out.push(Prepared {
            index,
            depth: projected.depth,
            cam: camera.world_to_camera(&splat.mean_vec()),
            mean2d: projected.mean2d,
            conic,
            opacity,
            color,
            view,
            rect: (rect.0 .0, rect.0 .1, rect.1 .0, rect.1 .1),
        });
    }
    out.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    Ok(out)
}

fn pixel_range(center: f64, extent: f64, size: usize) -> Option<(usize, usize)> {
    let lo = (center - extent).floor();
    let hi = (center + extent).ceil();
    if !(lo.is_finite() && hi.is_finite()) || hi < 0.0 || lo > (size - 1) as f64 {
        return None;
    }
    Some((lo.max(0.0) as usize, (hi as usize).min(size - 1)))
}

/// Gaussian falloff of a prepared splat at pixel `(px, py)`.
#[inline]
pub(crate) fn falloff(p: &Prepared, px: f64, py: f64) -> (f64, f64, f64) {
    let dx = px - p.mean2d[0];
    let dy = py - p.mean2d[1];
    let [a, b, c] = p.conic;
    let power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy);
    (power.min(0.0).exp(), dx, dy)
}

pub(crate) struct Tiles {
    pub size: usize,
    pub nx: usize,
    /// Per tile, indices into the prepared list in depth order.
    pub lists: Vec<Vec<usize>>,
}

impl Tiles {
    pub fn bin(prepared: &[Prepared], width: usize, height: usize, size: usize) -> Self {
        let nx = width.div_ceil(size);
        let ny = height.div_ceil(size);
        let mut lists = vec![Vec::new(); nx * ny];
        for (i, p) in prepared.iter().enumerate() {
            let (x0, x1, y0, y1) = p.rect;
            for ty in y0 / size..=y1 / size {
                for tx in x0 / size..=x1 / size {
                    lists[ty * nx + tx].push(i);
                }
            }
        }
        Self { size, nx, lists }
    }

    /// Pixel bounds `(x0, x1, y0, y1)` (exclusive upper) of tile `t`.
    pub fn bounds(&self, t: usize, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (t % self.nx, t / self.nx);
        (
            tx * self.size,
            ((tx + 1) * self.size).min(width),
            ty * self.size,
            ((ty + 1) * self.size).min(height),
        )
    }
}

struct TileOutput {
    rgb: Vec<f64>,
    alpha: Vec<f64>,
    count: Vec<u32>,
}

/// Tiled front-to-back alpha compositing.
pub fn render(scene: &Scene, camera: &CameraPose, config: &RenderConfig) -> Result<RenderedFrame, RenderError> {
    let prepared = prepare(scene, camera, config)?;
    let (w, h) = (camera.width(), camera.height());
    let tiles = Tiles::bin(&prepared, w, h, config.tile_size);
    let bg = config.background_for(scene);

    let outputs: Vec<TileOutput> = (0..tiles.lists.len())
        .into_par_iter()
        .map(|t| {
            let (x0, x1, y0, y1) = tiles.bounds(t, w, h);
            let list = &tiles.lists[t];
            let n = (x1 - x0) * (y1 - y0);
            let mut out = TileOutput {
                rgb: Vec::with_capacity(3 * n),
                alpha: Vec::with_capacity(n),
                count: Vec::with_capacity(n),
            };
            for py in y0..y1 {
                for px in x0..x1 {
                    let (rgb, t_final, count) =
                        composite_pixel(&prepared, list, px as f64, py as f64, bg, config);
                    out.rgb.extend_from_slice(&rgb);
                    out.alpha.push(1.0 - t_final);
                    out.count.push(count);
                }
            }
            out
        })
        .collect();

    let mut frame = RenderedFrame {
        rgb: Image::new(w, h),
        alpha: vec![0.0; w * h],
        contributors: vec![0; w * h],
    };
    for (t, out) in outputs.iter().enumerate() {
        let (x0, x1, y0, y1) = tiles.bounds(t, w, h);
        let mut k = 0;
        for py in y0..y1 {
            for px in x0..x1 {
                frame
                    .rgb
                    .set_pixel(px, py, [out.rgb[3 * k], out.rgb[3 * k + 1], out.rgb[3 * k + 2]]);
                frame.alpha[py * w + px] = out.alpha[k];
                frame.contributors[py * w + px] = out.count[k];
                k += 1;
            }
        }
    }
    Ok(frame)
}

/// Returns clamped color, final transmittance and contributor count.
#[inline]
pub(crate) fn composite_pixel(
    prepared: &[Prepared],
    list: &[usize],
    px: f64,
    py: f64,
    bg: [f64; 3],
    config: &RenderConfig,
) -> ([f64; 3], f64, u32) {
    let mut c = [0.0; 3];
    let mut t = 1.0;
    let mut count = 0;
    for &i in list {
        let p = &prepared[i];
        let (g, _, _) = falloff(p, px, py);
        let alpha = (p.opacity * g).min(MAX_ALPHA);
        if alpha < config.alpha_cutoff {
            continue;
        }
        let next_t = t * (1.0 - alpha);
        if next_t < config.transmittance_floor {
            break;
        }
        let w = alpha * t;
        for ch in 0..3 {
            c[ch] += p.color[ch] * w;
        }
        t = next_t;
        count += 1;
    }
    let rgb = [0, 1, 2].map(|ch| (c[ch] + t * bg[ch]).clamp(0.0, 1.0));
    (rgb, t, count)
}
