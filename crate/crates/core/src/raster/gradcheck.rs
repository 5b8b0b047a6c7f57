//! Central finite-difference check of [`render_backward`](super::render_backward).

use rand::Rng;

use super::{render, render_backward, GradientBuffer, ParamGroup, RenderConfig, RenderError};
use crate::image::Image;
use crate::scene::{CameraPose, Scene};

#[derive(Clone, Debug, PartialEq)]
pub struct GroupError {
    pub group: ParamGroup,
    pub max_rel_error: f64,
    pub max_abs_gradient: f64,
    pub checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

/// Smallest denominator, as a fraction of the group's largest gradient, used
/// when forming relative errors. Entries far below the group's scale are
/// compared against that scale instead of against themselves.
pub const RELATIVE_FLOOR: f64 = 1e-2;

/// Render configuration without the α-cutoff and early-termination
/// discontinuities, where finite differences are meaningful.
pub fn smooth_config() -> RenderConfig {
    RenderConfig {
        alpha_cutoff: 1e-10,
        transmittance_floor: 1e-12,
        ..RenderConfig::default()
    }
}

/// Central-difference step used by [`seeded_check`].
pub const DEFAULT_STEP: f64 = 1e-4;

/// Gradient check on a seeded random scene of `splats` splats seen by a
/// `res × res` camera, against a seeded random upstream image.
pub fn seeded_check(seed: u64, splats: usize, res: u32, sh_degree: usize) -> Result<GradCheckReport, RenderError> {
    let mut rng = crate::synthetic::rng(seed);
    let focal = f64::from(res) * 1.2;
    let scene = crate::synthetic::random_scene(&mut rng, splats, sh_degree, res, focal);
    let camera = crate::synthetic::front_camera("gradcheck", res, res, focal);
    let upstream = random_upstream(&mut rng, res as usize, res as usize);
    check_gradients(&scene, &camera, &smooth_config(), &upstream, DEFAULT_STEP)
}

pub fn random_upstream(rng: &mut impl Rng, width: usize, height: usize) -> Image {
    Image {
        width,
        height,
        data: (0..3 * width * height).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

fn weighted_sum(scene: &Scene, camera: &CameraPose, config: &RenderConfig, upstream: &Image) -> Result<f64, RenderError> {
    let frame = render(scene, camera, config)?;
    Ok(frame.rgb.data.iter().zip(&upstream.data).map(|(a, b)| a * b).sum())
}

/// Compare the analytic gradient of `Σ upstream ⊙ render` with central
/// differences of step `h` on every raw parameter.
pub fn check_gradients(
    scene: &Scene,
    camera: &CameraPose,
    config: &RenderConfig,
    upstream: &Image,
    h: f64,
) -> Result<GradCheckReport, RenderError> {
    let analytic = render_backward(scene, camera, config, upstream)?;
    let numeric = numeric_gradients(scene, camera, config, upstream, h)?;
    let groups = ParamGroup::ALL
        .iter()
        .map(|&group| {
            let a = analytic.group(group);
            let n = numeric.group(group);
            let scale = n.iter().chain(a).fold(0.0f64, |m, v| m.max(v.abs()));
            let floor = (RELATIVE_FLOOR * scale).max(1e-12);
            let max_rel_error = a
                .iter()
                .zip(n)
                .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
                .fold(0.0, f64::max);
            GroupError {
                group,
                max_rel_error,
                max_abs_gradient: scale,
                checked: a.len(),
            }
        })
        .collect();
    Ok(GradCheckReport { groups })
}

/// Central-difference gradient of `Σ upstream ⊙ render` using only the
/// forward renderer.
pub fn numeric_gradients(
    scene: &Scene,
    camera: &CameraPose,
    config: &RenderConfig,
    upstream: &Image,
    h: f64,
) -> Result<GradientBuffer, RenderError> {
    let mut out = GradientBuffer::for_scene(scene);
    let mut work = scene.clone();
    for group in ParamGroup::ALL {
        let stride = group.stride(scene.sh_len());
        for i in 0..scene.len() {
            for k in 0..stride {
                let orig = group.slice(&scene.splats[i])[k];
                group.slice_mut(&mut work.splats[i])[k] = orig + h;
                let plus = weighted_sum(&work, camera, config, upstream)?;
                group.slice_mut(&mut work.splats[i])[k] = orig - h;
                let minus = weighted_sum(&work, camera, config, upstream)?;
                group.slice_mut(&mut work.splats[i])[k] = orig;
                out.group_mut(group)[stride * i + k] = (plus - minus) / (2.0 * h);
            }
        }
    }
    Ok(out)
}
