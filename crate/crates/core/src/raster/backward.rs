use nalgebra::{Matrix2, Matrix3, Vector3};
use rayon::prelude::*;

use super::{falloff, prepare, GradientBuffer, Prepared, RenderConfig, RenderError, Tiles, MAX_ALPHA};
use crate::image::Image;
use crate::scene::{self, covariance_backward_for, sh, CameraPose, Scene};

/// Screen-space gradient of one prepared splat:
/// `[d mean2d x, d mean2d y, d conic a, b, c, d opacity, d color rgb]`.
type ScreenGrad = [f64; 9];

struct Contribution {
    slot: usize,
    alpha: f64,
    g: f64,
    dx: f64,
    dy: f64,
    t: f64,
    clamped: bool,
}

/// Gradient of `Σ upstream ⊙ rgb` with respect to every raw splat parameter.
///
/// The forward pass is recomputed per tile; per-tile partial gradients are
/// reduced in tile order so the result is deterministic.
pub fn render_backward(
    scene: &Scene,
    camera: &CameraPose,
    config: &RenderConfig,
    upstream: &Image,
) -> Result<GradientBuffer, RenderError> {
    let (w, h) = (camera.width(), camera.height());
    if upstream.width != w || upstream.height != h || upstream.data.len() != 3 * w * h {
        return Err(RenderError::Shape {
            expected: (w, h),
            actual: (upstream.width, upstream.height),
        });
    }
    let mut grads = GradientBuffer::for_scene(scene);
    if upstream.data.iter().all(|&v| v == 0.0) {
        scene.validate()?;
        return Ok(grads);
    }
    let prepared = prepare(scene, camera, config)?;
    let tiles = Tiles::bin(&prepared, w, h, config.tile_size);
    let bg = config.background_for(scene);

    let partials: Vec<Vec<ScreenGrad>> = (0..tiles.lists.len())
        .into_par_iter()
        .map(|t| tile_backward(&prepared, &tiles, t, w, h, bg, config, upstream))
        .collect();

    let mut screen = vec![[0.0; 9]; prepared.len()];
    for (t, partial) in partials.iter().enumerate() {
        for (slot, g) in tiles.lists[t].iter().zip(partial) {
            for k in 0..9 {
                screen[*slot][k] += g[k];
            }
        }
    }

    let rot = camera.rotation_matrix();
    let per_splat: Vec<SplatGrad> = prepared
        .par_iter()
        .zip(&screen)
        .map(|(p, sg)| splat_backward(scene, camera, &rot, p, sg))
        .collect();

    let sh_len = scene.sh_len();
    for (p, g) in prepared.iter().zip(per_splat) {
        let i = p.index;
        grads.mean[3 * i..3 * i + 3].copy_from_slice(&g.mean);
        grads.scale_raw[3 * i..3 * i + 3].copy_from_slice(&g.scale);
        grads.rotation_raw[4 * i..4 * i + 4].copy_from_slice(&g.rotation);
        grads.opacity_raw[i] = g.opacity;
        grads.sh[sh_len * i..sh_len * (i + 1)].copy_from_slice(&g.sh);
        grads.mean2d[2 * i..2 * i + 2].copy_from_slice(&g.mean2d);
    }
    Ok(grads)
}

#[allow(clippy::too_many_arguments)]
fn tile_backward(
    prepared: &[Prepared],
    tiles: &Tiles,
    t: usize,
    w: usize,
    h: usize,
    bg: [f64; 3],
    config: &RenderConfig,
    upstream: &Image,
) -> Vec<ScreenGrad> {
    let list = &tiles.lists[t];
    let mut out = vec![[0.0; 9]; list.len()];
    if list.is_empty() {
        return out;
    }
    let (x0, x1, y0, y1) = tiles.bounds(t, w, h);
    let mut contribs: Vec<Contribution> = Vec::new();
    for py in y0..y1 {
        for px in x0..x1 {
            let up = upstream.pixel(px, py);
            if up == [0.0; 3] {
                continue;
            }
            let (fx, fy) = (px as f64, py as f64);
            contribs.clear();
            let mut color = [0.0; 3];
            let mut trans = 1.0;
            for (slot, &i) in list.iter().enumerate() {
                let p = &prepared[i];
                let (g, dx, dy) = falloff(p, fx, fy);
                let raw = p.opacity * g;
                let alpha = raw.min(MAX_ALPHA);
                if alpha < config.alpha_cutoff {
                    continue;
                }
                let next = trans * (1.0 - alpha);
                if next < config.transmittance_floor {
                    break;
                }
                for ch in 0..3 {
                    color[ch] += p.color[ch] * alpha * trans;
                }
                contribs.push(Contribution {
                    slot,
                    alpha,
                    g,
                    dx,
                    dy,
                    t: trans,
                    clamped: raw > MAX_ALPHA,
                });
                trans = next;
            }
            // The output is clamped to [0, 1]; saturated channels pass no gradient.
            let mut gpix = up;
            for ch in 0..3 {
                let v = color[ch] + trans * bg[ch];
                if !(0.0..=1.0).contains(&v) {
                    gpix[ch] = 0.0;
                }
            }
            let mut behind = [0, 1, 2].map(|ch| trans * bg[ch]);
            for c in contribs.iter().rev() {
                let p = &prepared[list[c.slot]];
                let weight = c.alpha * c.t;
                let acc = &mut out[c.slot];
                let mut d_alpha = 0.0;
                for ch in 0..3 {
                    acc[6 + ch] += gpix[ch] * weight;
                    d_alpha += gpix[ch] * (p.color[ch] * c.t - behind[ch] / (1.0 - c.alpha));
                    behind[ch] += p.color[ch] * weight;
                }
                if c.clamped {
                    continue;
                }
                acc[5] += d_alpha * c.g;
                let d_power = d_alpha * p.opacity * c.g;
                let [a, b, cc] = p.conic;
                acc[0] += d_power * (a * c.dx + b * c.dy);
                acc[1] += d_power * (b * c.dx + cc * c.dy);
                acc[2] += -0.5 * c.dx * c.dx * d_power;
                acc[3] += -c.dx * c.dy * d_power;
                acc[4] += -0.5 * c.dy * c.dy * d_power;
            }
        }
    }
    out
}

struct SplatGrad {
    mean: [f64; 3],
    scale: [f64; 3],
    rotation: [f64; 4],
    opacity: f64,
    sh: Vec<f64>,
    mean2d: [f64; 2],
}

fn splat_backward(
    scene: &Scene,
    camera: &CameraPose,
    rot: &Matrix3<f64>,
    p: &Prepared,
    sg: &ScreenGrad,
) -> SplatGrad {
    let splat = &scene.splats[p.index];
    let k = &camera.intrinsics;
    let degree = scene.sh_degree;
    let n_basis = scene::sh_basis_len(degree);

    // Color through SH.
    let dir_norm = p.view.norm();
    let dir = p.view / dir_norm;
    let basis = sh::basis(degree, dir.into());
    let d_color = [sg[6], sg[7], sg[8]];
    let mut d_sh = vec![0.0; 3 * n_basis];
    for kk in 0..n_basis {
        for ch in 0..3 {
            d_sh[3 * kk + ch] = d_color[ch] * basis[kk];
        }
    }
    let mut d_mean = Vector3::zeros();
    if degree > 0 {
        let bgrad = sh::basis_grad(degree, dir.into());
        let mut d_dir = Vector3::zeros();
        for kk in 1..n_basis {
            let s: f64 = (0..3).map(|ch| d_color[ch] * splat.sh[3 * kk + ch]).sum();
            d_dir += Vector3::from(bgrad[kk]) * s;
        }
        d_mean += (d_dir - dir * dir.dot(&d_dir)) / dir_norm;
    }

    // Conic (inverse of cov2d) to cov2d.
    let [a, b, c] = p.conic;
    let conic = Matrix2::new(a, b, b, c);
    let d_conic = Matrix2::new(sg[2], 0.5 * sg[3], 0.5 * sg[3], sg[4]);
    let d_cov2d = -(conic * d_conic * conic);

    // cov2d = T Σ Tᵀ with T = J W.
    let t = p.cam;
    let jac = scene::camera_jacobian(k, &t);
    let tm = jac * rot;
    let sigma = scene::build_covariance(splat.scale_raw, splat.rotation_raw)
        .expect("validated during prepare");
    let d_sigma = tm.transpose() * d_cov2d * tm;
    let d_t = (d_cov2d + d_cov2d.transpose()) * tm * sigma;
    let d_j = d_t * rot.transpose();

    let (iz, fx, fy) = (1.0 / t.z, k.fx, k.fy);
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    let mut d_cam = Vector3::new(
        sg[0] * fx * iz - d_j[(0, 2)] * fx * iz2,
        sg[1] * fy * iz - d_j[(1, 2)] * fy * iz2,
        0.0,
    );
    d_cam.z = -sg[0] * fx * t.x * iz2 - sg[1] * fy * t.y * iz2 - d_j[(0, 0)] * fx * iz2
        + d_j[(0, 2)] * 2.0 * fx * t.x * iz3
        - d_j[(1, 1)] * fy * iz2
        + d_j[(1, 2)] * 2.0 * fy * t.y * iz3;
    d_mean += rot.transpose() * d_cam;

    let (d_scale, d_rot) = covariance_backward_for(splat, &d_sigma);
    let s = p.opacity;
    SplatGrad {
        mean: d_mean.into(),
        scale: d_scale,
        rotation: d_rot,
        opacity: sg[5] * s * (1.0 - s),
        sh: d_sh,
        mean2d: [sg[0], sg[1]],
    }
}
