use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::TrainConfig;
use crate::raster::GradientBuffer;
use crate::scene::{rotation_matrix, Scene};

/// Scale divisor applied to both halves of a split splat.
pub const SPLIT_SCALE_DIVISOR: f64 = 1.6;

/// Running average of each splat's pixel-space positional gradient norm.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DensifyStats {
    pub grad_sum: Vec<f64>,
    pub count: Vec<u32>,
}

impl DensifyStats {
    pub fn new(splats: usize) -> Self {
        Self {
            grad_sum: vec![0.0; splats],
            count: vec![0; splats],
        }
    }

    /// Accumulate one view's gradients; splats with a zero gradient were not
    /// visible and are not counted.
    pub fn accumulate(&mut self, grads: &GradientBuffer) {
        for i in 0..self.grad_sum.len().min(grads.len()) {
            let (gx, gy) = (grads.mean2d[2 * i], grads.mean2d[2 * i + 1]);
            let n = (gx * gx + gy * gy).sqrt();
            if n > 0.0 {
                self.grad_sum[i] += n;
                self.count[i] += 1;
            }
        }
    }

    pub fn average(&self) -> Vec<f64> {
        self.grad_sum
            .iter()
            .zip(&self.count)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / f64::from(c) })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensifyOutcome {
    pub scene: Scene,
    /// For each output splat, the input splat whose optimizer state it keeps.
    pub origins: Vec<Option<usize>>,
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
}

/// Clone small high-gradient splats, split large ones into two samples with
/// scale / 1.6, then prune splats whose opacity is below the threshold.
/// The result never exceeds `config.max_splats`.
pub fn densify_and_prune(
    scene: &Scene,
    avg_grad: &[f64],
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> DensifyOutcome {
    let mut out = scene.clone();
    out.splats.clear();
    let mut origins = Vec::with_capacity(scene.len());
    let mut extra = Vec::new();
    let (mut cloned, mut split) = (0, 0);
    let mut budget = config.max_splats.saturating_sub(scene.len());

    for (i, splat) in scene.splats.iter().enumerate() {
        let hot = avg_grad.get(i).copied().unwrap_or(0.0) >= config.densify_grad_threshold;
        if !hot || budget == 0 {
            out.splats.push(splat.clone());
            origins.push(Some(i));
            continue;
        }
        budget -= 1;
        let scale = splat.scale();
        if scale.iter().copied().fold(0.0, f64::max) > config.split_scale_threshold {
            split += 1;
            let r = splat
                .rotation()
                .map(|q| rotation_matrix([q.w, q.i, q.j, q.k]))
                .unwrap_or_else(|_| nalgebra::Matrix3::identity());
            let mut halves = [splat.clone(), splat.clone()];
            for half in &mut halves {
                let z = Vector3::from([0; 3].map(|k| scale[k] * rng.sample::<f64, _>(StandardNormal)));
                let mean = splat.mean_vec() + r * z;
                half.mean = mean.into();
                half.scale_raw = splat.scale_raw.map(|v| v - SPLIT_SCALE_DIVISOR.ln());
            }
            let [a, b] = halves;
            out.splats.push(a);
            origins.push(None);
            extra.push(b);
        } else {
            cloned += 1;
            out.splats.push(splat.clone());
            origins.push(Some(i));
            extra.push(splat.clone());
        }
    }
    origins.extend(std::iter::repeat_n(None, extra.len()));
    out.splats.extend(extra);

    let before = out.len();
    let mut kept_origins = Vec::with_capacity(before);
    let mut kept = Vec::with_capacity(before);
    for (s, o) in out.splats.drain(..).zip(origins) {
        if s.opacity() >= config.prune_opacity_threshold {
            kept.push(s);
            kept_origins.push(o);
        }
    }
    out.splats = kept;
    DensifyOutcome {
        pruned: before - out.len(),
        scene: out,
        origins: kept_origins,
        cloned,
        split,
    }
}
