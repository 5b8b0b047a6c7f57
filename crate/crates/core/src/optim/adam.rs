use super::{OptimError, TrainConfig};
use crate::raster::{GradientBuffer, ParamGroup};
use crate::scene::Scene;

pub const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
pub const ADAM_EPS: f64 = 1e-15;

/// First and second moment estimates for every raw parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    first: [Vec<f64>; 5],
    second: [Vec<f64>; 5],
    sh_len: usize,
}

fn slot(group: ParamGroup) -> usize {
    ParamGroup::ALL.iter().position(|g| *g == group).expect("known group")
}

impl AdamState {
    pub fn new(scene: &Scene) -> Self {
        let sh_len = scene.sh_len();
        let make = || ParamGroup::ALL.map(|g| vec![0.0; g.stride(sh_len) * scene.len()]);
        Self {
            step: 0,
            first: make(),
            second: make(),
            sh_len,
        }
    }

    pub fn splats(&self) -> usize {
        self.first[slot(ParamGroup::Opacity)].len()
    }

    pub fn first_moment(&self, group: ParamGroup) -> &[f64] {
        &self.first[slot(group)]
    }

    pub fn second_moment(&self, group: ParamGroup) -> &[f64] {
        &self.second[slot(group)]
    }

    /// Rebuild per-splat state after densification: `origins[i] = Some(j)`
    /// carries over the moments of old splat `j`, `None` starts fresh.
    pub fn remap(&mut self, origins: &[Option<usize>]) {
        for group in ParamGroup::ALL {
            let stride = group.stride(self.sh_len);
            let s = slot(group);
            for moments in [&mut self.first[s], &mut self.second[s]] {
                let mut next = vec![0.0; stride * origins.len()];
                for (i, o) in origins.iter().enumerate() {
                    if let Some(j) = o {
                        next[stride * i..stride * (i + 1)].copy_from_slice(&moments[stride * j..stride * (j + 1)]);
                    }
                }
                *moments = next;
            }
        }
    }
}

fn learning_rate(config: &TrainConfig, group: ParamGroup) -> f64 {
    let lr = &config.learning_rates;
    match group {
        ParamGroup::Mean => lr.mean,
        ParamGroup::Scale => lr.scale,
        ParamGroup::Rotation => lr.rotation,
        ParamGroup::Opacity => lr.opacity,
        ParamGroup::Sh => lr.sh,
    }
}

/// One bias-corrected adaptive-moment step over all raw parameters.
///
/// Moments decay for every splat, but parameters move only for splats that
/// received a non-zero gradient this step; splats outside the view stay put.
/// Rotation quaternions are renormalized afterwards.
pub fn optimize_step(
    scene: &mut Scene,
    grads: &GradientBuffer,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<(), OptimError> {
    if grads.len() != scene.len() || state.splats() != scene.len() || grads.sh_len != scene.sh_len() {
        return Err(OptimError::Config(format!(
            "optimizer state ({} splats) and gradients ({}) do not match the scene ({})",
            state.splats(),
            grads.len(),
            scene.len()
        )));
    }
    let (b1, b2) = ADAM_BETAS;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let sh_len = scene.sh_len();

    let touched: Vec<bool> = (0..scene.len())
        .map(|i| {
            ParamGroup::ALL.iter().any(|&g| {
                let s = g.stride(sh_len);
                grads.group(g)[s * i..s * (i + 1)].iter().any(|&v| v != 0.0)
            })
        })
        .collect();

    for group in ParamGroup::ALL {
        let stride = group.stride(sh_len);
        let lr = learning_rate(config, group);
        let g = grads.group(group);
        let s = slot(group);
        let (m, v) = (&mut state.first[s], &mut state.second[s]);
        for (i, splat) in scene.splats.iter_mut().enumerate() {
            let params = group.slice_mut(splat);
            for k in 0..stride {
                let idx = stride * i + k;
                m[idx] = b1 * m[idx] + (1.0 - b1) * g[idx];
                v[idx] = b2 * v[idx] + (1.0 - b2) * g[idx] * g[idx];
                if touched[i] {
                    let m_hat = m[idx] / c1;
                    let v_hat = v[idx] / c2;
                    params[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }

    for splat in &mut scene.splats {
        let q = &mut splat.rotation_raw;
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            q.iter_mut().for_each(|v| *v /= n);
        } else {
            *q = [1.0, 0.0, 0.0, 0.0];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::GaussianSplat;
    use crate::synthetic::{random_scene, rng};

    fn tiny_scene() -> Scene {
        let s = GaussianSplat::isotropic([0.0, 0.0, 2.0], 0.1, 0.5, [0.3, 0.5, 0.7], 0);
        Scene::with_splats(0, [0.0; 3], vec![s]).unwrap()
    }

    #[test]
    fn zero_gradients_leave_parameters_and_decay_moments() {
        let mut scene = tiny_scene();
        let mut state = AdamState::new(&scene);
        let cfg = TrainConfig::default();
        let mut g = GradientBuffer::for_scene(&scene);
        g.opacity_raw[0] = 1.0;
        optimize_step(&mut scene, &g, &mut state, &cfg).unwrap();
        let before = scene.clone();
        let m_before = state.first_moment(ParamGroup::Opacity)[0];
        let zero = GradientBuffer::for_scene(&scene);
        optimize_step(&mut scene, &zero, &mut state, &cfg).unwrap();
        assert_eq!(scene, before);
        assert!((state.first_moment(ParamGroup::Opacity)[0] - 0.9 * m_before).abs() < 1e-15);
    }

    /// Independent scalar simulation of the update rule.
    #[test]
    fn constant_gradient_steps_approach_learning_rate() {
        let mut scene = tiny_scene();
        let mut state = AdamState::new(&scene);
        let mut cfg = TrainConfig::default();
        cfg.learning_rates.opacity = 0.01;
        let mut g = GradientBuffer::for_scene(&scene);
        g.opacity_raw[0] = 0.37;
        let (mut x, mut m, mut v) = (scene.splats[0].opacity_raw, 0.0f64, 0.0f64);
        let mut last_step = 0.0;
        for t in 1..=200 {
            let before = scene.splats[0].opacity_raw;
            optimize_step(&mut scene, &g, &mut state, &cfg).unwrap();
            last_step = before - scene.splats[0].opacity_raw;
            m = 0.9 * m + 0.1 * 0.37;
            v = 0.999 * v + 0.001 * 0.37 * 0.37;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.01 * mh / (vh.sqrt() + 1e-15);
            assert!((x - scene.splats[0].opacity_raw).abs() < 1e-12);
        }
        assert!((last_step - 0.01).abs() < 1e-9);
    }

    #[test]
    fn step_preserves_scene_invariants() {
        let mut r = rng(1);
        let mut scene = random_scene(&mut r, 10, 1, 16, 20.0);
        let mut state = AdamState::new(&scene);
        let mut g = GradientBuffer::for_scene(&scene);
        for group in ParamGroup::ALL {
            for (k, v) in g.group_mut(group).iter_mut().enumerate() {
                *v = ((k * 7919) % 13) as f64 - 6.0;
            }
        }
        for _ in 0..5 {
            optimize_step(&mut scene, &g, &mut state, &TrainConfig::default()).unwrap();
        }
        for s in &scene.splats {
            let n: f64 = s.rotation_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
            assert!(s.scale().iter().all(|&v| v > 0.0));
            assert!(s.opacity() > 0.0 && s.opacity() < 1.0);
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut scene = tiny_scene();
        let mut state = AdamState::new(&Scene::new(0, [0.0; 3]).unwrap());
        let g = GradientBuffer::for_scene(&scene);
        assert!(optimize_step(&mut scene, &g, &mut state, &TrainConfig::default()).is_err());
    }
}
