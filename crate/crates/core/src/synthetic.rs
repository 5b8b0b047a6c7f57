//! Seeded synthetic scenes and camera rigs for tests, gradient checks and
//! desk-scale experiments.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::InitPoint;
use crate::pipeline::View;
use crate::raster::{render, RenderConfig};
use crate::scene::{sh, sh_len, CameraPose, GaussianSplat, Intrinsics, Scene};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Camera at the origin looking down +z with a symmetric pinhole.
pub fn front_camera(pose_id: &str, width: u32, height: u32, focal: f64) -> CameraPose {
    CameraPose::new(
        pose_id,
        [1.0, 0.0, 0.0, 0.0],
        [0.0; 3],
        Intrinsics::centered(focal, width, height),
    )
    .expect("valid synthetic camera")
}

/// Random anisotropic splats in front of [`front_camera`], all inside its
/// frustum, with colors kept well inside `[0, 1]`.
pub fn random_scene(rng: &mut impl Rng, splats: usize, sh_degree: usize, res: u32, focal: f64) -> Scene {
    let mut scene = Scene::new(sh_degree, [0.1, 0.2, 0.3]).expect("degree within range");
    let half = f64::from(res) * 0.45 / focal;
    for _ in 0..splats {
        let z = rng.random_range(2.0..4.0);
        let mean = [
            rng.random_range(-half..half) * z,
            rng.random_range(-half..half) * z,
            z,
        ];
        let mut coeffs = vec![0.0; sh_len(sh_degree)];
        for c in 0..3 {
            coeffs[c] = sh::rgb_to_dc(rng.random_range(0.2..0.8));
        }
        for v in coeffs.iter_mut().skip(3) {
            *v = rng.random_range(-0.1..0.1);
        }
        let s = GaussianSplat {
            mean,
            scale_raw: [0; 3].map(|_| rng.random_range(-2.6..-1.4)),
            rotation_raw: [0; 4].map(|_| rng.random_range(-1.0..1.0)),
            opacity_raw: rng.random_range(-2.0..1.2),
            sh: coeffs,
        };
        scene.push(s).expect("matching sh length");
    }
    scene
}

/// Cameras on a horizontal circle around `target`, slightly above it,
/// all looking at `target`.
pub fn ring_cameras(
    prefix: &str,
    count: usize,
    radius: f64,
    height: f64,
    target: Vector3<f64>,
    angle_offset: f64,
    intrinsics: Intrinsics,
) -> Vec<CameraPose> {
    (0..count)
        .map(|i| {
            let theta = angle_offset + std::f64::consts::TAU * i as f64 / count as f64;
            ring_camera(&format!("{prefix}{i:03}"), theta, radius, height, target, intrinsics)
        })
        .collect()
}

pub fn ring_camera(
    pose_id: &str,
    theta: f64,
    radius: f64,
    height: f64,
    target: Vector3<f64>,
    intrinsics: Intrinsics,
) -> CameraPose {
    let eye = target + Vector3::new(radius * theta.cos(), height, radius * theta.sin());
    CameraPose::look_at(pose_id, eye, target, Vector3::y(), intrinsics).expect("non-degenerate ring camera")
}

/// A colorful blob of isotropic-ish splats filling a ball around the origin.
pub fn blob_scene(rng: &mut impl Rng, splats: usize, radius: f64, sh_degree: usize) -> Scene {
    let mut scene = Scene::new(sh_degree, [0.0; 3]).expect("degree within range");
    while scene.len() < splats {
        let p = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if p.norm() > 1.0 {
            continue;
        }
        let p = p * radius;
        // Smoothly varying base color with per-splat jitter.
        let base = [
            0.5 + 0.4 * (2.1 * p.x + 0.3).sin(),
            0.5 + 0.4 * (1.7 * p.y - 0.8).cos(),
            0.5 + 0.4 * (2.5 * p.z + 1.1).sin(),
        ];
        let rgb = base.map(|c: f64| (c + rng.random_range(-0.15..0.15)).clamp(0.05, 0.95));
        let mut s = GaussianSplat::isotropic(
            p.into(),
            1.0,
            rng.random_range(0.55..0.95),
            rgb,
            sh_degree,
        );
        s.scale_raw = [0; 3].map(|_| (radius * rng.random_range(0.06..0.14)).ln());
        s.rotation_raw = [0; 4].map(|_| rng.random_range(-1.0..1.0));
        scene.push(s).expect("matching sh length");
    }
    scene
}

/// Shape of a [`sparse_view_scenario`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub splats: usize,
    pub resolution: u32,
    pub train_views: usize,
    pub held_out_views: usize,
    pub sh_degree: usize,
    /// Fraction of ground-truth means kept as initialization points.
    pub point_fraction: f64,
    /// Standard deviation of the positional noise added to those points.
    pub point_jitter: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            splats: 300,
            resolution: 64,
            train_views: 3,
            held_out_views: 8,
            sh_degree: 0,
            point_fraction: 0.5,
            point_jitter: 0.05,
        }
    }
}

/// A ground-truth blob seen from a ring of cameras: a few training views,
/// interleaved held-out views and a noisy partial point cloud standing in
/// for structure-from-motion output.
#[derive(Clone, Debug)]
pub struct SparseViewScenario {
    pub gt: Scene,
    pub train: Vec<View>,
    pub held_out: Vec<View>,
    pub points: Vec<InitPoint>,
}

pub const SCENARIO_CAMERA_RADIUS: f64 = 3.2;
pub const SCENARIO_CAMERA_HEIGHT: f64 = 0.8;

pub fn sparse_view_scenario(seed: u64, config: &ScenarioConfig) -> SparseViewScenario {
    let mut r = rng(seed);
    let mut gt = blob_scene(&mut r, config.splats, 1.0, config.sh_degree);
    gt.background = [0.08, 0.08, 0.1];
    let res = config.resolution;
    let k = Intrinsics::centered(1.15 * f64::from(res), res, res);
    let render_cfg = RenderConfig::default();
    let view = |pose: CameraPose| View {
        image: render(&gt, &pose, &render_cfg).expect("ground truth renders").rgb,
        pose,
    };
    let train_step = std::f64::consts::TAU / config.train_views as f64;
    let train: Vec<View> = (0..config.train_views)
        .map(|i| {
            let theta = 0.3 + train_step * i as f64;
            view(ring_camera(&format!("train{i:02}"), theta, SCENARIO_CAMERA_RADIUS, SCENARIO_CAMERA_HEIGHT, Vector3::zeros(), k))
        })
        .collect();
    let held_step = std::f64::consts::TAU / config.held_out_views.max(1) as f64;
    let held_out: Vec<View> = (0..config.held_out_views)
        .map(|j| {
            let theta = 0.3 + held_step * (j as f64 + 0.5);
            let height = SCENARIO_CAMERA_HEIGHT * (1.0 + 0.25 * (j as f64 * 1.3).sin());
            view(ring_camera(&format!("held{j:02}"), theta, SCENARIO_CAMERA_RADIUS, height, Vector3::zeros(), k))
        })
        .collect();
    let noise = rand_distr::Normal::new(0.0, config.point_jitter.max(0.0)).expect("finite jitter");
    let mut points = Vec::new();
    for s in &gt.splats {
        if !r.random_bool(config.point_fraction.clamp(0.0, 1.0)) {
            continue;
        }
        points.push(InitPoint {
            position: s.mean.map(|m| m + rand_distr::Distribution::sample(&noise, &mut r)),
            rgb: [0, 1, 2].map(|c| sh::dc_to_rgb(s.sh[c]).clamp(0.0, 1.0)),
        });
    }
    SparseViewScenario { gt, train, held_out, points }
}
