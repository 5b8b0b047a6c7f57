use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PipelineError, View};
use crate::bench::{FrameMetrics, MetricsReport};
use crate::image::Image;
use crate::optim::{
    densify_and_prune, optimize_step, total_loss, AdamState, DensifyStats, ImagePair, LossWeights, TrainConfig,
};
use crate::raster::{render, render_backward, RenderConfig};
use crate::scene::{CameraPose, Scene};

/// Loss trajectory and maintenance events of one optimization run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Total loss per iteration.
    pub losses: Vec<f64>,
    /// Reconstruction term per iteration.
    pub recon: Vec<f64>,
    /// `(iteration, cloned, split, pruned)` per densification pass.
    pub densify: Vec<(usize, usize, usize, usize)>,
    pub final_splats: usize,
}

/// Optimize `scene` for `config.iterations` steps. Each step draws one
/// reference view and, when generative views exist, one generative view;
/// the generative term enters with the annealed weight λ(iter).
pub fn train_scene(
    scene: &mut Scene,
    reference: &[View],
    generative: &[View],
    config: &TrainConfig,
    weights: &LossWeights,
    render_config: &RenderConfig,
    rng: &mut impl Rng,
) -> Result<TrainLog, PipelineError> {
    config.validate()?;
    weights.validate()?;
    if reference.is_empty() {
        return Err(PipelineError::Job("training needs at least one reference view".into()));
    }
    let mut log = TrainLog::default();
    let mut state = AdamState::new(scene);
    let mut stats = DensifyStats::new(scene.len());
    for iter in 0..config.iterations {
        let rv = &reference[rng.random_range(0..reference.len())];
        let gv = (!generative.is_empty()).then(|| &generative[rng.random_range(0..generative.len())]);

        let r_img = render(scene, &rv.pose, render_config)?.rgb;
        let g_img = gv.map(|v| render(scene, &v.pose, render_config)).transpose()?.map(|f| f.rgb);
        let ref_pairs = [ImagePair { render: &r_img, target: &rv.image }];
        let gen_pairs: Vec<ImagePair<'_>> = match (gv, &g_img) {
            (Some(v), Some(img)) => vec![ImagePair { render: img, target: &v.image }],
            _ => Vec::new(),
        };
        let loss = total_loss(&ref_pairs, &gen_pairs, iter, weights)?;

        let mut grads = render_backward(scene, &rv.pose, render_config, &loss.ref_grads[0])?;
        if let Some(v) = gv {
            if loss.gen_scale > 0.0 {
                let g = render_backward(scene, &v.pose, render_config, &loss.gen_grads[0])?;
                grads.add_scaled(&g, 1.0);
            }
        }
        stats.accumulate(&grads);
        optimize_step(scene, &grads, &mut state, config)?;
        log.losses.push(loss.value);
        log.recon.push(loss.recon);

        let done = iter + 1;
        if config.densify_interval > 0 && done % config.densify_interval == 0 && done < config.iterations {
            let outcome = densify_and_prune(scene, &stats.average(), config, rng);
            state.remap(&outcome.origins);
            log.densify.push((iter, outcome.cloned, outcome.split, outcome.pruned));
            *scene = outcome.scene;
            stats = DensifyStats::new(scene.len());
        }
    }
    log.final_splats = scene.len();
    Ok(log)
}

/// Render every pose, in order.
pub fn render_views(scene: &Scene, poses: &[CameraPose], config: &RenderConfig) -> Result<Vec<Image>, PipelineError> {
    poses
        .par_iter()
        .map(|p| Ok(render(scene, p, config)?.rgb))
        .collect()
}

/// PSNR/SSIM of the scene's renders against each view's image.
pub fn evaluate_views(
    scene_id: &str,
    scene: &Scene,
    views: &[View],
    config: &RenderConfig,
) -> Result<MetricsReport, PipelineError> {
    let poses: Vec<CameraPose> = views.iter().map(|v| v.pose.clone()).collect();
    let renders = render_views(scene, &poses, config)?;
    let frames = renders
        .iter()
        .zip(views)
        .map(|(img, v)| FrameMetrics::compute(v.pose.pose_id.clone(), img, &v.image))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport::from_frames(scene_id, frames))
}
