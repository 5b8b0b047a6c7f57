use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use gsfix_core::io::{read_file, save_ply};
use gsfix_core::optim::{LossWeights, TrainConfig};
use gsfix_core::pipeline::{run_iterative_recon, GenSetPolicy, ReconJob, TrajectorySpec};
use gsfix_core::raster::RenderConfig;
use gsfix_core::restore::{RestorerSpec, DEFAULT_POLL_INTERVAL, DEFAULT_TIMEOUT};
use serde::Deserialize;
use serde_json::json;

use crate::error::CliError;
use crate::inputs::{load_points, load_views, parent_dir, resolve};
use crate::render::display;

#[derive(Args, Debug)]
pub struct FixArgs {
    /// Job configuration JSON; relative paths inside it resolve against its directory.
    #[arg(long)]
    pub job: PathBuf,
    /// Overrides the seed in the job file.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn default_scene_id() -> String {
    "scene".into()
}

fn default_restorer() -> String {
    "identity".into()
}

fn default_rounds() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixConfig {
    #[serde(default = "default_scene_id")]
    pub scene_id: String,
    pub cameras: PathBuf,
    pub points: PathBuf,
    #[serde(default)]
    pub images: Option<PathBuf>,
    /// Held-out cameras with images, used for per-round metrics.
    #[serde(default)]
    pub eval_cameras: Option<PathBuf>,
    pub out: PathBuf,
    /// `identity`, `oracle:DIR`, `blend:BETA:DIR` or `remote:DIR`.
    #[serde(default = "default_restorer")]
    pub restorer: String,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub baseline: TrainConfig,
    #[serde(default)]
    pub refine: TrainConfig,
    #[serde(default)]
    pub loss: LossWeights,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub sh_degree: usize,
    #[serde(default)]
    pub background: [f64; 3],
    #[serde(default)]
    pub gen_policy: GenSetPolicy,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub poll_interval_secs: Option<f64>,
    #[serde(default)]
    pub timeout_secs: Option<f64>,
}

fn duration(secs: Option<f64>, default: Duration) -> Result<Duration, CliError> {
    match secs {
        None => Ok(default),
        Some(s) => Duration::try_from_secs_f64(s).map_err(|e| CliError::Input(format!("duration {s}: {e}"))),
    }
}

pub fn load_config(path: &Path) -> Result<FixConfig, CliError> {
    Ok(serde_json::from_slice(&read_file(path)?)?)
}

pub fn run(args: FixArgs) -> Result<serde_json::Value, CliError> {
    let cfg = load_config(&args.job)?;
    let base = parent_dir(&args.job);
    let spec: RestorerSpec = cfg.restorer.parse()?;
    let restorer = spec.build(
        &base,
        duration(cfg.poll_interval_secs, DEFAULT_POLL_INTERVAL)?,
        duration(cfg.timeout_secs, DEFAULT_TIMEOUT)?,
    )?;

    let images = cfg.images.as_ref().map(|p| resolve(&base, p));
    let views = load_views(&resolve(&base, &cfg.cameras), images.as_deref())?;
    let points = load_points(&resolve(&base, &cfg.points))?;
    let out = resolve(&base, &cfg.out);
    let mut job = ReconJob::new(cfg.scene_id, views, points);
    if let Some(eval) = &cfg.eval_cameras {
        job.eval_views = load_views(&resolve(&base, eval), None)?;
    }
    job.rounds = cfg.rounds;
    job.trajectory = cfg.trajectory;
    job.baseline = cfg.baseline;
    job.refine = cfg.refine;
    job.loss = cfg.loss;
    job.render = cfg.render;
    job.sh_degree = cfg.sh_degree;
    job.background = cfg.background;
    job.gen_policy = cfg.gen_policy;
    job.seed = args.seed.or(cfg.seed).unwrap_or(0);
    job.output_dir = Some(out.clone());

    let outcome = run_iterative_recon(&job, restorer.as_ref())?;
    let scene_path = out.join("scene.ply");
    save_ply(&scene_path, &outcome.scene)?;
    let rounds: Vec<_> = outcome
        .rounds
        .iter()
        .map(|r| json!({ "round": r.round, "mean_psnr": r.metrics.mean_psnr, "mean_ssim": r.metrics.mean_ssim }))
        .collect();
    Ok(json!({
        "scene": display(&scene_path),
        "splats": outcome.scene.len(),
        "restorer": restorer.name(),
        "baseline": { "mean_psnr": outcome.baseline_metrics.mean_psnr, "mean_ssim": outcome.baseline_metrics.mean_ssim },
        "rounds": rounds,
        "failure": outcome.failure.as_ref().map(|f| json!({ "round": f.round, "message": f.message })),
    }))
}
