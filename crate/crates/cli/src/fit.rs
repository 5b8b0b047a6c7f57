use std::path::PathBuf;

use clap::Args;
use gsfix_core::io::{read_file, save_ply};
use gsfix_core::optim::TrainConfig;
use gsfix_core::pipeline::{fit_baseline, ReconJob};
use serde_json::json;

use crate::error::CliError;
use crate::inputs::{load_points, load_views, parse_background};
use crate::render::display;

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Cameras JSON of the input views.
    #[arg(long)]
    pub cameras: PathBuf,
    /// COLMAP points3D.txt or a PLY scene whose means seed the fit.
    #[arg(long)]
    pub points: PathBuf,
    /// Directory holding the input frames; defaults to the paths in the cameras file.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Output scene PLY.
    #[arg(long)]
    pub out: PathBuf,
    /// Optimization iterations; overrides the training config.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Full training configuration JSON.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub sh_degree: usize,
    /// Background color `r,g,b` in [0, 1].
    #[arg(long, value_parser = parse_background, default_value = "0,0,0")]
    pub background: [f64; 3],
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: FitArgs) -> Result<serde_json::Value, CliError> {
    let mut train = match &args.train_config {
        Some(p) => serde_json::from_slice(&read_file(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(iters) = args.iters {
        train.iterations = iters;
    }
    let views = load_views(&args.cameras, args.images.as_deref())?;
    let points = load_points(&args.points)?;
    let mut job = ReconJob::new("fit", views, points);
    job.baseline = train;
    job.sh_degree = args.sh_degree;
    job.background = args.background;
    job.seed = args.seed;
    let scene = fit_baseline(&job)?;
    save_ply(&args.out, &scene)?;
    Ok(json!({ "out": display(&args.out), "splats": scene.len() }))
}
