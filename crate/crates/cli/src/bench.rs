use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use gsfix_core::bench::{
    aggregate_report, build_res_scene, evaluate_scene, load_benchmark_scene, load_candidates, load_external_scores,
    DenseCapture, MetricsReport,
};
use gsfix_core::io::{read_file, write_file};
use gsfix_core::optim::TrainConfig;
use gsfix_core::raster::RenderConfig;
use serde_json::json;

use crate::error::CliError;
use crate::Output;
use crate::inputs::{load_points, load_views, parse_background, write_json};
use crate::render::display;

#[derive(Subcommand, Debug)]
pub enum BenchCommand {
    /// Fit a sparse-view baseline and write artifact/GT frame pairs.
    Build(BuildArgs),
    /// Score candidate frames against a built scene's GT frames.
    Eval(EvalArgs),
    /// Aggregate per-scene metrics into one table.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Cameras JSON of the dense capture, with images.
    #[arg(long)]
    pub cameras: PathBuf,
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// COLMAP points3D.txt or a PLY scene.
    #[arg(long)]
    pub points: PathBuf,
    /// Number of strided training views.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value = "scene")]
    pub scene_id: String,
    #[arg(long, value_parser = parse_background, default_value = "0,0,0")]
    pub background: [f64; 3],
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// `scene.json` written by `bench build`, or its directory.
    #[arg(long)]
    pub scene: PathBuf,
    /// Directory of `<pose_id>.png` candidate frames.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Externally computed scores: metric → pose id → value.
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Metrics JSON output; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Per-scene metrics JSON files from `bench eval`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

pub fn run(cmd: BenchCommand) -> Result<Output, CliError> {
    match cmd {
        BenchCommand::Build(a) => build(a).map(Output::Json),
        BenchCommand::Eval(a) => eval(a).map(Output::Json),
        BenchCommand::Report(a) => report(a),
    }
}

fn build(args: BuildArgs) -> Result<serde_json::Value, CliError> {
    let capture = DenseCapture {
        scene_id: args.scene_id,
        views: load_views(&args.cameras, args.images.as_deref())?,
        init_points: load_points(&args.points)?,
        background: args.background,
    };
    let mut train = TrainConfig::default();
    if let Some(iters) = args.iters {
        train.iterations = iters;
    }
    let scene = build_res_scene(&capture, args.k, &train, &RenderConfig::default(), args.seed, &args.out)?;
    Ok(json!({
        "scene": display(&args.out.join("scene.json")),
        "pairs": scene.eval_pairs.len(),
        "sparse_train_ids": scene.sparse_train_ids,
    }))
}

fn eval(args: EvalArgs) -> Result<serde_json::Value, CliError> {
    let manifest = if args.scene.is_dir() { args.scene.join("scene.json") } else { args.scene.clone() };
    let scene = load_benchmark_scene(&manifest)?;
    let candidates = load_candidates(&scene, &args.candidates)?;
    let external = args.external.as_deref().map(load_external_scores).transpose()?;
    let report = evaluate_scene(&scene, &candidates, external.as_ref())?;
    match &args.out {
        Some(out) => {
            write_json(out, &report)?;
            Ok(json!({
                "out": display(out),
                "scene": report.scene_id,
                "mean_psnr": report.mean_psnr,
                "mean_ssim": report.mean_ssim,
            }))
        }
        None => Ok(serde_json::to_value(&report)?),
    }
}

fn report(args: ReportArgs) -> Result<Output, CliError> {
    let reports = args
        .reports
        .iter()
        .map(|p| Ok(serde_json::from_slice::<MetricsReport>(&read_file(p)?)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    let table = aggregate_report(&reports);
    if let Some(p) = &args.csv {
        write_file(p, table.to_csv().as_bytes())?;
    }
    if let Some(p) = &args.text {
        write_file(p, table.to_text().as_bytes())?;
    }
    Ok(match args.format {
        ReportFormat::Text => Output::Text(table.to_text()),
        ReportFormat::Csv => Output::Text(table.to_csv()),
        ReportFormat::Json => Output::Json(serde_json::to_value(&table)?),
    })
}
