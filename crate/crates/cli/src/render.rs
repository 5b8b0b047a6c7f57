use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gsfix_core::io::{load_cameras, load_ply, save_cameras, save_png, CameraRecord};
use gsfix_core::pipeline::render_views;
use gsfix_core::raster::RenderConfig;
use gsfix_core::scene::CameraPose;
use gsfix_core::trajectory::{
    fit_orbit_path, plan_reference_path, sample_ellipse, sample_interpolation, SegmentLabel, TrajectoryPlan,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;
use crate::inputs::{parent_dir, parse_split, resolve, write_json};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajKind {
    /// Pose interpolation between adjacent cameras.
    Interp,
    /// One closed loop around the ellipse fitted to all cameras.
    Ellipse,
    /// Reference-guided paths between adjacent cameras.
    Refguided,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Scene PLY to render.
    #[arg(long)]
    pub scene: PathBuf,
    /// Cameras JSON: rendered as-is, or used as references with --traj.
    #[arg(long, required_unless_present = "trajectory_spec", conflicts_with = "trajectory_spec")]
    pub cameras: Option<PathBuf>,
    /// JSON with `cameras` and optional `traj`, `frames`, `split`; flags override it.
    #[arg(long)]
    pub trajectory_spec: Option<PathBuf>,
    /// Output directory for frames and the cameras manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub traj: Option<TrajKind>,
    /// Poses per plan, including both references.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Reference-guided split `n1,n2,n3`.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<(usize, usize, usize)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectorySpecFile {
    cameras: PathBuf,
    #[serde(default)]
    traj: Option<TrajKind>,
    #[serde(default)]
    frames: Option<usize>,
    #[serde(default)]
    split: Option<(usize, usize, usize)>,
}

pub const DEFAULT_FRAMES: usize = 49;

/// Poses, their segment labels and planner warnings.
type PlannedPath = (Vec<CameraPose>, Vec<SegmentLabel>, Vec<String>);

/// Concatenate plans, dropping a plan's first pose when it repeats the
/// previous plan's last pose.
fn concat_plans(plans: Vec<TrajectoryPlan>) -> PlannedPath {
    let (mut poses, mut labels, mut warnings) = (Vec::new(), Vec::new(), Vec::new());
    for plan in plans {
        let skip = match (poses.last(), plan.poses.first()) {
            (Some(prev), Some(first)) => prev == first,
            _ => false,
        };
        for (p, l) in plan.poses.into_iter().zip(plan.labels).skip(usize::from(skip)) {
            poses.push(p);
            labels.push(l);
        }
        warnings.extend(plan.warnings);
    }
    (poses, labels, warnings)
}

pub fn plan_poses(
    refs: &[CameraPose],
    traj: Option<TrajKind>,
    frames: usize,
    split: Option<(usize, usize, usize)>,
) -> Result<PlannedPath, CliError> {
    if split.is_some() && traj != Some(TrajKind::Refguided) {
        return Err(CliError::Usage("--split applies only to --traj refguided".into()));
    }
    let Some(kind) = traj else {
        return Ok((refs.to_vec(), vec![SegmentLabel::Reference; refs.len()], Vec::new()));
    };
    if refs.len() < 2 {
        return Err(CliError::Input("a trajectory needs at least two cameras".into()));
    }
    match kind {
        TrajKind::Interp => {
            let plans = refs
                .windows(2)
                .map(|w| sample_interpolation(&w[0], &w[1], frames))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(concat_plans(plans))
        }
        TrajKind::Ellipse => {
            let orbit = fit_orbit_path(refs)?;
            let start = orbit.nearest_angle(&refs[0].center());
            let mut plan = sample_ellipse(&orbit, (start, start + TAU), frames)?;
            for p in &mut plan.poses {
                p.intrinsics = refs[0].intrinsics;
            }
            Ok(concat_plans(vec![plan]))
        }
        TrajKind::Refguided => {
            let (plans, mut warnings) = plan_reference_path(refs, frames, split)?;
            let (poses, labels, plan_warnings) = concat_plans(plans);
            warnings.extend(plan_warnings);
            Ok((poses, labels, warnings))
        }
    }
}

pub fn run(args: RenderArgs) -> Result<serde_json::Value, CliError> {
    let (cameras, mut traj, mut frames, mut split) = match &args.trajectory_spec {
        Some(spec_path) => {
            let spec: TrajectorySpecFile = serde_json::from_slice(&gsfix_core::io::read_file(spec_path)?)?;
            (resolve(&parent_dir(spec_path), &spec.cameras), spec.traj, spec.frames, spec.split)
        }
        None => (args.cameras.clone().expect("clap requires --cameras"), None, None, None),
    };
    traj = args.traj.or(traj);
    frames = args.frames.or(frames);
    split = args.split.or(split);
    let frames = frames.unwrap_or(DEFAULT_FRAMES);

    let scene = load_ply(&args.scene)?;
    let refs: Vec<CameraPose> = load_cameras(&cameras)?.into_iter().map(|r| r.pose).collect();
    let (poses, labels, warnings) = plan_poses(&refs, traj, frames, split)?;
    let renders = render_views(&scene, &poses, &RenderConfig::default())?;

    std::fs::create_dir_all(&args.out)?;
    let mut records = Vec::with_capacity(poses.len());
    for (i, (pose, image)) in poses.iter().zip(&renders).enumerate() {
        let name = PathBuf::from(format!("frame_{i:04}.png"));
        save_png(&args.out.join(&name), image)?;
        records.push(CameraRecord { pose: pose.clone(), image: Some(name) });
    }
    save_cameras(&args.out.join("cameras.json"), &records)?;
    let frames_json: Vec<_> = poses
        .iter()
        .zip(&labels)
        .map(|(p, l)| json!({ "pose_id": p.pose_id, "label": l.as_str() }))
        .collect();
    write_json(
        &args.out.join("trajectory.json"),
        &json!({ "traj": traj, "frames": frames_json, "warnings": warnings }),
    )?;
    Ok(json!({ "frames": poses.len(), "out": display(&args.out), "warnings": warnings }))
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}
