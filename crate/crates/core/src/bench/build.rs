use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchError, FrameMetrics, MetricsReport, ViewSplit};
use crate::image::Image;
use crate::io::{load_png, read_file, save_cameras, save_png, write_atomic, CameraRecord, InitPoint, IoError};
use crate::optim::TrainConfig;
use crate::pipeline::{fit_baseline, render_views, ReconJob, View};
use crate::raster::RenderConfig;

/// A densely sampled, ordered capture of one scene.
#[derive(Clone, Debug)]
pub struct DenseCapture {
    pub scene_id: String,
    pub views: Vec<View>,
    pub init_points: Vec<InitPoint>,
    pub background: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub pose_id: String,
    pub artifact: PathBuf,
    pub gt: PathBuf,
    pub split: ViewSplit,
}

/// `scene.json`: paths are relative to the directory holding it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkScene {
    pub scene_id: String,
    pub sparse_train_ids: Vec<String>,
    pub eval_pairs: Vec<EvalPair>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl BenchmarkScene {
    pub fn held_out(&self) -> impl Iterator<Item = &EvalPair> {
        self.eval_pairs.iter().filter(|p| p.split == ViewSplit::HeldOut)
    }
}

/// `K` indices spread uniformly over `0..m`: `round(i·(m−1)/(K−1))`, with
/// halves rounded to even.
pub fn stride_indices(m: usize, k: usize) -> Result<Vec<usize>, BenchError> {
    if m == 0 || k == 0 || k > m {
        return Err(BenchError::Invalid(format!("cannot pick {k} of {m} views")));
    }
    if k == 1 {
        return Ok(vec![0]);
    }
    Ok((0..k)
        .map(|i| ((i * (m - 1)) as f64 / (k - 1) as f64).round_ties_even() as usize)
        .collect())
}

/// Fit a sparse-view baseline from `k` strided views, render every capture
/// pose and write artifact/GT pairs plus `scene.json` under `out_dir`.
pub fn build_res_scene(
    capture: &DenseCapture,
    k: usize,
    train_config: &TrainConfig,
    render_config: &RenderConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<BenchmarkScene, BenchError> {
    crate::io::check_unique(capture.views.iter().map(|v| v.pose.pose_id.as_str()))?;
    let picks = stride_indices(capture.views.len(), k)?;
    let train: Vec<View> = picks.iter().map(|&i| capture.views[i].clone()).collect();
    let mut job = ReconJob::new(capture.scene_id.clone(), train, capture.init_points.clone());
    job.baseline = train_config.clone();
    job.render = render_config.clone();
    job.background = capture.background;
    job.seed = seed;
    let scene = fit_baseline(&job)?;

    let poses: Vec<_> = capture.views.iter().map(|v| v.pose.clone()).collect();
    let renders = render_views(&scene, &poses, render_config)?;
    for sub in ["artifact", "gt"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| IoError::file(&d, e))?;
    }
    let train_ids: HashSet<&str> = picks.iter().map(|&i| capture.views[i].pose.pose_id.as_str()).collect();
    let mut pairs = Vec::with_capacity(capture.views.len());
    for (view, artifact) in capture.views.iter().zip(&renders) {
        let id = &view.pose.pose_id;
        if !crate::restore::is_safe_component(id) {
            return Err(BenchError::Invalid(format!("pose id `{id}` cannot name a file")));
        }
        let pair = EvalPair {
            pose_id: id.clone(),
            artifact: PathBuf::from("artifact").join(format!("{id}.png")),
            gt: PathBuf::from("gt").join(format!("{id}.png")),
            split: if train_ids.contains(id.as_str()) { ViewSplit::Train } else { ViewSplit::HeldOut },
        };
        save_png(&out_dir.join(&pair.artifact), artifact)?;
        save_png(&out_dir.join(&pair.gt), &view.image)?;
        pairs.push(pair);
    }
    let records: Vec<CameraRecord> = capture
        .views
        .iter()
        .zip(&pairs)
        .map(|(v, p)| CameraRecord { pose: v.pose.clone(), image: Some(p.gt.clone()) })
        .collect();
    save_cameras(&out_dir.join("cameras.json"), &records)?;
    crate::io::save_ply(&out_dir.join("baseline.ply"), &scene)?;
    let bench = BenchmarkScene {
        scene_id: capture.scene_id.clone(),
        sparse_train_ids: picks.iter().map(|&i| capture.views[i].pose.pose_id.clone()).collect(),
        eval_pairs: pairs,
        root: out_dir.to_path_buf(),
    };
    let text = serde_json::to_string_pretty(&bench).map_err(IoError::from)?;
    let manifest = out_dir.join("scene.json");
    write_atomic(&manifest, text.as_bytes()).map_err(|e| IoError::file(&manifest, e))?;
    Ok(bench)
}

pub fn load_benchmark_scene(manifest: &Path) -> Result<BenchmarkScene, BenchError> {
    let mut scene: BenchmarkScene = serde_json::from_slice(&read_file(manifest)?).map_err(IoError::from)?;
    scene.root = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok(scene)
}

/// `<dir>/<pose_id>.png` for every pair of the scene.
pub fn load_candidates(scene: &BenchmarkScene, dir: &Path) -> Result<HashMap<String, Image>, BenchError> {
    scene
        .eval_pairs
        .iter()
        .map(|p| Ok((p.pose_id.clone(), load_png(&dir.join(format!("{}.png", p.pose_id)))?)))
        .collect()
}

/// Externally computed scores: metric name → pose id → score.
pub type ExternalScores = BTreeMap<String, BTreeMap<String, f64>>;

pub fn load_external_scores(path: &Path) -> Result<ExternalScores, BenchError> {
    Ok(serde_json::from_slice(&read_file(path)?).map_err(IoError::from)?)
}

/// Per-frame PSNR/SSIM of each candidate against its GT frame, in pair order.
/// External rows for the scene's poses are merged in.
pub fn evaluate_scene(
    scene: &BenchmarkScene,
    candidates: &HashMap<String, Image>,
    external: Option<&ExternalScores>,
) -> Result<MetricsReport, BenchError> {
    let mut frames = Vec::with_capacity(scene.eval_pairs.len());
    for pair in &scene.eval_pairs {
        let candidate = candidates
            .get(&pair.pose_id)
            .ok_or_else(|| BenchError::MissingCandidate(pair.pose_id.clone()))?;
        let gt = load_png(&scene.root.join(&pair.gt))?;
        let mut m = FrameMetrics::compute(pair.pose_id.clone(), candidate, &gt)?;
        m.split = Some(pair.split);
        frames.push(m);
    }
    let mut report = MetricsReport::from_frames(scene.scene_id.clone(), frames);
    if let Some(ext) = external {
        let ids: HashSet<&str> = scene.eval_pairs.iter().map(|p| p.pose_id.as_str()).collect();
        for (metric, rows) in ext {
            let kept: BTreeMap<String, f64> =
                rows.iter().filter(|(id, _)| ids.contains(id.as_str())).map(|(k, v)| (k.clone(), *v)).collect();
            if !kept.is_empty() {
                report.external.insert(metric.clone(), kept);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_rule() {
        assert_eq!(stride_indices(30, 3).unwrap(), vec![0, 14, 29]);
        assert_eq!(stride_indices(5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(stride_indices(9, 1).unwrap(), vec![0]);
        assert!(stride_indices(3, 4).is_err());
        for m in 1..60 {
            for k in 1..=m {
                let ids = stride_indices(m, k).unwrap();
                let unique: HashSet<_> = ids.iter().collect();
                assert_eq!(unique.len(), k);
                assert!(ids.iter().all(|&i| i < m));
            }
        }
    }
}
