use std::collections::{BTreeMap, HashMap, HashSet};

use gsfix_core::bench::{
    aggregate_report, build_res_scene, evaluate_scene, load_benchmark_scene, load_candidates, BenchmarkScene,
    DenseCapture, ViewSplit,
};
use gsfix_core::io::load_png;
use gsfix_core::optim::{TrainConfig, PSNR_CAP_DB};
use gsfix_core::raster::RenderConfig;
use gsfix_core::synthetic::{sparse_view_scenario, ScenarioConfig};
use gsfix_core::Image;
use rand::seq::SliceRandom;

fn capture() -> DenseCapture {
    let sc = sparse_view_scenario(
        21,
        &ScenarioConfig { splats: 60, resolution: 32, train_views: 12, held_out_views: 0, ..ScenarioConfig::default() },
    );
    DenseCapture { scene_id: "cap".into(), views: sc.train, init_points: sc.points, background: sc.gt.background }
}

fn train() -> TrainConfig {
    TrainConfig { iterations: 150, ..TrainConfig::default() }
}

fn gt_frames(scene: &BenchmarkScene) -> HashMap<String, Image> {
    scene
        .eval_pairs
        .iter()
        .map(|p| (p.pose_id.clone(), load_png(&scene.root.join(&p.gt)).unwrap()))
        .collect()
}

fn artifact_frames(scene: &BenchmarkScene) -> HashMap<String, Image> {
    scene
        .eval_pairs
        .iter()
        .map(|p| (p.pose_id.clone(), load_png(&scene.root.join(&p.artifact)).unwrap()))
        .collect()
}

#[test]
fn build_writes_a_consistent_benchmark() {
    let cap = capture();
    let dir = tempfile::tempdir().unwrap();
    let scene = build_res_scene(&cap, 3, &train(), &RenderConfig::default(), 0, dir.path()).unwrap();
    assert_eq!(scene.sparse_train_ids, vec!["train00", "train06", "train11"]);
    let all: HashSet<_> = cap.views.iter().map(|v| v.pose.pose_id.clone()).collect();
    assert!(scene.sparse_train_ids.iter().all(|id| all.contains(id)));
    assert_eq!(scene.eval_pairs.len(), 12);
    for pair in &scene.eval_pairs {
        let a = load_png(&dir.path().join(&pair.artifact)).unwrap();
        let g = load_png(&dir.path().join(&pair.gt)).unwrap();
        assert!(a.same_shape(&g));
        assert_eq!(pair.split == ViewSplit::Train, scene.sparse_train_ids.contains(&pair.pose_id));
    }
    let held: HashSet<_> = scene.held_out().map(|p| p.pose_id.clone()).collect();
    assert!(scene.sparse_train_ids.iter().all(|id| !held.contains(id)));
    let reloaded = load_benchmark_scene(&dir.path().join("scene.json")).unwrap();
    assert_eq!(reloaded, scene);
}

#[test]
fn more_training_views_give_cleaner_renders() {
    let cap = capture();
    let (d3, dall) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let rc = RenderConfig::default();
    let sparse = build_res_scene(&cap, 3, &train(), &rc, 0, d3.path()).unwrap();
    let dense = build_res_scene(&cap, cap.views.len(), &train(), &rc, 0, dall.path()).unwrap();
    let r3 = evaluate_scene(&sparse, &artifact_frames(&sparse), None).unwrap();
    let rall = evaluate_scene(&dense, &artifact_frames(&dense), None).unwrap();
    assert!(rall.mean_psnr > r3.mean_psnr, "{} vs {}", rall.mean_psnr, r3.mean_psnr);
}

#[test]
fn evaluation_against_ground_truth_hits_the_cap() {
    let cap = capture();
    let dir = tempfile::tempdir().unwrap();
    let scene = build_res_scene(&cap, 3, &train(), &RenderConfig::default(), 0, dir.path()).unwrap();
    let report = evaluate_scene(&scene, &gt_frames(&scene), None).unwrap();
    for f in &report.per_frame {
        assert_eq!(f.psnr, PSNR_CAP_DB);
        assert!((f.ssim - 1.0).abs() < 1e-12);
    }
}

#[test]
fn evaluation_is_order_independent_and_merges_external_scores() {
    let cap = capture();
    let dir = tempfile::tempdir().unwrap();
    let scene = build_res_scene(&cap, 3, &train(), &RenderConfig::default(), 0, dir.path()).unwrap();
    let candidates = load_candidates(&scene, &dir.path().join("artifact")).unwrap();
    let mut external = BTreeMap::new();
    let lpips: BTreeMap<String, f64> = scene
        .eval_pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.pose_id.clone(), 0.1 + 0.01 * i as f64))
        .chain([("elsewhere".to_string(), 9.0)])
        .collect();
    external.insert("lpips".to_string(), lpips);
    let report = evaluate_scene(&scene, &candidates, Some(&external)).unwrap();
    assert_eq!(report, evaluate_scene(&scene, &candidates, Some(&external)).unwrap());
    assert_eq!(report.external["lpips"].len(), 12);
    assert!((report.external_mean("lpips").unwrap() - (0.1 + 0.055)).abs() < 1e-12);
    let psnr_mean = report.per_frame.iter().map(|f| f.psnr).sum::<f64>() / 12.0;
    assert!((report.mean_psnr - psnr_mean).abs() < 1e-9);

    let mut shuffled = scene.clone();
    shuffled.eval_pairs.shuffle(&mut gsfix_core::synthetic::rng(3));
    let again = evaluate_scene(&shuffled, &candidates, None).unwrap();
    assert!((again.mean_psnr - report.mean_psnr).abs() < 1e-12);
    assert!((again.mean_ssim - report.mean_ssim).abs() < 1e-12);

    let table = aggregate_report(&[report]);
    assert!(table.to_csv().starts_with("scene,psnr,ssim,lpips\ncap,"));

    let mut missing = candidates.clone();
    missing.remove("train05");
    assert!(evaluate_scene(&scene, &missing, None).is_err());
}
