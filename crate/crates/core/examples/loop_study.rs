//! Held-out PSNR of the baseline fit and of the iterative loop with identity,
//! blended and oracle restorers on seeded synthetic scenes.
//!
//! `cargo run --release -p gsfix-core --example loop_study -- [seeds] [baseline_iters] [refine_iters] [rounds] [frames]`

use std::time::Instant;

use gsfix_core::optim::TrainConfig;
use gsfix_core::pipeline::{fit_baseline, run_iterative_from, ReconJob, TrajectorySpec};
use gsfix_core::raster::RenderConfig;
use gsfix_core::restore::{BlendRestorer, IdentityRestorer, OracleRestorer, RenderedGroundTruth, Restorer};
use gsfix_core::synthetic::{sparse_view_scenario, ScenarioConfig};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() {
    let seeds = arg(1, 3) as u64;
    let baseline_iters = arg(2, 1000);
    let refine_iters = arg(3, 200);
    let rounds = arg(4, 3);
    let frames = arg(5, 10);
    for seed in 0..seeds {
        let sc = sparse_view_scenario(seed, &ScenarioConfig::default());
        let mut job = ReconJob::new("study", sc.train.clone(), sc.points.clone());
        job.eval_views = sc.held_out.clone();
        job.rounds = rounds;
        job.seed = seed;
        job.background = sc.gt.background;
        job.trajectory = TrajectorySpec { frames, split: None };
        job.baseline = TrainConfig { iterations: baseline_iters, ..TrainConfig::default() };
        job.refine = TrainConfig { iterations: refine_iters, ..TrainConfig::default() };
        job.loss.anneal_span = refine_iters / 2;
        let t = Instant::now();
        let baseline = fit_baseline(&job).unwrap();
        let t_base = t.elapsed().as_secs_f64();
        let gt = || RenderedGroundTruth { scene: sc.gt.clone(), config: RenderConfig::default() };
        let backends: Vec<(&str, Box<dyn Restorer>)> = vec![
            ("identity", Box::new(IdentityRestorer)),
            ("blend0.5", Box::new(BlendRestorer::new(0.5, gt()).unwrap())),
            ("oracle", Box::new(OracleRestorer::new(gt()))),
        ];
        let mut line = String::new();
        let mut base_psnr = 0.0;
        for (name, b) in &backends {
            let t = Instant::now();
            let out = run_iterative_from(&job, baseline.clone(), b.as_ref()).unwrap();
            base_psnr = out.baseline_metrics.mean_psnr;
            let last = out.rounds.last().map(|r| r.metrics.mean_psnr).unwrap_or(base_psnr);
            let per_round: Vec<String> = out.rounds.iter().map(|r| format!("{:.2}", r.metrics.mean_psnr)).collect();
            line.push_str(&format!(
                " {name}={last:.2} [{}] ({:.1}s)",
                per_round.join(","),
                t.elapsed().as_secs_f64()
            ));
        }
        println!("seed {seed}: baseline={base_psnr:.2} ({t_base:.1}s) splats={} {line}", baseline.len());
    }
}
