//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gsfix_core::conditioning::{
    attention_probabilities, cross_attention, project_and_fuse, AttentionWeights, FusionProjector, TokenMatrix,
    FUSION_DIM, GEOMETRIC_DIM, SEMANTIC_DIM,
};
use gsfix_core::io::{
    cameras_from_json, cameras_to_json, read_ply, write_ply, CameraRecord, PlyPrecision,
};
use gsfix_core::optim::{anneal_lambda, psnr, ssim, LossWeights, TrainConfig, SSIM_C1};
use gsfix_core::pipeline::{fit_baseline, run_iterative_from, ReconJob, ReconOutcome, TrajectorySpec};
use gsfix_core::raster::gradcheck::seeded_check;
use gsfix_core::raster::{render, render_reference, RenderConfig};
use gsfix_core::restore::{
    restore, BlendRestorer, IdentityRestorer, OracleRestorer, RemoteRestorer, RemoteWorker, RenderedGroundTruth,
    RestorationRequest, RestoreStatus, Restorer,
};
use gsfix_core::scene::{sh, CameraPose, GaussianSplat, Intrinsics, Scene};
use gsfix_core::synthetic::{front_camera, random_scene, ring_camera, ring_cameras, rng, sparse_view_scenario, ScenarioConfig, SparseViewScenario};
use gsfix_core::trajectory::{
    default_split, fit_orbit_path, sample_ellipse, sample_interpolation, sample_reference_guided, SegmentLabel,
};
use gsfix_core::Image;
use nalgebra::Vector3;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let report = seeded_check(seed, 50, 32, 1).map_err(|e| e.to_string())?;
        for g in &report.groups {
            ensure(g.max_rel_error < 1e-3, || {
                format!("seed {seed}, group {}: relative error {:.3e}", g.group.name(), g.max_rel_error)
            })?;
        }
        worst = worst.max(report.max_rel_error());
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {:.1} s", elapsed.as_secs_f64()))?;
    Ok(format!("max relative error {worst:.2e} over 5 seeds in {:.1} s", elapsed.as_secs_f64()))
}

fn rasterizer_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut r = rng(1000 + seed);
        let n = r.random_range(1..=200);
        let scene = random_scene(&mut r, n, 1, 64, 76.8);
        let cam = front_camera("cam", 64, 64, 76.8);
        let cfg = RenderConfig::default();
        let a = render(&scene, &cam, &cfg).map_err(|e| e.to_string())?;
        let b = render_reference(&scene, &cam, &cfg).map_err(|e| e.to_string())?;
        let d = max_abs_diff(&a.rgb.data, &b.rgb.data);
        ensure(d < 1e-5, || format!("seed {seed} ({n} splats): max abs diff {d:.3e}"))?;
        worst = worst.max(d);
    }
    Ok(format!("max abs diff {worst:.2e} over 20 scenes"))
}

fn metric_oracles() -> Verdict {
    let mut r = rng(3);
    let x = Image { width: 24, height: 20, data: (0..24 * 20 * 3).map(|_| r.random_range(0.0..1.0)).collect() };
    let self_ssim = ssim(&x, &x).map_err(|e| e.to_string())?;
    ensure((self_ssim - 1.0).abs() < 1e-9, || format!("ssim(x, x) = {self_ssim}"))?;

    let (a, b) = (0.2, 0.65);
    let got = ssim(&Image::filled(16, 16, [a; 3]), &Image::filled(16, 16, [b; 3])).map_err(|e| e.to_string())?;
    let want = (2.0 * a * b + SSIM_C1) / (a * a + b * b + SSIM_C1);
    ensure((got - want).abs() < 1e-9, || format!("constant SSIM {got} vs closed form {want}"))?;

    let p = psnr(&Image::filled(8, 8, [0.0; 3]), &Image::filled(8, 8, [0.1; 3])).map_err(|e| e.to_string())?;
    ensure(p == 20.0, || format!("psnr at MSE 0.01 is {p}"))?;
    Ok(format!("ssim(x,x)-1 = {:.1e}, constant SSIM error {:.1e}, psnr {p}", self_ssim - 1.0, (got - want).abs()))
}

fn compositing_hand_cases() -> Verdict {
    let cam = front_camera("cam", 32, 32, 38.4);
    let cfg = RenderConfig::default();
    let on_pixel = |depth: f64, opacity_raw: f64, rgb: [f64; 3]| {
        let mut s = GaussianSplat::isotropic([0.0, 0.0, depth], 0.3, 0.5, rgb, 0);
        s.opacity_raw = opacity_raw;
        s
    };

    let bg = [0.1, 0.2, 0.3];
    let c1 = [0.9, 0.5, 0.2];
    let one = Scene::with_splats(0, bg, vec![on_pixel(2.0, 40.0, c1)]).map_err(|e| e.to_string())?;
    let got = render(&one, &cam, &cfg).map_err(|e| e.to_string())?.rgb.pixel(16, 16);
    let mut worst = 0.0f64;
    for ch in 0..3 {
        let want = 0.99 * sh::dc_to_rgb(sh::rgb_to_dc(c1[ch])) + 0.01 * bg[ch];
        worst = worst.max((got[ch] - want).abs());
    }

    let bg = [0.3; 3];
    let (c1, c2) = ([1.0, 0.0, 0.2], [0.0, 1.0, 0.6]);
    let two = Scene::with_splats(0, bg, vec![on_pixel(3.0, 0.0, c2), on_pixel(2.0, 0.0, c1)]).map_err(|e| e.to_string())?;
    let got = render(&two, &cam, &cfg).map_err(|e| e.to_string())?.rgb.pixel(16, 16);
    for ch in 0..3 {
        let want = 0.5 * c1[ch] + 0.25 * c2[ch] + 0.25 * bg[ch];
        worst = worst.max((got[ch] - want).abs());
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn pose_gap(a: &CameraPose, b: &CameraPose) -> f64 {
    a.rotation.angle_to(&b.rotation).max((a.translation - b.translation).norm())
}

fn trajectory_contract() -> Verdict {
    let k = Intrinsics::centered(40.0, 32, 32);
    let rig = ring_cameras("ref", 6, 3.0, 1.0, Vector3::zeros(), 0.2, k);
    let orbit = fit_orbit_path(&rig).map_err(|e| e.to_string())?;
    let mut r = rng(11);
    let mut refs = rig.clone();
    for i in 0..6 {
        let theta = r.random_range(0.0..std::f64::consts::TAU);
        let offset = Vector3::new(r.random_range(-0.2..0.2), 0.0, r.random_range(-0.2..0.2));
        refs.push(ring_camera(&format!("off{i}"), theta, r.random_range(2.4..3.6), r.random_range(0.6..1.4), offset, k));
    }

    let (mut end_gap, mut interp_gap, mut residual) = (0.0f64, 0.0f64, 0.0f64);
    let mut plans = 0;
    for (i, a) in refs.iter().enumerate() {
        for b in refs.iter().skip(i + 1) {
            for n in [3, 12, 49] {
                let plan = sample_reference_guided(a, b, &orbit, n, default_split(n)).map_err(|e| e.to_string())?;
                end_gap = end_gap.max(pose_gap(&plan.poses[0], a)).max(pose_gap(&plan.poses[n - 1], b));
                for (p, l) in plan.poses.iter().zip(&plan.labels) {
                    if *l == SegmentLabel::Orbit && !plan.fallback {
                        let (plane, conic) = orbit.residual(&p.center());
                        residual = residual.max(plane.abs()).max(conic.abs());
                    }
                }
                plans += 1;
            }
            let guided = sample_reference_guided(a, b, &orbit, 9, (4, 0, 5)).map_err(|e| e.to_string())?;
            let interp = sample_interpolation(a, b, 9).map_err(|e| e.to_string())?;
            for (p, q) in guided.poses.iter().zip(&interp.poses) {
                interp_gap = interp_gap.max(pose_gap(p, q));
            }
        }
    }
    let ellipse = sample_ellipse(&orbit, (0.3, 0.3 + std::f64::consts::TAU), 64).map_err(|e| e.to_string())?;
    for p in &ellipse.poses {
        let (plane, conic) = orbit.residual(&p.center());
        residual = residual.max(plane.abs()).max(conic.abs());
    }
    ensure(end_gap < 1e-9, || format!("endpoint gap {end_gap:.3e}"))?;
    ensure(interp_gap < 1e-9, || format!("n2 = 0 differs from interpolation by {interp_gap:.3e}"))?;
    ensure(residual < 1e-9, || format!("conic residual {residual:.3e}"))?;
    Ok(format!(
        "{plans} plans: endpoint gap {end_gap:.1e}, n2=0 gap {interp_gap:.1e}, conic residual {residual:.1e}"
    ))
}

fn gaussian_tokens(r: &mut impl Rng, rows: usize, cols: usize) -> TokenMatrix {
    TokenMatrix::new(Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(r))).expect("finite")
}

fn conditioning_algebra() -> Verdict {
    let mut r = rng(21);
    let per_ref = 925;
    let geo = TokenMatrix::concat_rows(&[gaussian_tokens(&mut r, per_ref, GEOMETRIC_DIM), gaussian_tokens(&mut r, per_ref, GEOMETRIC_DIM)])
        .map_err(|e| e.to_string())?;
    let sem = TokenMatrix::concat_rows(&[gaussian_tokens(&mut r, per_ref, SEMANTIC_DIM), gaussian_tokens(&mut r, per_ref, SEMANTIC_DIM)])
        .map_err(|e| e.to_string())?;
    let proj = FusionProjector::random(&mut r);
    let fused = project_and_fuse(&geo, &sem, &proj).map_err(|e| e.to_string())?;
    ensure((fused.rows(), fused.cols()) == (2 * per_ref, FUSION_DIM), || {
        format!("fused shape {}x{}", fused.rows(), fused.cols())
    })?;

    let dim = 64;
    let weights = AttentionWeights::random(dim, &mut r);
    let view = gaussian_tokens(&mut r, 40, dim);
    let fusion = gaussian_tokens(&mut r, 2 * per_ref, dim);
    let probs = attention_probabilities(&view, &fusion, &weights).map_err(|e| e.to_string())?;
    let row_err = probs.rows().into_iter().map(|row| (row.sum() - 1.0).abs()).fold(0.0, f64::max);
    ensure(row_err < 1e-6, || format!("softmax row sum error {row_err:.3e}"))?;

    let out = cross_attention(&view, &fusion, &weights).map_err(|e| e.to_string())?;
    let mut order: Vec<usize> = (0..fusion.rows()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    let permuted = TokenMatrix::new(fusion.view().select(ndarray::Axis(0), &order)).map_err(|e| e.to_string())?;
    let out_p = cross_attention(&view, &permuted, &weights).map_err(|e| e.to_string())?;
    let perm_err = (out.view().to_owned() - out_p.view()).iter().map(|v| v.abs()).fold(0.0, f64::max);
    ensure(perm_err < 1e-6, || format!("permutation changes output by {perm_err:.3e}"))?;
    Ok(format!(
        "fused {}x{}, softmax row error {row_err:.1e}, permutation error {perm_err:.1e}",
        fused.rows(),
        fused.cols()
    ))
}

const SEEDS: u64 = 3;

struct LoopSetup {
    scenario: SparseViewScenario,
    job: ReconJob,
    baseline: Scene,
}

fn loop_setups() -> Result<(Vec<LoopSetup>, Duration), String> {
    let start = Instant::now();
    let setups = (0..SEEDS)
        .map(|seed| {
            let scenario = sparse_view_scenario(seed, &ScenarioConfig::default());
            let mut job = ReconJob::new(format!("loop{seed}"), scenario.train.clone(), scenario.points.clone());
            job.eval_views = scenario.held_out.clone();
            job.rounds = 3;
            job.seed = seed;
            job.background = scenario.gt.background;
            job.trajectory = TrajectorySpec { frames: 10, split: None };
            job.baseline = TrainConfig { iterations: 1000, ..TrainConfig::default() };
            job.refine = TrainConfig { iterations: 200, ..TrainConfig::default() };
            job.loss.anneal_span = 100;
            let baseline = fit_baseline(&job).map_err(|e| e.to_string())?;
            Ok(LoopSetup { scenario, job, baseline })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok((setups, start.elapsed()))
}

fn ground_truth(s: &LoopSetup) -> RenderedGroundTruth {
    RenderedGroundTruth { scene: s.scenario.gt.clone(), config: RenderConfig::default() }
}

/// Held-out PSNR of the baseline and after the loop, for one backend.
fn loop_psnr(s: &LoopSetup, restorer: &dyn Restorer) -> Result<(f64, f64), String> {
    let out: ReconOutcome = run_iterative_from(&s.job, s.baseline.clone(), restorer).map_err(|e| e.to_string())?;
    if let Some(f) = &out.failure {
        return Err(format!("{}: round {} failed: {}", restorer.name(), f.round, f.message));
    }
    let last = out.rounds.last().map_or(out.baseline_metrics.mean_psnr, |r| r.metrics.mean_psnr);
    Ok((out.baseline_metrics.mean_psnr, last))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn loop_efficacy(setups: &[LoopSetup], baseline_time: Duration) -> Verdict {
    let start = Instant::now();
    let (mut base, mut ident, mut oracle) = (Vec::new(), Vec::new(), Vec::new());
    for s in setups {
        let (b, i) = loop_psnr(s, &IdentityRestorer)?;
        let (_, o) = loop_psnr(s, &OracleRestorer::new(ground_truth(s)))?;
        base.push(b);
        ident.push(i);
        oracle.push(o);
    }
    let elapsed = baseline_time + start.elapsed();
    let (b, i, o) = (mean(&base), mean(&ident), mean(&oracle));
    let detail = format!(
        "baseline {b:.2} dB, identity {i:.2} dB ({:+.2}), oracle {o:.2} dB ({:+.2}), {:.0} s",
        i - b,
        o - b,
        elapsed.as_secs_f64()
    );
    ensure(o - b >= 1.0, || format!("oracle gain below 1 dB: {detail}"))?;
    ensure((i - b).abs() <= 0.5, || format!("identity drift above 0.5 dB: {detail}"))?;
    ensure(elapsed < Duration::from_secs(15 * 60), || format!("too slow: {detail}"))?;
    Ok(detail)
}

fn blend_monotonicity(setups: &[LoopSetup]) -> Verdict {
    let mut means = Vec::new();
    for beta in [0.0, 0.5, 1.0] {
        let mut psnrs = Vec::new();
        for s in setups {
            let blend = BlendRestorer::new(beta, ground_truth(s)).map_err(|e| e.to_string())?;
            psnrs.push(loop_psnr(s, &blend)?.1);
        }
        means.push(mean(&psnrs));
    }
    let detail = format!("beta 0 / 0.5 / 1: {:.2} / {:.2} / {:.2} dB", means[0], means[1], means[2]);
    ensure(means.windows(2).all(|w| w[1] >= w[0]), || format!("not nondecreasing: {detail}"))?;
    Ok(detail)
}

fn persistence() -> Verdict {
    let mut r = rng(31);
    let scene = random_scene(&mut r, 64, 2, 32, 38.4);
    let back = read_ply(&write_ply(&scene, PlyPrecision::F64).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(back == scene, || "f64 PLY round trip changed the scene".into())?;

    let mut narrow = scene.clone();
    for s in &mut narrow.splats {
        let f = |v: &mut f64| *v = f64::from(*v as f32);
        s.mean.iter_mut().for_each(f);
        s.scale_raw.iter_mut().for_each(f);
        s.rotation_raw.iter_mut().for_each(f);
        s.sh.iter_mut().for_each(f);
        f(&mut s.opacity_raw);
    }
    let bytes = write_ply(&narrow, PlyPrecision::F32).map_err(|e| e.to_string())?;
    let back = read_ply(&bytes).map_err(|e| e.to_string())?;
    ensure(back == narrow, || "f32 PLY round trip changed the scene".into())?;
    ensure(write_ply(&back, PlyPrecision::F32).map_err(|e| e.to_string())? == bytes, || "PLY bytes differ on re-save".into())?;

    let k = Intrinsics { fx: 41.3, fy: 39.9, cx: 15.7, cy: 16.2, width: 32, height: 30 };
    let records: Vec<CameraRecord> = (0..12)
        .map(|i| {
            let q = [0; 4].map(|_| r.random_range(-1.0..1.0));
            let t = [0; 3].map(|_| r.random_range(-5.0..5.0));
            let mut rec = CameraRecord::new(CameraPose::new(format!("cam{i}"), q, t, k).expect("valid pose"));
            if i % 2 == 0 {
                rec.image = Some(format!("images/cam{i}.png").into());
            }
            rec
        })
        .collect();
    let text = cameras_to_json(&records).map_err(|e| e.to_string())?;
    let back = cameras_from_json(&text).map_err(|e| e.to_string())?;
    ensure(back == records, || "cameras JSON round trip changed a record".into())?;
    ensure(cameras_to_json(&back).map_err(|e| e.to_string())? == text, || "cameras JSON differs on re-save".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fast = Duration::from_millis(5);
    let worker = RemoteWorker::new(dir.path(), fast).spawn_echo();
    let gt = random_scene(&mut r, 40, 0, 24, 28.8);
    let rig = ring_cameras("v", 6, 3.0, 0.5, Vector3::new(0.0, 0.0, 3.0), 0.0, Intrinsics::centered(28.8, 24, 24));
    let frame = |p: &CameraPose| render(&gt, p, &RenderConfig::default()).map(|f| f.rgb);
    let frames = rig[1..5].iter().map(frame).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let request = RestorationRequest {
        scene_id: "loopback".into(),
        round: 1,
        frames: frames.clone(),
        frame_poses: rig[1..5].to_vec(),
        ref_images: [frame(&rig[0]).map_err(|e| e.to_string())?, frame(&rig[5]).map_err(|e| e.to_string())?],
        ref_poses: [rig[0].clone(), rig[5].clone()],
    };
    let remote = RemoteRestorer::new(dir.path()).with_timing(fast, Duration::from_secs(60));
    let resp = restore(&request, &remote).map_err(|e| e.to_string())?;
    worker.stop();
    ensure(resp.status == RestoreStatus::Ok, || format!("loopback status {:?}: {:?}", resp.status, resp.message))?;
    let quantized: Vec<Image> = frames.iter().map(Image::quantized).collect();
    ensure(resp.fixed_frames == quantized, || "loopback frames differ from their 8-bit encoding".into())?;
    Ok(format!("PLY (f32, f64), {} cameras and {} loopback frames round-trip exactly", records.len(), frames.len()))
}

fn annealing() -> Verdict {
    let configs = [
        LossWeights::default(),
        LossWeights { lambda_gen_start: 0.0, lambda_gen_end: 1.0, anneal_span: 1000, ..LossWeights::default() },
        LossWeights { lambda_gen_start: 0.25, lambda_gen_end: 0.25, anneal_span: 7, ..LossWeights::default() },
        LossWeights { lambda_gen_start: 0.1, lambda_gen_end: 0.9, anneal_span: 1, ..LossWeights::default() },
    ];
    for w in &configs {
        let span = w.anneal_span;
        ensure(anneal_lambda(0, w) == w.lambda_gen_start || span == 0, || format!("lambda(0) wrong for {w:?}"))?;
        ensure(anneal_lambda(span, w) == w.lambda_gen_end, || format!("lambda(span) wrong for {w:?}"))?;
        let sweep: Vec<f64> = (0..=3 * span.max(1)).map(|i| anneal_lambda(i, w)).collect();
        ensure(sweep.windows(2).all(|p| p[1] >= p[0]), || format!("lambda decreases for {w:?}"))?;
    }
    Ok(format!("{} schedules swept", configs.len()))
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    })
}

fn report(id: usize, name: &str, verdict: &Verdict) {
    match verdict {
        Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
        Err(why) => println!("FAIL {id:>2} {name}: {why}"),
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut record = |id: usize, name: &str, verdict: Verdict| {
        report(id, name, &verdict);
        failed += usize::from(verdict.is_err());
    };
    record(1, "gradient correctness", guarded(gradient_correctness));
    record(2, "rasterizer oracle equivalence", guarded(rasterizer_equivalence));
    record(3, "metric oracles", guarded(metric_oracles));
    record(4, "compositing hand cases", guarded(compositing_hand_cases));
    record(5, "trajectory contract", guarded(trajectory_contract));
    record(6, "conditioning shapes and algebra", guarded(conditioning_algebra));
    match catch_unwind(loop_setups) {
        Ok(Ok((setups, baseline_time))) => {
            record(7, "loop efficacy", guarded(|| loop_efficacy(&setups, baseline_time)));
            record(8, "blend monotonicity", guarded(|| blend_monotonicity(&setups)));
        }
        Ok(Err(why)) => {
            record(7, "loop efficacy", Err(format!("baseline fit failed: {why}")));
            record(8, "blend monotonicity", Err(format!("baseline fit failed: {why}")));
        }
        Err(_) => {
            record(7, "loop efficacy", Err("baseline fit panicked".into()));
            record(8, "blend monotonicity", Err("baseline fit panicked".into()));
        }
    }
    record(9, "persistence", guarded(persistence));
    record(10, "annealing", guarded(annealing));
    ExitCode::from(u8::from(failed > 0))
}
