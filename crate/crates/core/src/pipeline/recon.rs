use std::collections::HashMap;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{evaluate_views, render_views, train_scene, TrainLog};
use super::{filter_visible_points, initialize_scene, PipelineError, ReconJob, View};
use crate::bench::MetricsReport;
use crate::io::{save_ply, write_atomic, IoError};
use crate::restore::{restore, RestorationRequest, RestorationResponse, RestoreStatus, Restorer};
use crate::scene::{CameraPose, Scene};
use crate::trajectory::plan_reference_path;

/// What happens to a generative view whose pose was already fixed in an
/// earlier round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenSetPolicy {
    /// The newer frame replaces the older one.
    #[default]
    LatestWins,
    /// Every round's frames are kept side by side.
    Accumulate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AuditEvent {
    Baseline {
        points_in: usize,
        points_visible: usize,
        splats: usize,
        losses: Vec<f64>,
    },
    Plan {
        round: usize,
        plan: usize,
        ref_a: String,
        ref_b: String,
        poses: usize,
        fallback: bool,
        warnings: Vec<String>,
    },
    Restore {
        round: usize,
        plan: usize,
        backend: String,
        status: Option<RestoreStatus>,
        frames: usize,
        usable: usize,
        message: Option<String>,
    },
    Train {
        round: usize,
        gen_views: usize,
        train_set_size: usize,
        losses: Vec<f64>,
        splats: usize,
    },
    Rollback {
        round: usize,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundFailure {
    pub round: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub metrics: MetricsReport,
    /// Reference plus generative views after this round.
    pub train_set_size: usize,
    pub gen_views: usize,
}

#[derive(Clone, Debug)]
pub struct ReconOutcome {
    pub scene: Scene,
    pub baseline: Scene,
    pub baseline_metrics: MetricsReport,
    pub rounds: Vec<RoundSummary>,
    pub audit: Vec<AuditEvent>,
    /// Set when a round was aborted; `scene` is then the state before that round.
    pub failure: Option<RoundFailure>,
    pub gen_views: Vec<View>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = crate::synthetic::rng(seed);
    rng.set_stream(stream);
    rng
}

/// Initialize from the visible points and optimize on the input views with
/// the reconstruction loss only.
pub fn fit_baseline(job: &ReconJob) -> Result<Scene, PipelineError> {
    fit_baseline_logged(job).map(|(s, _, _)| s)
}

fn fit_baseline_logged(job: &ReconJob) -> Result<(Scene, TrainLog, AuditEvent), PipelineError> {
    job.validate()?;
    let visible = filter_visible_points(&job.init_points, &job.input_poses());
    let mut scene = initialize_scene(&visible, job.sh_degree, job.background)?;
    let log = train_scene(
        &mut scene,
        &job.input_views,
        &[],
        &job.baseline,
        &job.loss,
        &job.render,
        &mut stream_rng(job.seed, 0),
    )?;
    let event = AuditEvent::Baseline {
        points_in: job.init_points.len(),
        points_visible: visible.len(),
        splats: scene.len(),
        losses: log.losses.clone(),
    };
    Ok((scene, log, event))
}

/// Baseline fit followed by `job.rounds` rounds of render → restore → retrain.
pub fn run_iterative_recon(job: &ReconJob, restorer: &dyn Restorer) -> Result<ReconOutcome, PipelineError> {
    let (baseline, _, event) = fit_baseline_logged(job)?;
    let mut outcome = run_iterative_from(job, baseline, restorer)?;
    outcome.audit.insert(0, event);
    if let Some(dir) = &job.output_dir {
        write_json(&dir.join("audit.json"), &outcome.audit)?;
    }
    Ok(outcome)
}

fn eval_set(job: &ReconJob) -> &[View] {
    if job.eval_views.is_empty() {
        &job.input_views
    } else {
        &job.eval_views
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(IoError::from)?;
    write_atomic(path, text.as_bytes()).map_err(|e| IoError::file(path, e))?;
    Ok(())
}

struct GenSet {
    views: Vec<View>,
    index: HashMap<String, usize>,
}

impl GenSet {
    fn insert(&mut self, mut view: View, round: usize, policy: GenSetPolicy) {
        if policy == GenSetPolicy::Accumulate {
            view.pose.pose_id = format!("{}@r{round}", view.pose.pose_id);
        }
        match self.index.get(&view.pose.pose_id) {
            Some(&i) => self.views[i] = view,
            None => {
                self.index.insert(view.pose.pose_id.clone(), self.views.len());
                self.views.push(view);
            }
        }
    }
}

/// The iterative loop starting from an already fitted baseline scene.
pub fn run_iterative_from(
    job: &ReconJob,
    baseline: Scene,
    restorer: &dyn Restorer,
) -> Result<ReconOutcome, PipelineError> {
    job.validate()?;
    let baseline_metrics = evaluate_views(&job.scene_id, &baseline, eval_set(job), &job.render)?;
    if let Some(dir) = &job.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
        save_ply(&dir.join("baseline.ply"), &baseline)?;
        write_json(&dir.join("metrics_baseline.json"), &baseline_metrics)?;
    }
    let poses = job.input_poses();
    let mut scene = baseline.clone();
    let mut audit = Vec::new();
    let mut rounds = Vec::new();
    let mut failure = None;
    let mut gen = GenSet { views: Vec::new(), index: HashMap::new() };

    for round in 1..=job.rounds {
        let snapshot = scene.clone();
        let (plans, warnings) = plan_reference_path(&poses, job.trajectory.frames, job.trajectory.split)?;
        for (p, plan) in plans.iter().enumerate() {
            let mut w = warnings.clone();
            w.extend(plan.warnings.iter().cloned());
            audit.push(AuditEvent::Plan {
                round,
                plan: p,
                ref_a: poses[p].pose_id.clone(),
                ref_b: poses[p + 1].pose_id.clone(),
                poses: plan.len(),
                fallback: plan.fallback,
                warnings: w,
            });
        }

        let novel: Vec<Vec<CameraPose>> = plans.iter().map(|pl| pl.novel_poses().cloned().collect()).collect();
        let frames = novel
            .par_iter()
            .map(|ps| render_views(&scene, ps, &job.render))
            .collect::<Result<Vec<_>, _>>()?;
        let requests: Vec<RestorationRequest> = novel
            .into_iter()
            .zip(frames)
            .enumerate()
            .map(|(p, (frame_poses, frames))| RestorationRequest {
                scene_id: format!("{}-pair{p:02}", job.scene_id),
                round,
                frames,
                frame_poses,
                ref_images: [job.input_views[p].image.clone(), job.input_views[p + 1].image.clone()],
                ref_poses: [poses[p].clone(), poses[p + 1].clone()],
            })
            .collect();
        let responses: Vec<Result<RestorationResponse, _>> =
            requests.par_iter().map(|r| restore(r, restorer)).collect();

        let mut round_error = None;
        for (p, resp) in responses.iter().enumerate() {
            let frames = requests[p].frames.len();
            let event = match resp {
                Ok(r) => {
                    if r.status == RestoreStatus::Failed && round_error.is_none() {
                        round_error = Some(format!(
                            "restorer failed on pair {p}: {}",
                            r.message.clone().unwrap_or_default()
                        ));
                    }
                    AuditEvent::Restore {
                        round,
                        plan: p,
                        backend: r.backend.clone(),
                        status: Some(r.status),
                        frames,
                        usable: r.usable_frames().count(),
                        message: r.message.clone(),
                    }
                }
                Err(e) => {
                    if round_error.is_none() {
                        round_error = Some(format!("restore request for pair {p} rejected: {e}"));
                    }
                    AuditEvent::Restore {
                        round,
                        plan: p,
                        backend: restorer.name(),
                        status: None,
                        frames,
                        usable: 0,
                        message: Some(e.to_string()),
                    }
                }
            };
            audit.push(event);
        }
        if let Some(message) = round_error {
            scene = snapshot;
            audit.push(AuditEvent::Rollback { round, reason: message.clone() });
            failure = Some(RoundFailure { round, message });
            break;
        }

        for (req, resp) in requests.iter().zip(&responses) {
            let resp = resp.as_ref().expect("errors handled above");
            for (i, img) in resp.usable_frames() {
                gen.insert(View { pose: req.frame_poses[i].clone(), image: img.clone() }, round, job.gen_policy);
            }
        }

        let mut rng = stream_rng(job.seed, round as u64);
        let log = match train_scene(
            &mut scene,
            &job.input_views,
            &gen.views,
            &job.refine,
            &job.loss,
            &job.render,
            &mut rng,
        ) {
            Ok(log) => log,
            Err(e) => {
                scene = snapshot;
                audit.push(AuditEvent::Rollback { round, reason: e.to_string() });
                failure = Some(RoundFailure { round, message: e.to_string() });
                break;
            }
        };
        let train_set_size = job.input_views.len() + gen.views.len();
        audit.push(AuditEvent::Train {
            round,
            gen_views: gen.views.len(),
            train_set_size,
            losses: log.losses,
            splats: scene.len(),
        });
        let metrics = evaluate_views(&job.scene_id, &scene, eval_set(job), &job.render)?;
        if let Some(dir) = &job.output_dir {
            save_ply(&dir.join(format!("round_{round:02}.ply")), &scene)?;
            write_json(&dir.join(format!("metrics_round_{round:02}.json")), &metrics)?;
        }
        rounds.push(RoundSummary { round, metrics, train_set_size, gen_views: gen.views.len() });
    }

    Ok(ReconOutcome {
        scene,
        baseline,
        baseline_metrics,
        rounds,
        audit,
        failure,
        gen_views: gen.views,
    })
}
