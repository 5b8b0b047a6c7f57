use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{is_safe_component, restore, RestorationRequest, RestorationResponse, RestoreError, RestoreStatus, Restorer};
use crate::image::Image;
use crate::io::{load_png, save_png, write_atomic, CameraEntry, IoError};
use crate::scene::CameraPose;

pub const DEFAULT_POLL_INTERVAL: Duration = Duration::from_secs(1);
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

const REQUEST_FILE: &str = "request.json";
const RESPONSE_FILE: &str = "response.json";

/// `in/request.json`: written last, after every frame file it names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestManifest {
    pub scene_id: String,
    pub round: usize,
    pub poses: Vec<CameraEntry>,
    pub frames: Vec<String>,
    pub ref_poses: Vec<CameraEntry>,
    pub ref_images: Vec<String>,
}

/// `out/response.json`: a `null` frame entry marks a frame left unrestored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseManifest {
    pub backend: String,
    pub status: RestoreStatus,
    pub frames: Vec<Option<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

fn job_dir(jobs: &Path, scene_id: &str, round: usize) -> PathBuf {
    jobs.join(scene_id).join(round.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, text.as_bytes()).map_err(|e| IoError::file(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::file(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn checked_name(name: &str) -> Result<&str, IoError> {
    if is_safe_component(name) {
        Ok(name)
    } else {
        Err(IoError::Parse(format!("unsafe file name `{name}` in manifest")))
    }
}

/// Client side of the directory exchange: publishes a job under
/// `<jobs>/<scene_id>/<round>/in/` and waits for `out/response.json`.
#[derive(Clone, Debug)]
pub struct RemoteRestorer {
    pub jobs_dir: PathBuf,
    pub poll_interval: Duration,
    pub timeout: Duration,
}

impl RemoteRestorer {
    pub fn new(jobs_dir: impl Into<PathBuf>) -> Self {
        Self {
            jobs_dir: jobs_dir.into(),
            poll_interval: DEFAULT_POLL_INTERVAL,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_timing(mut self, poll_interval: Duration, timeout: Duration) -> Self {
        self.poll_interval = poll_interval;
        self.timeout = timeout;
        self
    }

    fn publish(&self, request: &RestorationRequest) -> Result<PathBuf, IoError> {
        let job = job_dir(&self.jobs_dir, &request.scene_id, request.round);
        if job.exists() {
            std::fs::remove_dir_all(&job).map_err(|e| IoError::file(&job, e))?;
        }
        let (input, output) = (job.join("in"), job.join("out"));
        for d in [&input, &output] {
            std::fs::create_dir_all(d).map_err(|e| IoError::file(d, e))?;
        }
        let mut manifest = RequestManifest {
            scene_id: request.scene_id.clone(),
            round: request.round,
            poses: Vec::new(),
            frames: Vec::new(),
            ref_poses: Vec::new(),
            ref_images: Vec::new(),
        };
        for (i, (img, pose)) in request.frames.iter().zip(&request.frame_poses).enumerate() {
            let name = format!("frame_{i:03}.png");
            save_png(&input.join(&name), img)?;
            manifest.poses.push(CameraEntry::from_pose(pose, None));
            manifest.frames.push(name);
        }
        for (i, (img, pose)) in request.ref_images.iter().zip(&request.ref_poses).enumerate() {
            let name = format!("ref_{i}.png");
            save_png(&input.join(&name), img)?;
            manifest.ref_poses.push(CameraEntry::from_pose(pose, None));
            manifest.ref_images.push(name);
        }
        write_json(&input.join(REQUEST_FILE), &manifest)?;
        Ok(output)
    }

    fn collect(&self, request: &RestorationRequest, output: &Path) -> Result<RestorationResponse, IoError> {
        let manifest: ResponseManifest = read_json(&output.join(RESPONSE_FILE))?;
        let backend = format!("remote:{}", manifest.backend);
        if manifest.status == RestoreStatus::Failed {
            return Ok(RestorationResponse::failed(
                backend,
                manifest.message.unwrap_or_else(|| "remote backend failed".into()),
            ));
        }
        if manifest.frames.len() != request.frames.len() {
            return Ok(RestorationResponse::failed(
                backend,
                format!("response lists {} frames, expected {}", manifest.frames.len(), request.frames.len()),
            ));
        }
        let mut fixed = Vec::with_capacity(request.frames.len());
        let mut restored = Vec::with_capacity(request.frames.len());
        for (entry, original) in manifest.frames.iter().zip(&request.frames) {
            match entry {
                Some(name) => {
                    fixed.push(load_png(&output.join(checked_name(name)?))?);
                    restored.push(true);
                }
                None => {
                    fixed.push(original.clone());
                    restored.push(false);
                }
            }
        }
        let status = if restored.iter().all(|&r| r) { manifest.status } else { RestoreStatus::Partial };
        Ok(RestorationResponse {
            fixed_frames: fixed,
            restored,
            backend,
            status,
            message: manifest.message,
        })
    }
}

impl Restorer for RemoteRestorer {
    fn name(&self) -> String {
        format!("remote:{}", self.jobs_dir.display())
    }

    fn restore_frames(&self, request: &RestorationRequest) -> RestorationResponse {
        let output = match self.publish(request) {
            Ok(o) => o,
            Err(e) => return RestorationResponse::failed(self.name(), format!("publishing job: {e}")),
        };
        let deadline = Instant::now() + self.timeout;
        let response = output.join(RESPONSE_FILE);
        loop {
            if response.exists() {
                return self
                    .collect(request, &output)
                    .unwrap_or_else(|e| RestorationResponse::failed(self.name(), format!("reading response: {e}")));
            }
            let now = Instant::now();
            if now >= deadline {
                return RestorationResponse::failed(
                    self.name(),
                    format!("timed out after {:.1} s waiting for {}", self.timeout.as_secs_f64(), response.display()),
                );
            }
            std::thread::sleep(self.poll_interval.min(deadline - now));
        }
    }
}

/// Server side of the directory exchange: answers pending jobs with any
/// in-process backend.
#[derive(Clone, Debug)]
pub struct RemoteWorker {
    pub jobs_dir: PathBuf,
    pub poll_interval: Duration,
}

/// Running worker thread; stopped and joined on [`WorkerHandle::stop`] or drop.
pub struct WorkerHandle {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl WorkerHandle {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for WorkerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl RemoteWorker {
    pub fn new(jobs_dir: impl Into<PathBuf>, poll_interval: Duration) -> Self {
        Self { jobs_dir: jobs_dir.into(), poll_interval }
    }

    /// Jobs with a request but no response yet, in path order.
    pub fn pending_jobs(&self) -> Vec<PathBuf> {
        let mut jobs = Vec::new();
        let Ok(scenes) = std::fs::read_dir(&self.jobs_dir) else {
            return jobs;
        };
        for scene in scenes.flatten() {
            let Ok(rounds) = std::fs::read_dir(scene.path()) else { continue };
            for round in rounds.flatten() {
                let job = round.path();
                if job.join("in").join(REQUEST_FILE).exists() && !job.join("out").join(RESPONSE_FILE).exists() {
                    jobs.push(job);
                }
            }
        }
        jobs.sort();
        jobs
    }

    /// Answer every pending job once; returns the number answered.
    pub fn poll_once(&self, backend: &dyn Restorer) -> Result<usize, RestoreError> {
        let jobs = self.pending_jobs();
        for job in &jobs {
            let output = job.join("out");
            std::fs::create_dir_all(&output).map_err(|e| IoError::file(&output, e))?;
            let manifest = match load_request(&job.join("in")) {
                Ok(request) => match restore(&request, backend) {
                    Ok(resp) => write_frames(&output, &resp)?,
                    Err(e) => failure_manifest(backend, e.to_string()),
                },
                Err(e) => failure_manifest(backend, e.to_string()),
            };
            write_json(&output.join(RESPONSE_FILE), &manifest)?;
        }
        Ok(jobs.len())
    }

    /// Serve jobs on a background thread until the handle is stopped.
    pub fn spawn(self, backend: Arc<dyn Restorer>) -> WorkerHandle {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = std::thread::spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                if let Err(e) = self.poll_once(backend.as_ref()) {
                    log::warn!("restore worker: {e}");
                }
                std::thread::sleep(self.poll_interval);
            }
        });
        WorkerHandle { stop, thread: Some(thread) }
    }

    /// Loopback responder that echoes every frame back unchanged.
    pub fn spawn_echo(self) -> WorkerHandle {
        self.spawn(Arc::new(super::IdentityRestorer))
    }
}

fn failure_manifest(backend: &dyn Restorer, message: String) -> ResponseManifest {
    ResponseManifest {
        backend: backend.name(),
        status: RestoreStatus::Failed,
        frames: Vec::new(),
        message: Some(message),
    }
}

fn write_frames(output: &Path, resp: &RestorationResponse) -> Result<ResponseManifest, IoError> {
    let mut frames = Vec::with_capacity(resp.fixed_frames.len());
    if resp.status != RestoreStatus::Failed {
        for (i, img) in resp.fixed_frames.iter().enumerate() {
            if resp.restored.get(i).copied().unwrap_or(false) {
                let name = format!("fixed_{i:03}.png");
                save_png(&output.join(&name), img)?;
                frames.push(Some(name));
            } else {
                frames.push(None);
            }
        }
    }
    Ok(ResponseManifest {
        backend: resp.backend.clone(),
        status: resp.status,
        frames,
        message: resp.message.clone(),
    })
}

fn load_request(input: &Path) -> Result<RestorationRequest, RestoreError> {
    let manifest: RequestManifest = read_json(&input.join(REQUEST_FILE))?;
    let invalid = |m: &str| RestoreError::InvalidRequest(m.to_string());
    if manifest.poses.len() != manifest.frames.len() {
        return Err(invalid("pose and frame lists differ in length"));
    }
    if manifest.ref_poses.len() != 2 || manifest.ref_images.len() != 2 {
        return Err(invalid("exactly two references are required"));
    }
    let poses = |entries: &[CameraEntry]| -> Result<Vec<CameraPose>, RestoreError> {
        entries
            .iter()
            .map(|e| e.to_pose().map_err(|err| RestoreError::InvalidRequest(err.to_string())))
            .collect()
    };
    let images = |names: &[String]| -> Result<Vec<Image>, RestoreError> {
        names
            .iter()
            .map(|n| Ok(load_png(&input.join(checked_name(n)?))?))
            .collect()
    };
    let ref_poses = poses(&manifest.ref_poses)?;
    let ref_images = images(&manifest.ref_images)?;
    Ok(RestorationRequest {
        scene_id: manifest.scene_id,
        round: manifest.round,
        frames: images(&manifest.frames)?,
        frame_poses: poses(&manifest.poses)?,
        ref_images: [ref_images[0].clone(), ref_images[1].clone()],
        ref_poses: [ref_poses[0].clone(), ref_poses[1].clone()],
    })
}

#[cfg(test)]
mod tests {
    use super::super::testing::request;
    use super::*;

    const FAST: Duration = Duration::from_millis(5);

    struct DropSecond;
    impl Restorer for DropSecond {
        fn name(&self) -> String {
            "drop-second".into()
        }
        fn restore_frames(&self, r: &RestorationRequest) -> RestorationResponse {
            let mut resp = RestorationResponse::ok(self.name(), r.frames.clone());
            resp.restored[1] = false;
            resp.status = RestoreStatus::Partial;
            resp
        }
    }

    #[test]
    fn echo_round_trip_is_lossless_on_png_frames() {
        let dir = tempfile::tempdir().unwrap();
        let worker = RemoteWorker::new(dir.path(), FAST).spawn_echo();
        let req = request(3);
        let remote = RemoteRestorer::new(dir.path()).with_timing(FAST, Duration::from_secs(30));
        let resp = restore(&req, &remote).unwrap();
        worker.stop();
        assert_eq!(resp.status, RestoreStatus::Ok, "{:?}", resp.message);
        let quantized: Vec<_> = req.frames.iter().map(Image::quantized).collect();
        assert_eq!(resp.fixed_frames, quantized);
        let job = dir.path().join("demo").join("1");
        for i in 0..3 {
            let sent = std::fs::read(job.join(format!("in/frame_{i:03}.png"))).unwrap();
            let back = std::fs::read(job.join(format!("out/fixed_{i:03}.png"))).unwrap();
            assert_eq!(sent, back);
        }
        let manifest: RequestManifest = read_json(&job.join("in/request.json")).unwrap();
        assert_eq!(manifest.poses[2].pose_id, req.frame_poses[2].pose_id);
    }

    #[test]
    fn times_out_without_a_worker() {
        let dir = tempfile::tempdir().unwrap();
        let remote = RemoteRestorer::new(dir.path()).with_timing(FAST, Duration::from_millis(40));
        let resp = restore(&request(1), &remote).unwrap();
        assert_eq!(resp.status, RestoreStatus::Failed);
        assert!(resp.message.unwrap().contains("timed out"));
    }

    #[test]
    fn partial_responses_keep_unrestored_frames() {
        let dir = tempfile::tempdir().unwrap();
        let worker = RemoteWorker::new(dir.path(), FAST).spawn(Arc::new(DropSecond));
        let req = request(3);
        let remote = RemoteRestorer::new(dir.path()).with_timing(FAST, Duration::from_secs(30));
        let resp = restore(&req, &remote).unwrap();
        drop(worker);
        assert_eq!(resp.status, RestoreStatus::Partial);
        assert_eq!(resp.restored, vec![true, false, true]);
        assert_eq!(resp.fixed_frames[1], req.frames[1]);
        assert_eq!(resp.usable_frames().map(|(i, _)| i).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn worker_reports_failures_in_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("s/0/in");
        std::fs::create_dir_all(&input).unwrap();
        std::fs::write(input.join(REQUEST_FILE), b"{\"scene_id\":\"s\"}").unwrap();
        let worker = RemoteWorker::new(dir.path(), FAST);
        assert_eq!(worker.poll_once(&super::super::IdentityRestorer).unwrap(), 1);
        let resp: ResponseManifest = read_json(&dir.path().join("s/0/out/response.json")).unwrap();
        assert_eq!(resp.status, RestoreStatus::Failed);
        assert_eq!(worker.pending_jobs().len(), 0);
    }
}
