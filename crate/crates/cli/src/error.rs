use gsfix_core::bench::BenchError;
use gsfix_core::io::IoError;
use gsfix_core::pipeline::PipelineError;
use gsfix_core::raster::RenderError;
use gsfix_core::restore::RestoreError;
use gsfix_core::scene::SceneError;
use gsfix_core::trajectory::TrajectoryError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("gradient check failed: max relative error {0:e} exceeds tolerance {1:e}")]
    GradCheck(f64, f64),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::GradCheck(..) => "gradcheck",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Scene(_) => "scene",
            CliError::Render(_) => "render",
            CliError::Trajectory(_) => "trajectory",
            CliError::Restore(_) => "restore",
            CliError::Pipeline(_) => "pipeline",
            CliError::Bench(_) => "bench",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(IoError::Io(e))
    }
}
