//! Artifact/clean benchmark construction, per-scene evaluation and the
//! aggregate report tables.

mod build;
mod metrics;
mod report;

pub use build::{
    build_res_scene, evaluate_scene, load_benchmark_scene, load_candidates, load_external_scores, stride_indices,
    BenchmarkScene, DenseCapture, EvalPair, ExternalScores,
};
pub use metrics::{FrameMetrics, MetricsReport, ViewSplit};
pub use report::{aggregate_report, ReportRow, ReportTable};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark input: {0}")]
    Invalid(String),
    #[error("no candidate frame for pose `{0}`")]
    MissingCandidate(String),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
    #[error(transparent)]
    Optim(#[from] crate::optim::OptimError),
}
