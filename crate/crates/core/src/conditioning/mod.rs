//! Reference-token fusion and the injected cross-attention, at toy scale with
//! seeded random weights.
//!
//! Dimension contract: 3D geometric tokens have 2048 features, 2D semantic
//! tokens 1024, and both are projected to the 3072-wide view-token space.

mod attention;
mod fusion;
mod tokens;

pub use attention::{attention_probabilities, cross_attention, AttentionWeights};
pub use fusion::{layer_normalize, project_and_fuse, FusionProjector, LAYER_NORM_EPS};
pub use tokens::TokenMatrix;

use thiserror::Error;

pub const GEOMETRIC_DIM: usize = 2048;
pub const SEMANTIC_DIM: usize = 1024;
pub const FUSION_DIM: usize = 3072;

#[derive(Debug, Error)]
pub enum ConditioningError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite token value")]
    NonFinite,
    #[error("token file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
