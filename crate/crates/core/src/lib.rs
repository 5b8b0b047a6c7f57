//! Sparse-view Gaussian splatting toolkit with a restoration-in-the-loop
//! reconstruction scheduler.
//!
//! The crate is organized bottom-up:
//!
//! * [`scene`] – Gaussian primitives, cameras, covariance, SH color, EWA projection.
//! * [`raster`] – tiled forward renderer, brute-force reference renderer and the
//!   analytic backward pass.
//! * [`trajectory`] – pose interpolation and interpolation / ellipse /
//!   reference-guided camera paths.
//! * [`conditioning`] – reference-token fusion and injected cross-attention
//!   numerics at toy scale.
//! * [`optim`] – photometric losses, metrics, annealed objective, adaptive-moment
//!   updates and densification.
//! * [`restore`] – the frame restoration contract and its backends.
//! * [`pipeline`] – baseline fit and the iterative generative reconstruction loop.
//! * [`bench`] – artifact/clean pair builder and evaluation reports.
//! * [`io`] – PLY scenes, camera JSON, COLMAP points, PNG frames.

pub mod bench;
pub mod conditioning;
pub mod image;
pub mod io;
pub mod optim;
pub mod pipeline;
pub mod raster;
pub mod restore;
pub mod scene;
pub mod synthetic;
pub mod trajectory;

pub use crate::image::Image;
pub use crate::scene::{CameraPose, GaussianSplat, Intrinsics, Scene};
