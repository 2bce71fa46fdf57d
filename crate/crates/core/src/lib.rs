//! Dynamic/static feature-point discrimination and coarse-to-fine robust
//! stereo visual odometry.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: pinhole projection, SE(3) poses, essential matrices.
//! - [`features`]: the three geometric/photometric error features of a
//!   correspondence (intensity, epipolar and reprojection error).
//! - [`depth_filter`]: depth-band rejection of background points inside a
//!   detection box.
//! - [`mlp`]: the 3-10-10-2 discriminator with training, persistence and
//!   batch prediction.
//! - [`baselines`] and [`metrics`]: threshold classifiers and the confusion
//!   matrix metrics used to compare them with the MLP.
//! - [`dataset`]: the feature-point record format, splits, and a synthetic
//!   stereo scene generator.
//! - [`pipeline`]: robust pose estimation, the coarse/classify/fine frame
//!   pipeline and trajectory error.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataset;
pub mod depth_filter;
mod error;
pub mod features;
pub mod geometry;
pub mod metrics;
pub mod mlp;
pub mod pipeline;

pub use error::{Error, Result};
