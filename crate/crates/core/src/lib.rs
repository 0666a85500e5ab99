//! Numerical core for unsupervised clustering of 3-phase voltage/current
//! fault recordings.
//!
//! Everything here is pure computation over in-memory buffers and builds
//! without `std` (an allocator is required). File formats, the pipeline
//! driver, the CLI and the labeling HTTP service live in the `faultclust`
//! crate.
//!
//! Stages, in pipeline order:
//!
//! - [`waveform`]: the record/dataset data model.
//! - [`preprocess`]: min/max normalization, additive seasonal decomposition,
//!   zero-signal indicators and anomaly flags (labeling overlays only).
//! - [`spectral`]: FFT magnitude features per channel, assembled per record.
//! - [`pca`], [`tsne`], [`reduce`]: dimensionality reduction.
//! - [`kmeans`]: Lloyd iterations with k-means++ seeding, elbow and
//!   silhouette helpers.
//! - [`labels`], [`metrics`]: expert label vocabulary, contingency tables,
//!   purity/entropy and aggregate reports.
//! - [`synth`]: labeled synthetic fault generator for end-to-end checks.
//! - [`window`]: min/max decimation and zero-sequence traces for viewers.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the textbook formulations of the numerical kernels.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod kmeans;
pub mod labels;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod pca;
pub mod preprocess;
pub mod reduce;
pub mod rng;
pub mod spectral;
pub mod synth;
pub mod tsne;
pub mod waveform;
pub mod window;

pub use error::{Error, Result};
pub use matrix::Matrix;
