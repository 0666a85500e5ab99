//! File formats, pipeline driver, CLI and labeling HTTP service around
//! [`faultclust_core`].
//!
//! - [`store`]: dataset manifest + `f32` blob, CSV import.
//! - [`csvio`]: CSV artifacts (features, embeddings, assignments, tables).
//! - [`labelstore`]: append-only JSON-lines label log.
//! - [`config`]: TOML pipeline configuration.
//! - [`pipeline`]: stage functions and the staged `run` driver.
//! - [`worksheet`]: per-cluster labeling draws.
//! - [`api`]: axum service for the labeling UI.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use faultclust_core as core;

pub mod api;
pub mod config;
pub mod csvio;
mod error;
pub mod labelstore;
pub mod pipeline;
pub mod store;
pub mod worksheet;

pub use error::{Error, Result};
