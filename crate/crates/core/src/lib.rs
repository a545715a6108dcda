//! Age regression by delta-age AdaIN transfer against learned per-age style
//! statistics.
//!
//! The crate is organised bottom-up:
//!
//! * [`nn`]: tensors, reverse-mode differentiation, layers, loss, Adam.
//! * [`model`]: face encoder, binary age codes and their mapping MLP, the
//!   delta transfer operations and the age decoder.
//! * [`data`]: deterministic synthetic aging dataset, augmentation and the
//!   on-disk container.
//! * [`train`]: training loop, metrics, ablation, timing and style-table export.
//! * [`config`]: the flat `key = value` run configuration.

pub mod config;
pub mod data;
mod error;
pub mod exec;
pub mod model;
pub mod nn;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
