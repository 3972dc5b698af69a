//! Viewpoint estimation toolkit built around circular azimuth labels.
//!
//! The crate bundles the pieces needed to study angle classification at desk
//! scale:
//!
//! - [`circular`]: ring arithmetic on azimuth bins and the Von Mises weight matrix.
//! - [`loss`]: the weighted SoftMax loss with exact gradients and its minimum.
//! - [`glyph`]: a deterministic rotated-glyph rasterizer used as a toy dataset.
//! - [`trainer`]: a seeded mini-batch SGD classifier (linear or one hidden layer).
//! - [`metrics`]: median angular error, per-angle accuracy and its entropy.
//! - [`rendergen`]: render job specifications for an external renderer.
//! - [`augment`]: the image augmentation pipeline with replayable audit records.
//! - [`balance`]: adaptive and random balancing of label histograms.
//! - [`cli`]: the `viewpoint` command-line front end.

pub mod augment;
pub mod balance;
pub mod circular;
pub mod cli;
pub mod config;
pub mod error;
pub mod glyph;
pub mod loss;
pub mod manifest;
pub mod metrics;
pub mod rendergen;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
