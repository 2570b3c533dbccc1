//! File formats, inference backends and the command pipeline around
//! `fruitlet-core`.
//!
//! - [`formats`]: pose label files, depth rasters (16-bit PNG, PFM), PLY
//!   clouds, caliper ground truth, split manifests and `lengths.csv`.
//! - [`inference`]: pose and depth backends with per-phase timing.
//! - [`config`] and [`commands`]: the `fruitlet-metric` CLI.
//! - [`report`]: metrics tables, box-plot SVG and the markdown report.

pub mod commands;
pub mod config;
mod error;
pub mod formats;
pub mod inference;
pub mod report;

pub use error::{Error, Result};
