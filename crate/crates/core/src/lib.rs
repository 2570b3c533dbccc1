//! Pure algorithms behind the fruitlet measurement pipeline.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - [`camera`]: pinhole intrinsics from field-of-view specs, back-projection
//!   and projection.
//! - [`detection`] and [`depth`]: the data model shared by every stage.
//! - [`align`] and [`reconstruct`]: relative-to-metric depth alignment and
//!   point-cloud synthesis.
//! - [`measure`]: calyx-to-peduncle chord length from pose keypoints.
//! - [`metrics`], [`lengths`], [`boxplot`], [`timing`]: evaluation.
//!
//! Everything touching files, clocks or model runtimes lives in the
//! `fruitlet-metric` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod align;
pub mod boxplot;
pub mod camera;
pub mod cloud;
pub mod depth;
pub mod detection;
mod error;
pub mod lengths;
pub mod measure;
pub mod metrics;
pub mod reconstruct;
pub mod timing;

pub use align::{fit_fixed_distance, fit_scale, to_metric, AlignSpace, ScaleAlignment};
pub use camera::{backproject, intrinsics_from_fov, project, CameraIntrinsics, Point3};
pub use cloud::{PointCloud, Rgb};
pub use depth::{DepthConvention, DepthMap};
pub use detection::{BBox, Keypoint, PoseDetection, Visibility};
pub use error::{Error, Result};
pub use lengths::{length_error_stats, DepthMethod, GroundTruthLength, LengthErrorStats, LengthRecord};
pub use measure::{
    match_to_ground_truth, measure_length, sample_keypoint_depth, KeypointDepth, LocatedTruth, MeasuredPose, TruthPairing,
};
pub use reconstruct::{depth_to_cloud, RangeFilter, RgbView};
pub use timing::{mean_phase_timing, PhaseTiming};
