//! Length accuracy against caliper ground truth.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLength {
    pub image_id: String,
    pub fruit_id: String,
    pub length_mm: f64,
}

/// Where the metric depth used for a measurement came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DepthMethod {
    RealSense,
    Dpt,
    DepthAnythingV2,
}

impl DepthMethod {
    pub const ALL: [DepthMethod; 3] = [Self::RealSense, Self::Dpt, Self::DepthAnythingV2];

    pub fn name(self) -> &'static str {
        match self {
            Self::RealSense => "realsense",
            Self::Dpt => "dpt",
            Self::DepthAnythingV2 => "depth-anything-v2",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::RealSense => "Intel RealSense",
            Self::Dpt => "DPT",
            Self::DepthAnythingV2 => "Depth Anything V2",
        }
    }
}

impl core::str::FromStr for DepthMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown depth method `{s}`")))
    }
}

impl core::fmt::Display for DepthMethod {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthRecord {
    pub image_id: String,
    pub fruit_id: String,
    pub predicted_mm: f64,
    pub actual_mm: f64,
    pub method: DepthMethod,
}

impl LengthRecord {
    pub fn residual_mm(&self) -> f64 {
        self.predicted_mm - self.actual_mm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthErrorStats {
    pub rmse_mm: f64,
    pub mae_mm: f64,
    pub n: usize,
    /// `predicted - actual` per record, input order.
    pub residuals: Vec<f64>,
}

pub fn length_error_stats(records: &[LengthRecord]) -> Result<LengthErrorStats> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let residuals: Vec<f64> = records.iter().map(LengthRecord::residual_mm).collect();
    let n = residuals.len() as f64;
    let mse = residuals.iter().map(|r| r * r).sum::<f64>() / n;
    let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n;
    let rmse = libm::sqrt(mse);
    // Rounding can leave rmse a hair under mae when every |residual| is equal.
    let rmse = rmse.max(mae);
    Ok(LengthErrorStats { rmse_mm: rmse, mae_mm: mae, n: residuals.len(), residuals })
}
