use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// What the numbers in a [`DepthMap`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DepthConvention {
    /// Meters along the optical axis.
    MetricMeters,
    /// Unknown affine transform of depth.
    RelativeDepth,
    /// Unknown affine transform of inverse depth (disparity-like).
    RelativeInverseDepth,
}

impl DepthConvention {
    pub fn name(self) -> &'static str {
        match self {
            Self::MetricMeters => "metric-meters",
            Self::RelativeDepth => "relative-depth",
            Self::RelativeInverseDepth => "relative-inverse-depth",
        }
    }
}

/// Row-major depth raster. A value of exactly 0 marks a pixel without data.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
    convention: DepthConvention,
}

impl DepthMap {
    pub const INVALID: f64 = 0.0;

    pub fn new(width: u32, height: u32, values: Vec<f64>, convention: DepthConvention) -> Result<Self> {
        if width as usize * height as usize != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{}x{} raster needs {} values, got {}",
                width,
                height,
                width as usize * height as usize,
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("depth value {v} at index {i} is not finite and >= 0")));
        }
        Ok(Self { width, height, values, convention })
    }

    pub fn filled(width: u32, height: u32, value: f64, convention: DepthConvention) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width as usize * height as usize], convention)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn convention(&self) -> DepthConvention {
        self.convention
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, col: u32, row: u32) -> Option<f64> {
        if col < self.width && row < self.height {
            Some(self.values[row as usize * self.width as usize + col as usize])
        } else {
            None
        }
    }

    pub fn set(&mut self, col: u32, row: u32, value: f64) {
        assert!(value.is_finite() && value >= 0.0, "depth must be finite and >= 0");
        let w = self.width as usize;
        self.values[row as usize * w + col as usize] = value;
    }

    pub fn is_valid_value(v: f64) -> bool {
        v > 0.0
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| Self::is_valid_value(**v)).count()
    }

    pub fn same_size(&self, other: &DepthMap) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimensions {
                got_w: other.width,
                got_h: other.height,
                want_w: self.width,
                want_h: self.height,
            });
        }
        Ok(())
    }

    pub fn require(&self, convention: DepthConvention) -> Result<()> {
        if self.convention != convention {
            return Err(Error::Convention { expected: convention.name(), found: self.convention.name() });
        }
        Ok(())
    }
}
