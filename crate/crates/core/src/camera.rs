//! Pinhole camera model without lens distortion.
//!
//! Pixel coordinates place pixel centers on integers, so pixel `(col, row)`
//! sits at `(u, v) = (col, row)` and the image covers
//! `[-0.5, width - 0.5] x [-0.5, height - 0.5]`.

use alloc::format;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    /// Explicit intrinsics, e.g. factory calibration values.
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image size {}x{} must be non-zero",
                self.width, self.height
            )));
        }
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        if !(self.cx > 0.0 && self.cx < w && self.cy > 0.0 && self.cy < h) {
            return Err(Error::InvalidArgument(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Whether `(u, v)` falls on the image, pixel-center convention.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u <= self.width as f64 - 0.5 && v <= self.height as f64 - 0.5
    }

    /// Convert a normalized `[0, 1]` image coordinate (corner convention, as
    /// used by annotation files) into pixel coordinates.
    pub fn denormalize(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.width as f64 - 0.5, y * self.height as f64 - 0.5)
    }

    /// Inverse of [`CameraIntrinsics::denormalize`].
    pub fn normalize(&self, u: f64, v: f64) -> (f64, f64) {
        ((u + 0.5) / self.width as f64, (v + 0.5) / self.height as f64)
    }
}

/// Camera-frame point in meters, z along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        libm::sqrt(dx * dx + dy * dy + dz * dz)
    }

    pub fn scale(&self, a: f64) -> Point3 {
        Point3::new(self.x * a, self.y * a, self.z * a)
    }
}

/// Intrinsics for a camera with principal point at the image center and
/// focal lengths derived independently from the horizontal and vertical
/// fields of view (degrees).
pub fn intrinsics_from_fov(width: u32, height: u32, hfov_deg: f64, vfov_deg: f64) -> Result<CameraIntrinsics> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!("image size {width}x{height} must be non-zero")));
    }
    for (name, fov) in [("hfov", hfov_deg), ("vfov", vfov_deg)] {
        if !(fov > 0.0 && fov < 180.0) {
            return Err(Error::InvalidArgument(format!("{name} {fov} deg outside (0, 180)")));
        }
    }
    let (w, h) = (width as f64, height as f64);
    let fx = (w / 2.0) / libm::tan(hfov_deg.to_radians() / 2.0);
    let fy = (h / 2.0) / libm::tan(vfov_deg.to_radians() / 2.0);
    CameraIntrinsics::new(fx, fy, w / 2.0, h / 2.0, width, height)
}

pub fn backproject(u: f64, v: f64, depth_m: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !(depth_m.is_finite() && depth_m > 0.0) {
        return Err(Error::InvalidDepth(depth_m));
    }
    if !k.contains(u, v) {
        return Err(Error::OutOfBounds { u, v, width: k.width, height: k.height });
    }
    Ok(Point3::new((u - k.cx) * depth_m / k.fx, (v - k.cy) * depth_m / k.fy, depth_m))
}

pub fn project(p: &Point3, k: &CameraIntrinsics) -> Result<(f64, f64)> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera(p.z));
    }
    Ok((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}
