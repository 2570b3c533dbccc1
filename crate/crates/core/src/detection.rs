//! Detections and annotations in normalized image coordinates.

use alloc::format;
use alloc::string::String;

use crate::{Error, Result};

/// Axis-aligned box, normalized center format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    /// Build a box, clamping its extent to the unit square.
    ///
    /// Values already inside the frame are kept bit-for-bit.
    pub fn clamped(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::InvalidArgument(format!("box size {w}x{h} must be positive")));
        }
        let (cx, w) = clamp_axis(cx, w);
        let (cy, h) = clamp_axis(cy, h);
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::InvalidArgument("box lies outside the image after clamping".into()));
        }
        Ok(Self { cx, cy, w, h })
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        Self::clamped((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)
    }

    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

fn clamp_axis(c: f64, size: f64) -> (f64, f64) {
    let (lo, hi) = (c - size / 2.0, c + size / 2.0);
    if lo >= 0.0 && hi <= 1.0 {
        return (c, size);
    }
    let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
    ((lo + hi) / 2.0, hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Visibility {
    NotLabeled = 0,
    Occluded = 1,
    Visible = 2,
}

impl Visibility {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::NotLabeled),
            1 => Some(Self::Occluded),
            2 => Some(Self::Visible),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn is_labeled(self) -> bool {
        self != Self::NotLabeled
    }
}

/// Normalized keypoint; coordinates are meaningless when not labeled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visibility: Visibility,
}

impl Keypoint {
    pub const fn new(x: f64, y: f64, visibility: Visibility) -> Self {
        Self { x, y, visibility }
    }

    pub const fn unlabeled() -> Self {
        Self::new(0.0, 0.0, Visibility::NotLabeled)
    }
}

/// One fruitlet: a box plus calyx and peduncle keypoints.
///
/// Ground-truth annotations carry confidence 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseDetection {
    pub image_id: String,
    pub bbox: BBox,
    pub confidence: f64,
    pub calyx: Keypoint,
    pub peduncle: Keypoint,
}

impl PoseDetection {
    pub fn keypoints(&self) -> [Keypoint; 2] {
        [self.calyx, self.peduncle]
    }
}
