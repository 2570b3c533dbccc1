//! Major-axis length of a fruitlet from its calyx and peduncle keypoints.

use alloc::string::String;
use alloc::vec::Vec;

use crate::lengths::{DepthMethod, GroundTruthLength, LengthRecord};
use crate::{backproject, CameraIntrinsics, DepthConvention, DepthMap, Error, Point3, PoseDetection, Result};

/// Side length of the depth sampling window around each keypoint.
pub const DEFAULT_WINDOW: u32 = 5;
/// Minimum share of window pixels that must carry depth.
pub const MIN_VALID_FRACTION: f64 = 0.2;

/// Median of a non-empty slice; sorts in place. Even counts average the
/// two middle values.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointDepth {
    pub depth_m: f64,
    /// Valid pixels over window pixels (after clipping to the image).
    pub valid_fraction: f64,
}

/// Median depth of the `window` x `window` neighbourhood centred on the
/// pixel nearest to `(u, v)`.
pub fn sample_keypoint_depth(depth: &DepthMap, u: f64, v: f64, window: u32) -> Result<KeypointDepth> {
    depth.require(DepthConvention::MetricMeters)?;
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(alloc::format!("window {window} must be odd and >= 1")));
    }
    let (w, h) = (depth.width() as i64, depth.height() as i64);
    if !(u >= -0.5 && v >= -0.5 && u <= w as f64 - 0.5 && v <= h as f64 - 0.5) {
        return Err(Error::OutOfBounds { u, v, width: depth.width(), height: depth.height() });
    }
    let col = (libm::round(u) as i64).clamp(0, w - 1);
    let row = (libm::round(v) as i64).clamp(0, h - 1);
    let half = (window / 2) as i64;
    let mut valid = Vec::with_capacity((window * window) as usize);
    let mut total = 0usize;
    for r in (row - half).max(0)..=(row + half).min(h - 1) {
        for c in (col - half).max(0)..=(col + half).min(w - 1) {
            total += 1;
            let d = depth.values()[(r * w + c) as usize];
            if DepthMap::is_valid_value(d) {
                valid.push(d);
            }
        }
    }
    let fraction = valid.len() as f64 / total as f64;
    if valid.is_empty() || fraction < MIN_VALID_FRACTION {
        return Err(Error::InsufficientDepth { valid: valid.len(), total });
    }
    Ok(KeypointDepth { depth_m: median(&mut valid), valid_fraction: fraction })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredPose {
    pub detection: PoseDetection,
    pub calyx_3d: Point3,
    pub peduncle_3d: Point3,
    pub length_mm: f64,
    /// Valid-pixel fraction of the calyx and peduncle sampling windows.
    pub depth_sample_quality: [f64; 2],
}

impl MeasuredPose {
    /// True when either keypoint was labeled as occluded.
    pub fn has_occluded_keypoint(&self) -> bool {
        self.detection.keypoints().iter().any(|k| k.visibility == crate::Visibility::Occluded)
    }
}

/// Straight-line 3D distance between calyx and peduncle, in millimeters.
pub fn measure_length(det: &PoseDetection, depth: &DepthMap, k: &CameraIntrinsics) -> Result<MeasuredPose> {
    if !det.calyx.visibility.is_labeled() {
        return Err(Error::MissingKeypoint("calyx"));
    }
    if !det.peduncle.visibility.is_labeled() {
        return Err(Error::MissingKeypoint("peduncle"));
    }
    depth.require(DepthConvention::MetricMeters)?;
    if depth.width() != k.width || depth.height() != k.height {
        return Err(Error::Dimensions { got_w: depth.width(), got_h: depth.height(), want_w: k.width, want_h: k.height });
    }
    let lift = |x: f64, y: f64| -> Result<(Point3, f64)> {
        let (u, v) = k.denormalize(x, y);
        let s = sample_keypoint_depth(depth, u, v, DEFAULT_WINDOW)?;
        Ok((backproject(u, v, s.depth_m, k)?, s.valid_fraction))
    };
    let (calyx_3d, qc) = lift(det.calyx.x, det.calyx.y)?;
    let (peduncle_3d, qp) = lift(det.peduncle.x, det.peduncle.y)?;
    let length_mm = 1000.0 * calyx_3d.distance(&peduncle_3d);
    if !(length_mm.is_finite() && length_mm > 0.0) {
        return Err(Error::DegeneratePose);
    }
    Ok(MeasuredPose { detection: det.clone(), calyx_3d, peduncle_3d, length_mm, depth_sample_quality: [qc, qp] })
}

/// Ground-truth length with the pixel location of its annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct LocatedTruth {
    pub truth: GroundTruthLength,
    pub center_px: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthPairing {
    pub records: Vec<LengthRecord>,
    /// Indices into the measured list.
    pub unmatched_measured: Vec<usize>,
    /// Indices into the truth list.
    pub unmatched_truth: Vec<usize>,
}

/// Pair measurements with truth records of one image, closest box center
/// first. Each side is used at most once; records come out in pairing order.
pub fn match_to_ground_truth(
    measured: &[MeasuredPose],
    truth: &[LocatedTruth],
    image_id: &str,
    k: &CameraIntrinsics,
    method: DepthMethod,
) -> TruthPairing {
    let m_idx: Vec<usize> = (0..measured.len()).filter(|&i| measured[i].detection.image_id == image_id).collect();
    let t_idx: Vec<usize> = (0..truth.len()).filter(|&j| truth[j].truth.image_id == image_id).collect();
    let mut candidates = Vec::with_capacity(m_idx.len() * t_idx.len());
    for &i in &m_idx {
        let b = &measured[i].detection.bbox;
        let (u, v) = k.denormalize(b.cx, b.cy);
        for &j in &t_idx {
            let (tu, tv) = truth[j].center_px;
            candidates.push(((u - tu) * (u - tu) + (v - tv) * (v - tv), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut m_used = alloc::vec![false; measured.len()];
    let mut t_used = alloc::vec![false; truth.len()];
    let mut out = TruthPairing::default();
    for (_, i, j) in candidates {
        if m_used[i] || t_used[j] {
            continue;
        }
        m_used[i] = true;
        t_used[j] = true;
        out.records.push(LengthRecord {
            image_id: String::from(image_id),
            fruit_id: truth[j].truth.fruit_id.clone(),
            predicted_mm: measured[i].length_mm,
            actual_mm: truth[j].truth.length_mm,
            method,
        });
    }
    out.unmatched_measured = m_idx.into_iter().filter(|&i| !m_used[i]).collect();
    out.unmatched_truth = t_idx.into_iter().filter(|&j| !t_used[j]).collect();
    out
}
