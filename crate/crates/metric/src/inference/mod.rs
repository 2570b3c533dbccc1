//! Uniform access to pose detectors and depth estimators.
//!
//! Two backends exist. The file oracle replays precomputed outputs from a
//! prediction directory and is what the test suite runs on. The ONNX backend
//! (feature `onnx`) executes exported models with tract.
//!
//! Every call reports a [`PhaseTiming`]. Pre-processing covers decode,
//! resize and normalization; post-processing covers decoding raw tensors,
//! confidence filtering, NMS and sorting.

mod file;
#[cfg(feature = "onnx")]
mod onnx;

use std::path::{Path, PathBuf};
use std::time::Instant;

use fruitlet_core::{DepthConvention, DepthMap, PhaseTiming, PoseDetection};
use image::RgbImage;
use serde::Deserialize;

use crate::{Error, Result};

pub use file::FileOracle;
#[cfg(feature = "onnx")]
pub use onnx::{OnnxDepth, OnnxPose};

/// Smallest image either backend accepts.
pub const MIN_IMAGE_SIDE: u32 = 32;

/// One image handed to a backend. File-oracle backends only need the id
/// and size; ONNX backends need the pixels.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub rgb: Option<RgbImage>,
}

impl Frame {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self { image_id: image_id.into(), width, height, rgb: None }
    }

    pub fn with_rgb(image_id: impl Into<String>, rgb: RgbImage) -> Self {
        let (width, height) = rgb.dimensions();
        Self { image_id: image_id.into(), width, height, rgb: Some(rgb) }
    }

    fn check(&self) -> Result<()> {
        if self.width < MIN_IMAGE_SIDE || self.height < MIN_IMAGE_SIDE {
            return Err(self.fail(format!(
                "image is {}x{}, backends need at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub(crate) fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Backend { image_id: self.image_id.clone(), msg: msg.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[serde(alias = "file")]
    FileOracle,
    Onnx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Prediction directory for the file oracle, model file for ONNX.
    pub path: PathBuf,
    /// Square network input side, pixels.
    pub input_size: u32,
    pub confidence_threshold: f64,
    pub iou_nms_threshold: f64,
    /// How the file oracle should read PFM depth files.
    pub depth_convention: DepthConvention,
}

impl BackendConfig {
    pub fn file_oracle(prediction_dir: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::FileOracle,
            path: prediction_dir.into(),
            input_size: 640,
            confidence_threshold: 0.25,
            iou_nms_threshold: 0.7,
            depth_convention: DepthConvention::RelativeInverseDepth,
        }
    }

    pub fn onnx(model_path: impl Into<PathBuf>, input_size: u32) -> Self {
        Self { kind: BackendKind::Onnx, path: model_path.into(), input_size, ..Self::file_oracle("") }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("confidence_threshold", self.confidence_threshold), ("iou_nms_threshold", self.iou_nms_threshold)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("{name} {t} outside [0, 1]")));
            }
        }
        if self.input_size < MIN_IMAGE_SIDE {
            return Err(Error::Config(format!("input_size {} below {MIN_IMAGE_SIDE}", self.input_size)));
        }
        let ok = match self.kind {
            BackendKind::FileOracle => self.path.is_dir(),
            BackendKind::Onnx => self.path.is_file(),
        };
        if !ok {
            return Err(Error::Config(format!("backend path {} does not exist", self.path.display())));
        }
        Ok(())
    }
}

pub trait PoseBackend: Send {
    /// Detections above the confidence threshold, highest confidence first.
    fn detect_pose(&mut self, frame: &Frame) -> Result<(Vec<PoseDetection>, PhaseTiming)>;
}

pub trait DepthBackend: Send {
    /// A depth raster the size of the frame.
    fn estimate_depth(&mut self, frame: &Frame) -> Result<(DepthMap, PhaseTiming)>;
}

pub fn open_pose_backend(cfg: &BackendConfig) -> Result<Box<dyn PoseBackend>> {
    cfg.validate()?;
    match cfg.kind {
        BackendKind::FileOracle => Ok(Box::new(FileOracle::new(cfg.clone()))),
        #[cfg(feature = "onnx")]
        BackendKind::Onnx => Ok(Box::new(OnnxPose::load(cfg)?)),
        #[cfg(not(feature = "onnx"))]
        BackendKind::Onnx => Err(Error::Config("built without the `onnx` feature".into())),
    }
}

pub fn open_depth_backend(cfg: &BackendConfig) -> Result<Box<dyn DepthBackend>> {
    cfg.validate()?;
    match cfg.kind {
        BackendKind::FileOracle => Ok(Box::new(FileOracle::new(cfg.clone()))),
        #[cfg(feature = "onnx")]
        BackendKind::Onnx => Ok(Box::new(OnnxDepth::load(cfg)?)),
        #[cfg(not(feature = "onnx"))]
        BackendKind::Onnx => Err(Error::Config("built without the `onnx` feature".into())),
    }
}

/// One-shot convenience over [`open_pose_backend`].
pub fn detect_pose(frame: &Frame, cfg: &BackendConfig) -> Result<(Vec<PoseDetection>, PhaseTiming)> {
    open_pose_backend(cfg)?.detect_pose(frame)
}

/// One-shot convenience over [`open_depth_backend`].
pub fn estimate_depth(frame: &Frame, cfg: &BackendConfig) -> Result<DepthMap> {
    Ok(open_depth_backend(cfg)?.estimate_depth(frame)?.0)
}

/// Confidence filter then stable sort, highest first.
pub(crate) fn threshold_and_sort(mut dets: Vec<PoseDetection>, threshold: f64) -> Vec<PoseDetection> {
    dets.retain(|d| d.confidence >= threshold);
    dets.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    dets
}

/// Greedy NMS over detections already sorted by confidence.
#[cfg(feature = "onnx")]
pub(crate) fn non_max_suppression(sorted: Vec<PoseDetection>, iou_threshold: f64) -> Vec<PoseDetection> {
    let mut kept: Vec<PoseDetection> = Vec::new();
    for d in sorted {
        if kept.iter().all(|k| fruitlet_core::metrics::iou(&k.bbox, &d.bbox) < iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Wall-clock milliseconds since `start`.
pub(crate) fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

pub(crate) fn missing(frame: &Frame, path: &Path) -> Error {
    frame.fail(format!("prediction file {} not found", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fruitlet_core::{BBox, Keypoint, Visibility};

    fn det(x: f64, conf: f64) -> PoseDetection {
        PoseDetection {
            image_id: "i".into(),
            bbox: BBox::clamped(x, 0.5, 0.1, 0.1).unwrap(),
            confidence: conf,
            calyx: Keypoint::unlabeled(),
            peduncle: Keypoint::new(x, 0.5, Visibility::Visible),
        }
    }

    #[test]
    fn threshold_then_sort() {
        let out = threshold_and_sort(vec![det(0.1, 0.4), det(0.3, 0.1), det(0.5, 0.9)], 0.25);
        let confs: Vec<f64> = out.iter().map(|d| d.confidence).collect();
        assert_eq!(confs, vec![0.9, 0.4]);
    }

    #[cfg(feature = "onnx")]
    #[test]
    fn nms_drops_overlaps() {
        let out = non_max_suppression(vec![det(0.5, 0.9), det(0.51, 0.8), det(0.2, 0.7)], 0.7);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].confidence, 0.7);
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = BackendConfig::file_oracle(dir.path());
        assert!(cfg.validate().is_ok());
        cfg.confidence_threshold = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(BackendConfig::file_oracle(dir.path().join("nope")).validate().is_err());
        assert!(BackendConfig::onnx(dir.path().join("m.onnx"), 640).validate().is_err());
    }

    #[test]
    fn tiny_frames_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = detect_pose(&Frame::new("small", 16, 64), &BackendConfig::file_oracle(dir.path())).unwrap_err();
        assert!(matches!(err, Error::Backend { ref image_id, .. } if image_id == "small"), "{err}");
    }
}
