use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use fruitlet_core::{DepthMap, PhaseTiming, PoseDetection};

use super::{elapsed_ms, missing, threshold_and_sort, BackendConfig, DepthBackend, Frame, PoseBackend};
use crate::formats::{depth::load_depth, pose::parse_pose_file};
use crate::Result;

/// Replays `<dir>/<image_id>.txt` pose files and `<dir>/<image_id>.pfm`
/// (or `.png`) depth files.
#[derive(Debug, Clone)]
pub struct FileOracle {
    cfg: BackendConfig,
}

impl FileOracle {
    pub fn new(cfg: BackendConfig) -> Self {
        Self { cfg }
    }

    fn file(&self, image_id: &str, ext: &str) -> PathBuf {
        self.cfg.path.join(format!("{image_id}.{ext}"))
    }
}

impl PoseBackend for FileOracle {
    fn detect_pose(&mut self, frame: &Frame) -> Result<(Vec<PoseDetection>, PhaseTiming)> {
        frame.check()?;
        let path = self.file(&frame.image_id, "txt");
        let t0 = Instant::now();
        let text = fs::read_to_string(&path).map_err(|_| missing(frame, &path))?;
        let raw = parse_pose_file(&text, &frame.image_id).map_err(|e| frame.fail(format!("{}: {e}", path.display())))?;
        let inference_ms = elapsed_ms(t0);
        let t1 = Instant::now();
        let dets = threshold_and_sort(raw, self.cfg.confidence_threshold);
        Ok((dets, PhaseTiming::new(0.0, inference_ms, elapsed_ms(t1))))
    }
}

impl DepthBackend for FileOracle {
    fn estimate_depth(&mut self, frame: &Frame) -> Result<(DepthMap, PhaseTiming)> {
        frame.check()?;
        let path = ["pfm", "png"]
            .iter()
            .map(|ext| self.file(&frame.image_id, ext))
            .find(|p| p.is_file())
            .ok_or_else(|| missing(frame, &self.file(&frame.image_id, "pfm")))?;
        let t0 = Instant::now();
        let depth = load_depth(&path, self.cfg.depth_convention, Some((frame.width, frame.height)))
            .map_err(|e| frame.fail(e.to_string()))?;
        Ok((depth, PhaseTiming::new(0.0, elapsed_ms(t0), 0.0)))
    }
}
