//! Per-image processing time split into the three pipeline phases.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTiming {
    pub preprocess_ms: f64,
    pub inference_ms: f64,
    pub postprocess_ms: f64,
}

impl PhaseTiming {
    pub const fn new(preprocess_ms: f64, inference_ms: f64, postprocess_ms: f64) -> Self {
        Self { preprocess_ms, inference_ms, postprocess_ms }
    }

    pub fn total_ms(&self) -> f64 {
        self.preprocess_ms + self.inference_ms + self.postprocess_ms
    }
}

/// Field-wise arithmetic mean, i.e. total time over images processed.
pub fn mean_phase_timing(timings: &[PhaseTiming]) -> Result<PhaseTiming> {
    if timings.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = timings.len() as f64;
    let sum = timings.iter().fold(PhaseTiming::default(), |acc, t| {
        PhaseTiming::new(acc.preprocess_ms + t.preprocess_ms, acc.inference_ms + t.inference_ms, acc.postprocess_ms + t.postprocess_ms)
    });
    Ok(PhaseTiming::new(sum.preprocess_ms / n, sum.inference_ms / n, sum.postprocess_ms / n))
}
