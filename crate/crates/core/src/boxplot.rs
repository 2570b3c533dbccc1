//! Five-number summaries for box plots.
//!
//! Quantiles use linear interpolation between order statistics
//! (Hyndman and Fan type 7, the default of R and NumPy).

use alloc::vec::Vec;

use crate::{Error, Result};

/// Type-7 quantile of ascending `sorted` data, `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Most extreme observations within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Observations beyond the whiskers, ascending.
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut v = values.to_vec();
        v.sort_unstable_by(f64::total_cmp);
        let (q1, median, q3) = (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = || v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence);
        let whisker_low = inside().next().unwrap_or(q1);
        let whisker_high = inside().next_back().unwrap_or(q3);
        let outliers = v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect();
        Ok(Self { n: v.len(), q1, median, q3, whisker_low, whisker_high, outliers })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}
