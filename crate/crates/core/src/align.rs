//! Scale/shift alignment of relative depth onto metric depth.
//!
//! Monocular depth networks emit depth (or inverse depth) only up to an
//! unknown affine transform. [`fit_scale`] recovers that transform by
//! ordinary least squares against a sparse metric reference, and
//! [`to_metric`] applies it.

use alloc::format;
use alloc::vec::Vec;

use crate::{DepthConvention, DepthMap, Error, Result};

/// Depth beyond this is outside the sensor's working range and is dropped.
pub const MAX_DEPTH_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignSpace {
    Depth,
    InverseDepth,
}

impl AlignSpace {
    pub fn for_convention(convention: DepthConvention) -> Self {
        match convention {
            DepthConvention::RelativeInverseDepth => Self::InverseDepth,
            DepthConvention::MetricMeters | DepthConvention::RelativeDepth => Self::Depth,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Depth => "depth",
            Self::InverseDepth => "inverse-depth",
        }
    }

    /// Metric depth for a fitted value `s * r + t`; `None` when undefined.
    fn to_depth(self, fitted: f64) -> Option<f64> {
        let d = match self {
            Self::Depth => fitted,
            Self::InverseDepth => 1.0 / fitted,
        };
        (d.is_finite() && d > 0.0).then_some(d)
    }
}

/// `metric ~ s * relative + t` in the given space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleAlignment {
    pub scale: f64,
    pub shift: f64,
    pub space: AlignSpace,
    /// RMS difference to the reference, meters.
    pub residual_rmse: f64,
    pub inlier_count: usize,
}

impl ScaleAlignment {
    /// Alignment of a map that is already metric.
    pub fn identity(inlier_count: usize) -> Self {
        Self { scale: 1.0, shift: 0.0, space: AlignSpace::Depth, residual_rmse: 0.0, inlier_count }
    }

    pub fn apply(&self, relative: f64) -> Option<f64> {
        self.space.to_depth(self.scale * relative + self.shift)
    }
}

/// Sampled `(relative, metric)` pairs where both maps carry data.
fn sample_pairs(relative: &DepthMap, reference: &DepthMap, stride: u32) -> Vec<(f64, f64)> {
    let stride = stride.max(1) as usize;
    let w = relative.width() as usize;
    let (rv, mv) = (relative.values(), reference.values());
    let mut pairs = Vec::new();
    for row in (0..relative.height() as usize).step_by(stride) {
        for col in (0..w).step_by(stride) {
            let i = row * w + col;
            if DepthMap::is_valid_value(rv[i]) && DepthMap::is_valid_value(mv[i]) {
                pairs.push((rv[i], mv[i]));
            }
        }
    }
    pairs
}

fn residual_rmse(align: &ScaleAlignment, pairs: &[(f64, f64)]) -> f64 {
    let sum: f64 = pairs
        .iter()
        .map(|&(r, m)| {
            let e = align.apply(r).unwrap_or(0.0) - m;
            e * e
        })
        .sum();
    libm::sqrt(sum / pairs.len() as f64)
}

/// Least-squares scale and shift taking `relative` onto `metric_reference`.
///
/// Pixels are sampled every `sample_stride` columns and rows. For inverse
/// depth inputs the reference is inverted before fitting, and the reported
/// residual is measured in meters after mapping back.
pub fn fit_scale(relative: &DepthMap, metric_reference: &DepthMap, sample_stride: u32) -> Result<ScaleAlignment> {
    relative.same_size(metric_reference)?;
    metric_reference.require(DepthConvention::MetricMeters)?;
    let space = AlignSpace::for_convention(relative.convention());
    let pairs = sample_pairs(relative, metric_reference, sample_stride);
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!("{} valid sample pairs, need at least 2", pairs.len())));
    }
    let target = |m: f64| match space {
        AlignSpace::Depth => m,
        AlignSpace::InverseDepth => 1.0 / m,
    };

    // Two passes over centered data keep the normal equations well conditioned.
    let n = pairs.len() as f64;
    let (sum_r, sum_y) = pairs.iter().fold((0.0, 0.0), |(a, b), &(r, m)| (a + r, b + target(m)));
    let (mean_r, mean_y) = (sum_r / n, sum_y / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(r, m) in &pairs {
        let dr = r - mean_r;
        sxx += dr * dr;
        sxy += dr * (target(m) - mean_y);
    }
    let first = pairs[0].0;
    if sxx == 0.0 || pairs.iter().all(|&(r, _)| r == first) {
        return Err(Error::RankDeficient);
    }
    let scale = sxy / sxx;
    if !(scale > 0.0) {
        return Err(Error::NonPositiveScale(scale));
    }
    let mut align = ScaleAlignment {
        scale,
        shift: mean_y - scale * mean_r,
        space,
        residual_rmse: 0.0,
        inlier_count: pairs.len(),
    };
    align.residual_rmse = residual_rmse(&align, &pairs);
    Ok(align)
}

/// Scale-only alignment that puts the median relative value at
/// `distance_m`, for scenes with no metric reference where the canopy is
/// known to sit at a fixed working distance.
pub fn fit_fixed_distance(relative: &DepthMap, distance_m: f64, sample_stride: u32) -> Result<ScaleAlignment> {
    if !(distance_m > 0.0 && distance_m <= MAX_DEPTH_M) {
        return Err(Error::InvalidDepth(distance_m));
    }
    let space = AlignSpace::for_convention(relative.convention());
    let plane = DepthMap::filled(relative.width(), relative.height(), distance_m, DepthConvention::MetricMeters)?;
    let pairs = sample_pairs(relative, &plane, sample_stride);
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!("{} valid samples, need at least 2", pairs.len())));
    }
    let mut rel: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let median = crate::measure::median(&mut rel);
    let scale = match space {
        AlignSpace::Depth => distance_m / median,
        AlignSpace::InverseDepth => 1.0 / (distance_m * median),
    };
    let mut align = ScaleAlignment { scale, shift: 0.0, space, residual_rmse: 0.0, inlier_count: pairs.len() };
    align.residual_rmse = residual_rmse(&align, &pairs);
    Ok(align)
}

/// Apply an alignment. Pixels that map outside `(0, 10]` m become invalid.
pub fn to_metric(relative: &DepthMap, a: &ScaleAlignment) -> Result<DepthMap> {
    let expected = AlignSpace::for_convention(relative.convention());
    if expected != a.space {
        return Err(Error::Convention { expected: expected.name(), found: a.space.name() });
    }
    let values = relative
        .values()
        .iter()
        .map(|&r| {
            if !DepthMap::is_valid_value(r) {
                return DepthMap::INVALID;
            }
            match a.apply(r) {
                Some(d) if d <= MAX_DEPTH_M => d,
                _ => DepthMap::INVALID,
            }
        })
        .collect();
    DepthMap::new(relative.width(), relative.height(), values, DepthConvention::MetricMeters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn ramp(w: u32, h: u32, f: impl Fn(f64) -> f64, conv: DepthConvention) -> DepthMap {
        let values = (0..w * h).map(|i| f(0.5 + i as f64 * 0.01)).collect();
        DepthMap::new(w, h, values, conv).unwrap()
    }

    #[test]
    fn identity_fit_on_metric_input() {
        let m = ramp(8, 8, |x| x, DepthConvention::MetricMeters);
        let a = fit_scale(&m, &m, 1).unwrap();
        assert_relative_eq!(a.scale, 1.0, epsilon = 1e-12);
        assert_relative_eq!(a.shift, 0.0, epsilon = 1e-12);
        assert!(a.residual_rmse < 1e-12);
        assert_eq!(a.space, AlignSpace::Depth);
    }

    #[test]
    fn recovers_inverse_of_synthetic_affine() {
        let metric = ramp(16, 16, |x| x, DepthConvention::MetricMeters);
        let relative = ramp(16, 16, |x| 2.0 * x + 0.1, DepthConvention::RelativeDepth);
        let a = fit_scale(&relative, &metric, 1).unwrap();
        assert_relative_eq!(a.scale, 0.5, max_relative = 1e-9);
        assert_relative_eq!(a.shift, -0.05, max_relative = 1e-9);
        assert_eq!(a.inlier_count, 256);
    }

    #[test]
    fn stride_subsamples_pairs() {
        let m = ramp(16, 16, |x| x, DepthConvention::MetricMeters);
        assert_eq!(fit_scale(&m, &m, 4).unwrap().inlier_count, 16);
    }

    #[test]
    fn too_few_pairs_or_constant_relative() {
        let mut m = DepthMap::filled(4, 4, 0.0, DepthConvention::MetricMeters).unwrap();
        m.set(0, 0, 1.0);
        assert!(matches!(fit_scale(&m, &m, 1), Err(Error::InsufficientData(_))));
        let flat = DepthMap::filled(4, 4, 0.3, DepthConvention::RelativeInverseDepth).unwrap();
        let reference = ramp(4, 4, |x| x, DepthConvention::MetricMeters);
        assert_eq!(fit_scale(&flat, &reference, 1), Err(Error::RankDeficient));
    }

    #[test]
    fn reference_must_be_metric_and_same_size() {
        let r = ramp(4, 4, |x| x, DepthConvention::RelativeDepth);
        assert!(matches!(fit_scale(&r, &r, 1), Err(Error::Convention { .. })));
        let m = ramp(4, 3, |x| x, DepthConvention::MetricMeters);
        assert!(matches!(fit_scale(&r, &m, 1), Err(Error::Dimensions { .. })));
    }

    #[test]
    fn metric_map_with_identity_is_unchanged() {
        let m = ramp(4, 4, |x| x, DepthConvention::MetricMeters);
        assert_eq!(to_metric(&m, &ScaleAlignment::identity(16)).unwrap(), m);
    }

    #[test]
    fn inverse_depth_hand_case() {
        let r = DepthMap::new(2, 2, vec![0.25, 0.5, 1.0, 2.0], DepthConvention::RelativeInverseDepth).unwrap();
        let a = ScaleAlignment { scale: 2.0, shift: 0.5, space: AlignSpace::InverseDepth, residual_rmse: 0.0, inlier_count: 4 };
        let d = to_metric(&r, &a).unwrap();
        // 1 / (2r + 0.5)
        assert_eq!(d.values(), &[1.0, 1.0 / 1.5, 1.0 / 2.5, 1.0 / 4.5]);
        assert_eq!(d.convention(), DepthConvention::MetricMeters);
    }

    #[test]
    fn non_positive_denominator_and_far_points_become_invalid() {
        let r = DepthMap::new(3, 1, vec![0.1, 0.0, 0.01], DepthConvention::RelativeInverseDepth).unwrap();
        let a = ScaleAlignment { scale: 1.0, shift: -0.2, space: AlignSpace::InverseDepth, residual_rmse: 0.0, inlier_count: 2 };
        assert_eq!(to_metric(&r, &a).unwrap().values(), &[0.0, 0.0, 0.0]);
        let b = ScaleAlignment { scale: 1.0, shift: 0.0, space: AlignSpace::InverseDepth, residual_rmse: 0.0, inlier_count: 2 };
        // 1/0.01 = 100 m is beyond range
        assert_eq!(to_metric(&r, &b).unwrap().values(), &[10.0, 0.0, 0.0]);
    }

    #[test]
    fn space_must_match_convention() {
        let r = ramp(2, 2, |x| x, DepthConvention::RelativeInverseDepth);
        assert!(to_metric(&r, &ScaleAlignment::identity(4)).is_err());
    }

    #[test]
    fn fixed_distance_puts_median_on_the_plane() {
        let r = ramp(5, 5, |x| x, DepthConvention::RelativeInverseDepth);
        let a = fit_fixed_distance(&r, 0.61, 1).unwrap();
        let d = to_metric(&r, &a).unwrap();
        let mut v: Vec<f64> = d.values().to_vec();
        assert_relative_eq!(crate::measure::median(&mut v), 0.61, max_relative = 1e-12);
    }

    #[test]
    fn alignment_reduces_residual() {
        let metric = ramp(10, 10, |x| x, DepthConvention::MetricMeters);
        let relative = ramp(10, 10, |x| 3.0 * x - 0.2, DepthConvention::RelativeDepth);
        let unaligned: f64 = metric
            .values()
            .iter()
            .zip(relative.values())
            .map(|(m, r)| (m - r) * (m - r))
            .sum::<f64>()
            / 100.0;
        let a = fit_scale(&relative, &metric, 1).unwrap();
        assert!(a.residual_rmse < libm::sqrt(unaligned));
    }
}
