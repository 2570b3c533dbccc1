use alloc::format;
use alloc::vec::Vec;

use crate::align::MAX_DEPTH_M;
use crate::{backproject, CameraIntrinsics, DepthConvention, DepthMap, Error, PointCloud, Result, Rgb};

/// Inclusive metric depth window applied before building a cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeFilter {
    min_m: f64,
    max_m: f64,
}

impl RangeFilter {
    pub fn new(min_m: f64, max_m: f64) -> Result<Self> {
        if !(min_m > 0.0 && min_m < max_m && max_m <= MAX_DEPTH_M) {
            return Err(Error::InvalidArgument(format!(
                "range filter [{min_m}, {max_m}] must satisfy 0 < min < max <= {MAX_DEPTH_M}"
            )));
        }
        Ok(Self { min_m, max_m })
    }

    pub fn min_m(&self) -> f64 {
        self.min_m
    }

    pub fn max_m(&self) -> f64 {
        self.max_m
    }

    pub fn accepts(&self, d: f64) -> bool {
        d >= self.min_m && d <= self.max_m
    }
}

impl Default for RangeFilter {
    fn default() -> Self {
        Self { min_m: 0.15, max_m: 2.0 }
    }
}

/// Borrowed row-major RGB raster.
#[derive(Debug, Clone, Copy)]
pub struct RgbView<'a> {
    pub width: u32,
    pub height: u32,
    pub pixels: &'a [Rgb],
}

impl<'a> RgbView<'a> {
    pub fn new(width: u32, height: u32, pixels: &'a [Rgb]) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }
}

/// One point per valid in-range pixel, in row-major order.
pub fn depth_to_cloud(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    filter: &RangeFilter,
    rgb: Option<RgbView<'_>>,
) -> Result<PointCloud> {
    depth.require(DepthConvention::MetricMeters)?;
    if depth.width() != k.width || depth.height() != k.height {
        return Err(Error::Dimensions { got_w: depth.width(), got_h: depth.height(), want_w: k.width, want_h: k.height });
    }
    if let Some(img) = &rgb {
        if img.width != depth.width() || img.height != depth.height() {
            return Err(Error::Dimensions {
                got_w: img.width,
                got_h: img.height,
                want_w: depth.width(),
                want_h: depth.height(),
            });
        }
    }
    let w = depth.width() as usize;
    let mut points = Vec::new();
    let mut colors = rgb.map(|_| Vec::new());
    for (i, &d) in depth.values().iter().enumerate() {
        if !DepthMap::is_valid_value(d) || !filter.accepts(d) {
            continue;
        }
        let (col, row) = (i % w, i / w);
        points.push(backproject(col as f64, row as f64, d, k)?);
        if let (Some(c), Some(img)) = (colors.as_mut(), rgb.as_ref()) {
            c.push(img.pixels[i]);
        }
    }
    PointCloud::new(points, colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{intrinsics_from_fov, project, Point3};
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn filter_bounds() {
        assert!(RangeFilter::new(0.0, 1.0).is_err());
        assert!(RangeFilter::new(1.0, 1.0).is_err());
        assert!(RangeFilter::new(0.1, 10.5).is_err());
        let f = RangeFilter::default();
        assert_eq!((f.min_m(), f.max_m()), (0.15, 2.0));
    }

    #[test]
    fn all_invalid_gives_empty_cloud() {
        let k = intrinsics_from_fov(64, 48, 69.4, 42.5).unwrap();
        let d = DepthMap::filled(64, 48, 0.0, DepthConvention::MetricMeters).unwrap();
        assert!(depth_to_cloud(&d, &k, &RangeFilter::default(), None).unwrap().is_empty());
    }

    #[test]
    fn single_principal_pixel() {
        let k = intrinsics_from_fov(1280, 720, 69.4, 42.5).unwrap();
        let mut d = DepthMap::filled(1280, 720, 0.0, DepthConvention::MetricMeters).unwrap();
        d.set(640, 360, 0.61);
        let cloud = depth_to_cloud(&d, &k, &RangeFilter::new(0.1, 0.7).unwrap(), None).unwrap();
        assert_eq!(cloud.points(), &[Point3::new(0.0, 0.0, 0.61)]);
    }

    #[test]
    fn uniform_plane_extent() {
        let k = intrinsics_from_fov(1280, 720, 69.4, 42.5).unwrap();
        let d = DepthMap::filled(1280, 720, 0.61, DepthConvention::MetricMeters).unwrap();
        let cloud = depth_to_cloud(&d, &k, &RangeFilter::default(), None).unwrap();
        assert_eq!(cloud.len(), 921_600);
        assert!(cloud.points().iter().all(|p| p.z == 0.61));
        let (lo, hi) = cloud
            .points()
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
        // Column 0 sits exactly cx pixels left of the axis, column 1279 one pixel short of the right edge.
        let half = 0.61 * libm::tan(34.7f64.to_radians());
        assert_relative_eq!(lo, -half, max_relative = 1e-12);
        assert_relative_eq!(hi, half * 639.0 / 640.0, max_relative = 1e-12);
    }

    #[test]
    fn colors_follow_pixels_and_points_reproject() {
        let k = intrinsics_from_fov(4, 2, 90.0, 60.0).unwrap();
        let d = DepthMap::new(4, 2, vec![0.5, 0.0, 3.0, 1.0, 1.2, 0.05, 0.7, 0.9], DepthConvention::MetricMeters).unwrap();
        let rgb: Vec<Rgb> = (0..8u8).map(|i| [i, i, i]).collect();
        let view = RgbView::new(4, 2, &rgb).unwrap();
        let cloud = depth_to_cloud(&d, &k, &RangeFilter::default(), Some(view)).unwrap();
        assert_eq!(cloud.colors().unwrap(), &[[0; 3], [3; 3], [4; 3], [6; 3], [7; 3]]);
        let pixels = [(0.0, 0.0), (3.0, 0.0), (0.0, 1.0), (2.0, 1.0), (3.0, 1.0)];
        for (p, (u, v)) in cloud.points().iter().zip(pixels) {
            let (pu, pv) = project(p, &k).unwrap();
            assert!((pu - u).abs() < 1e-6 && (pv - v).abs() < 1e-6);
        }
    }

    #[test]
    fn relative_input_is_rejected() {
        let k = intrinsics_from_fov(4, 2, 90.0, 60.0).unwrap();
        let d = DepthMap::filled(4, 2, 1.0, DepthConvention::RelativeInverseDepth).unwrap();
        assert!(matches!(depth_to_cloud(&d, &k, &RangeFilter::default(), None), Err(Error::Convention { .. })));
    }
}
