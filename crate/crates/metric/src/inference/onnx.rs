//! ONNX models executed with tract.
//!
//! Pose models take `float32 [1, 3, S, S]` RGB scaled to `[0, 1]` and emit
//! raw predictions `[1, 11, N]` (or `[1, N, 11]`): box center and size in
//! input pixels, fruitlet score, then `x, y, score` for calyx and peduncle.
//! Depth models take ImageNet-normalized RGB of the same layout and emit
//! relative inverse depth `[1, S, S]` or `[1, 1, S, S]`.
//!
//! Images are stretched to `S x S`, so normalized outputs map straight back
//! onto the original frame.

use std::sync::Arc;
use std::time::Instant;

use fruitlet_core::{BBox, DepthConvention, DepthMap, Keypoint, PhaseTiming, PoseDetection, Visibility};
use image::imageops::{self, FilterType};
use image::RgbImage;
use tract_onnx::prelude::*;

use super::{elapsed_ms, non_max_suppression, threshold_and_sort, BackendConfig, DepthBackend, Frame, PoseBackend};
use crate::{Error, Result};

/// Channels of one raw pose prediction.
const POSE_CHANNELS: usize = 11;
/// Keypoint score above which a predicted keypoint counts as visible.
const KEYPOINT_VISIBLE: f32 = 0.5;
const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

type Plan = Arc<TypedRunnableModel>;

fn load_plan(cfg: &BackendConfig) -> Result<Plan> {
    let s = cfg.input_size as usize;
    let fail = |e: TractError| Error::Config(format!("{}: {e}", cfg.path.display()));
    tract_onnx::onnx()
        .model_for_path(&cfg.path)
        .and_then(|m| m.with_input_fact(0, f32::fact([1, 3, s, s]).into()))
        .and_then(|m| m.into_optimized())
        .and_then(|m| m.into_runnable())
        .map_err(fail)
}

fn input_tensor(frame: &Frame, size: u32, mean: [f32; 3], std: [f32; 3]) -> Result<Tensor> {
    let rgb = frame.rgb.as_ref().ok_or_else(|| frame.fail("ONNX backends need the RGB image"))?;
    let resized: RgbImage = if rgb.dimensions() == (size, size) {
        rgb.clone()
    } else {
        imageops::resize(rgb, size, size, FilterType::Triangle)
    };
    let s = size as usize;
    let arr = tract_ndarray::Array4::from_shape_fn((1, 3, s, s), |(_, c, y, x)| {
        let v = resized.get_pixel(x as u32, y as u32)[c] as f32 / 255.0;
        (v - mean[c]) / std[c]
    });
    Ok(arr.into_tensor())
}

fn run(plan: &Plan, frame: &Frame, input: Tensor) -> Result<TValue> {
    let mut out = plan.run(tvec!(input.into())).map_err(|e| frame.fail(e.to_string()))?;
    if out.is_empty() {
        return Err(frame.fail("model produced no outputs"));
    }
    Ok(out.remove(0))
}

/// Bilinear resampling with pixel centers aligned, edges clamped. Values
/// are not clamped to any range.
fn resize_bilinear(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f32> {
    if (sw, sh) == (dw, dh) {
        return src.to_vec();
    }
    let axis = |d: usize, s: usize| -> Vec<(usize, usize, f32)> {
        (0..d)
            .map(|i| {
                let x = ((i as f32 + 0.5) * s as f32 / d as f32 - 0.5).clamp(0.0, (s - 1) as f32);
                let lo = x.floor() as usize;
                (lo, (lo + 1).min(s - 1), x - lo as f32)
            })
            .collect()
    };
    let (xs, ys) = (axis(dw, sw), axis(dh, sh));
    let mut out = Vec::with_capacity(dw * dh);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bottom = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

pub struct OnnxPose {
    plan: Plan,
    cfg: BackendConfig,
}

impl OnnxPose {
    pub fn load(cfg: &BackendConfig) -> Result<Self> {
        Ok(Self { plan: load_plan(cfg)?, cfg: cfg.clone() })
    }
}

/// Decode raw predictions into detections in normalized coordinates.
fn decode_pose(raw: &tract_ndarray::ArrayViewD<'_, f32>, size: f32, image_id: &str) -> std::result::Result<Vec<PoseDetection>, String> {
    let shape = raw.shape();
    if shape.len() != 3 || shape[0] != 1 {
        return Err(format!("expected a [1, C, N] pose output, got {shape:?}"));
    }
    let channels_first = if shape[1] == POSE_CHANNELS {
        true
    } else if shape[2] == POSE_CHANNELS {
        false
    } else {
        return Err(format!("pose output {shape:?} has no axis of {POSE_CHANNELS} channels"));
    };
    let n = if channels_first { shape[2] } else { shape[1] };
    let at = |c: usize, i: usize| if channels_first { raw[[0, c, i]] } else { raw[[0, i, c]] };
    let norm = |v: f32| (v / size).clamp(0.0, 1.0) as f64;
    let kp = |i: usize, base: usize| {
        let vis = if at(base + 2, i) >= KEYPOINT_VISIBLE { Visibility::Visible } else { Visibility::Occluded };
        Keypoint::new(norm(at(base, i)), norm(at(base + 1, i)), vis)
    };
    let mut out = Vec::new();
    for i in 0..n {
        let (cx, cy, w, h) = (at(0, i) / size, at(1, i) / size, at(2, i) / size, at(3, i) / size);
        let Ok(bbox) = BBox::clamped(cx as f64, cy as f64, w as f64, h as f64) else { continue };
        let score = at(4, i);
        if !score.is_finite() {
            continue;
        }
        out.push(PoseDetection {
            image_id: image_id.to_string(),
            bbox,
            confidence: (score as f64).clamp(0.0, 1.0),
            calyx: kp(i, 5),
            peduncle: kp(i, 8),
        });
    }
    Ok(out)
}

impl PoseBackend for OnnxPose {
    fn detect_pose(&mut self, frame: &Frame) -> Result<(Vec<PoseDetection>, PhaseTiming)> {
        frame.check()?;
        let t0 = Instant::now();
        let input = input_tensor(frame, self.cfg.input_size, [0.0; 3], [1.0; 3])?;
        let preprocess_ms = elapsed_ms(t0);
        let t1 = Instant::now();
        let out = run(&self.plan, frame, input)?;
        let inference_ms = elapsed_ms(t1);
        let t2 = Instant::now();
        let view = out.to_plain_array_view::<f32>().map_err(|e| frame.fail(e.to_string()))?;
        let raw = decode_pose(&view, self.cfg.input_size as f32, &frame.image_id).map_err(|m| frame.fail(m))?;
        let dets = non_max_suppression(threshold_and_sort(raw, self.cfg.confidence_threshold), self.cfg.iou_nms_threshold);
        Ok((dets, PhaseTiming::new(preprocess_ms, inference_ms, elapsed_ms(t2))))
    }
}

pub struct OnnxDepth {
    plan: Plan,
    cfg: BackendConfig,
}

impl OnnxDepth {
    pub fn load(cfg: &BackendConfig) -> Result<Self> {
        Ok(Self { plan: load_plan(cfg)?, cfg: cfg.clone() })
    }
}

impl DepthBackend for OnnxDepth {
    fn estimate_depth(&mut self, frame: &Frame) -> Result<(DepthMap, PhaseTiming)> {
        frame.check()?;
        let t0 = Instant::now();
        let input = input_tensor(frame, self.cfg.input_size, IMAGENET_MEAN, IMAGENET_STD)?;
        let preprocess_ms = elapsed_ms(t0);
        let t1 = Instant::now();
        let out = run(&self.plan, frame, input)?;
        let inference_ms = elapsed_ms(t1);
        let t2 = Instant::now();
        let view = out.to_plain_array_view::<f32>().map_err(|e| frame.fail(e.to_string()))?;
        let shape = view.shape().to_vec();
        if shape.len() < 2 || shape[..shape.len() - 2].iter().any(|&d| d != 1) {
            return Err(frame.fail(format!("expected a single-channel depth output, got {shape:?}")));
        }
        let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        let data: Vec<f32> = view.iter().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(frame.fail("depth model produced non-finite values"));
        }
        let full = resize_bilinear(&data, w, h, frame.width as usize, frame.height as usize);
        // Zero is the no-data marker, so the adapter keeps every output strictly positive.
        let values = full.into_iter().map(|v| v.max(f32::EPSILON) as f64).collect();
        let depth = DepthMap::new(frame.width, frame.height, values, DepthConvention::RelativeInverseDepth)?;
        Ok((depth, PhaseTiming::new(preprocess_ms, inference_ms, elapsed_ms(t2))))
    }
}
