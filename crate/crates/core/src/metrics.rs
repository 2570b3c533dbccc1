//! Detection and pose quality: IoU, greedy matching, precision/recall and
//! all-point interpolated average precision at a single threshold.
//!
//! Pose quality reuses the same machinery with an OKS similarity in place
//! of IoU.

use alloc::vec::Vec;

use crate::{BBox, Error, PoseDetection, Result};

pub const IOU_50: f64 = 0.5;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Keypoint similarity settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OksConfig {
    /// Per-keypoint falloff constant, shared by calyx and peduncle.
    pub kappa: f64,
    /// Minimum score for a pose to count as correct.
    pub threshold: f64,
}

impl Default for OksConfig {
    fn default() -> Self {
        Self { kappa: 0.05, threshold: 0.5 }
    }
}

/// OKS score of `pred` against `truth`: the mean over keypoints labeled in
/// the truth of `exp(-d^2 / (2 * area * kappa^2))`, with `d` in normalized
/// units and `area` the truth box area.
///
/// `None` when the truth has no labeled keypoints. Prediction keypoints
/// marked not-labeled score zero.
pub fn pose_correctness(pred: &PoseDetection, truth: &PoseDetection, kappa: f64) -> Option<f64> {
    let scale = 2.0 * truth.bbox.area() * kappa * kappa;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.keypoints().iter().zip(truth.keypoints().iter()) {
        if !t.visibility.is_labeled() {
            continue;
        }
        n += 1;
        if p.visibility.is_labeled() {
            let d2 = (p.x - t.x) * (p.x - t.x) + (p.y - t.y) * (p.y - t.y);
            sum += libm::exp(-d2 / scale);
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Outcome of matching one image's predictions against its truths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(prediction index, truth index, similarity)`, prediction order.
    pub pairs: Vec<(usize, usize, f64)>,
}

impl MatchResult {
    pub fn counts(&self) -> Counts {
        Counts { tp: self.tp, fp: self.fp, fn_: self.fn_ }
    }

    /// Per-prediction true-positive flags.
    pub fn tp_flags(&self, n_preds: usize) -> Vec<bool> {
        let mut flags = alloc::vec![false; n_preds];
        for &(p, _, _) in &self.pairs {
            flags[p] = true;
        }
        flags
    }
}

/// Confusion counts that can be summed across images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl core::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Greedy matching in prediction order: each prediction takes the unused
/// truth with the highest similarity at or above `threshold`, ties going to
/// the lower truth index. `similarity` returning `None` excludes the pair.
pub fn greedy_match<F>(n_preds: usize, n_truths: usize, threshold: f64, mut similarity: F) -> MatchResult
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    let mut used = alloc::vec![false; n_truths];
    let mut pairs = Vec::new();
    for p in 0..n_preds {
        let mut best: Option<(usize, f64)> = None;
        for (t, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let Some(s) = similarity(p, t) else { continue };
            if s >= threshold && best.is_none_or(|(_, b)| s > b) {
                best = Some((t, s));
            }
        }
        if let Some((t, s)) = best {
            used[t] = true;
            pairs.push((p, t, s));
        }
    }
    MatchResult { tp: pairs.len(), fp: n_preds - pairs.len(), fn_: n_truths - pairs.len(), pairs }
}

fn check_sorted(preds: &[PoseDetection]) -> Result<()> {
    if preds.windows(2).any(|w| w[0].confidence < w[1].confidence) {
        return Err(Error::Unsorted);
    }
    Ok(())
}

/// Box matching by IoU. `preds` must be sorted by descending confidence.
pub fn match_detections(preds: &[PoseDetection], truths: &[PoseDetection], iou_thresh: f64) -> Result<MatchResult> {
    check_sorted(preds)?;
    Ok(greedy_match(preds.len(), truths.len(), iou_thresh, |p, t| Some(iou(&preds[p].bbox, &truths[t].bbox))))
}

/// Pose matching by OKS. Truths without labeled keypoints do not take part
/// and are not counted as misses.
pub fn match_poses(preds: &[PoseDetection], truths: &[PoseDetection], oks: &OksConfig) -> Result<MatchResult> {
    check_sorted(preds)?;
    let scored: Vec<usize> = (0..truths.len())
        .filter(|&t| truths[t].keypoints().iter().any(|k| k.visibility.is_labeled()))
        .collect();
    let mut m = greedy_match(preds.len(), scored.len(), oks.threshold, |p, t| {
        pose_correctness(&preds[p], &truths[scored[t]], oks.kappa)
    });
    for pair in &mut m.pairs {
        pair.1 = scored[pair.1];
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// Set when `tp + fp == 0`; precision is then reported as 0.
    pub precision_degenerate: bool,
    /// Set when `tp + fn == 0`; recall is then reported as 0.
    pub recall_degenerate: bool,
}

pub fn precision_recall(c: Counts) -> PrecisionRecall {
    let ratio = |num: usize, den: usize| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let (precision, precision_degenerate) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_degenerate) = ratio(c.tp, c.tp + c.fn_);
    PrecisionRecall { precision, recall, precision_degenerate, recall_degenerate }
}

/// Predictions and annotations of one image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageDetections {
    pub predictions: Vec<PoseDetection>,
    pub truths: Vec<PoseDetection>,
}

impl ImageDetections {
    /// Predictions sorted by descending confidence; ties keep input order.
    pub fn sorted_predictions(&self) -> Vec<PoseDetection> {
        let mut p = self.predictions.clone();
        p.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// `(recall, precision)`, one point per distinct confidence, ascending recall.
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
}

/// Which matching criterion a dataset-level metric uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    BoxIou(f64),
    PoseOks(OksConfig),
}

impl Criterion {
    fn run(&self, preds: &[PoseDetection], truths: &[PoseDetection]) -> Result<MatchResult> {
        match self {
            Criterion::BoxIou(t) => match_detections(preds, truths, *t),
            Criterion::PoseOks(cfg) => match_poses(preds, truths, cfg),
        }
    }

    fn scored_truths(&self, truths: &[PoseDetection]) -> usize {
        match self {
            Criterion::BoxIou(_) => truths.len(),
            Criterion::PoseOks(_) => {
                truths.iter().filter(|t| t.keypoints().iter().any(|k| k.visibility.is_labeled())).count()
            }
        }
    }
}

/// Dataset-pooled counts for predictions at or above `min_confidence`.
pub fn pooled_counts(images: &[ImageDetections], criterion: Criterion, min_confidence: f64) -> Result<Counts> {
    let mut total = Counts::default();
    for img in images {
        let preds: Vec<PoseDetection> =
            img.sorted_predictions().into_iter().filter(|p| p.confidence >= min_confidence).collect();
        total += criterion.run(&preds, &img.truths)?.counts();
    }
    Ok(total)
}

/// Dataset-pooled precision/recall curve and all-point interpolated AP.
pub fn average_precision(images: &[ImageDetections], criterion: Criterion) -> Result<PrCurve> {
    let mut scored: Vec<(f64, bool)> = Vec::new();
    let mut n_truth = 0usize;
    for img in images {
        let preds = img.sorted_predictions();
        let m = criterion.run(&preds, &img.truths)?;
        n_truth += criterion.scored_truths(&img.truths);
        scored.extend(preds.iter().map(|p| p.confidence).zip(m.tp_flags(preds.len())));
    }
    if n_truth == 0 {
        return Err(Error::UndefinedAp);
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &(conf, is_tp)) in scored.iter().enumerate() {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = scored.get(i + 1).is_none_or(|next| next.0 != conf);
        if group_ends {
            points.push((tp as f64 / n_truth as f64, tp as f64 / (tp + fp) as f64));
        }
    }

    // Precision envelope from the right, then integrate over recall steps.
    let mut envelope: Vec<f64> = points.iter().map(|p| p.1).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in points.iter().zip(&envelope) {
        ap += (p.0 - prev_recall) * env;
        prev_recall = p.0;
    }
    Ok(PrCurve { points, ap })
}

pub fn average_precision_50(images: &[ImageDetections]) -> Result<PrCurve> {
    average_precision(images, Criterion::BoxIou(IOU_50))
}
