//! Brute-force reference implementations of the detection metrics,
//! written without reference to the library code paths.

#![allow(dead_code)]

use fruitlet_core::metrics::ImageDetections;
use fruitlet_core::{BBox, Keypoint, PoseDetection, Visibility};
use rand::Rng;

pub fn corner_iou(a: &BBox, b: &BBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = (a.cx - a.w / 2.0, a.cy - a.h / 2.0, a.cx + a.w / 2.0, a.cy + a.h / 2.0);
    let (bx0, by0, bx1, by1) = (b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0);
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Pairs `(pred, truth)` chosen by scanning predictions in order and
/// taking the best free truth at or above `thresh`, lowest index on ties.
pub fn greedy_pairs(preds: &[PoseDetection], truths: &[PoseDetection], thresh: f64) -> Vec<(usize, usize)> {
    let mut used = vec![false; truths.len()];
    let mut pairs = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, t) in truths.iter().enumerate() {
            if used[j] {
                continue;
            }
            let s = corner_iou(&p.bbox, &t.bbox);
            if s < thresh {
                continue;
            }
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Exhaustive search over every partial one-to-one assignment allowed by
/// the threshold, keeping the one whose per-prediction keys
/// `(matched, iou, -truth index)` are lexicographically largest in
/// prediction order.
type Best = Option<(Vec<(u8, f64, i64)>, Vec<Option<usize>>)>;

pub fn exhaustive_pairs(preds: &[PoseDetection], truths: &[PoseDetection], thresh: f64) -> Vec<(usize, usize)> {
    fn key(assign: &[Option<usize>], preds: &[PoseDetection], truths: &[PoseDetection]) -> Vec<(u8, f64, i64)> {
        assign
            .iter()
            .enumerate()
            .map(|(i, a)| match a {
                Some(j) => (1, corner_iou(&preds[i].bbox, &truths[*j].bbox), -(*j as i64)),
                None => (0, 0.0, 0),
            })
            .collect()
    }
    fn better(a: &[(u8, f64, i64)], b: &[(u8, f64, i64)]) -> bool {
        for (x, y) in a.iter().zip(b) {
            match x.partial_cmp(y).unwrap() {
                std::cmp::Ordering::Greater => return true,
                std::cmp::Ordering::Less => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
        false
    }
    fn walk(
        i: usize,
        cur: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Best,
        preds: &[PoseDetection],
        truths: &[PoseDetection],
        thresh: f64,
    ) {
        if i == preds.len() {
            let k = key(cur, preds, truths);
            if best.as_ref().is_none_or(|(bk, _)| better(&k, bk)) {
                *best = Some((k, cur.clone()));
            }
            return;
        }
        cur.push(None);
        walk(i + 1, cur, used, best, preds, truths, thresh);
        cur.pop();
        for j in 0..truths.len() {
            if !used[j] && corner_iou(&preds[i].bbox, &truths[j].bbox) >= thresh {
                used[j] = true;
                cur.push(Some(j));
                walk(i + 1, cur, used, best, preds, truths, thresh);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = None;
    walk(0, &mut Vec::new(), &mut vec![false; truths.len()], &mut best, preds, truths, thresh);
    let (_, assign) = best.unwrap();
    assign.iter().enumerate().filter_map(|(i, a)| a.map(|j| (i, j))).collect()
}

fn sorted_by_confidence(preds: &[PoseDetection]) -> Vec<PoseDetection> {
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    // insertion sort: stable by construction, descending confidence
    for k in 1..idx.len() {
        let mut m = k;
        while m > 0 && preds[idx[m - 1]].confidence < preds[idx[m]].confidence {
            idx.swap(m - 1, m);
            m -= 1;
        }
    }
    idx.into_iter().map(|i| preds[i].clone()).collect()
}

/// `(tp, fp, fn)` over the dataset using only predictions with confidence
/// at or above `min_conf`, matched afresh per image.
pub fn counts_at(images: &[ImageDetections], thresh: f64, min_conf: f64) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for img in images {
        let kept: Vec<PoseDetection> =
            sorted_by_confidence(&img.predictions).into_iter().filter(|p| p.confidence >= min_conf).collect();
        let m = greedy_pairs(&kept, &img.truths, thresh).len();
        tp += m;
        fp += kept.len() - m;
        fn_ += img.truths.len() - m;
    }
    (tp, fp, fn_)
}

pub fn precision_recall_at(images: &[ImageDetections], thresh: f64, min_conf: f64) -> (f64, f64) {
    let (tp, fp, fn_) = counts_at(images, thresh, min_conf);
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    (p, r)
}

/// All-point interpolated AP from a threshold sweep over every distinct
/// confidence, re-matching at each threshold. `None` without truths.
pub fn average_precision(images: &[ImageDetections], thresh: f64) -> Option<f64> {
    let n_truth: usize = images.iter().map(|i| i.truths.len()).sum();
    if n_truth == 0 {
        return None;
    }
    let mut confs: Vec<f64> = images.iter().flat_map(|i| i.predictions.iter().map(|p| p.confidence)).collect();
    confs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    confs.dedup();
    let points: Vec<(f64, f64)> = confs
        .iter()
        .map(|&c| {
            let (tp, fp, _) = counts_at(images, thresh, c);
            (tp as f64 / n_truth as f64, tp as f64 / (tp + fp) as f64)
        })
        .collect();
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for i in 0..points.len() {
        let best_p = points[i..].iter().map(|p| p.1).fold(0.0, f64::max);
        ap += (points[i].0 - prev_r) * best_p;
        prev_r = points[i].0;
    }
    Some(ap)
}

fn random_box<R: Rng>(rng: &mut R) -> BBox {
    let w = rng.gen_range(0.02..0.3);
    let h = rng.gen_range(0.02..0.3);
    BBox::clamped(rng.gen_range(w / 2.0..1.0 - w / 2.0), rng.gen_range(h / 2.0..1.0 - h / 2.0), w, h).unwrap()
}

pub fn detection(image_id: &str, bbox: BBox, confidence: f64) -> PoseDetection {
    PoseDetection {
        image_id: image_id.into(),
        bbox,
        confidence,
        calyx: Keypoint::new(bbox.cx, bbox.cy - bbox.h / 4.0, Visibility::Visible),
        peduncle: Keypoint::new(bbox.cx, bbox.cy + bbox.h / 4.0, Visibility::Visible),
    }
}

/// Up to `max_images` images with up to `max_boxes` truths and predictions
/// each. Predictions are jittered copies of truths or random boxes, with
/// confidences on a 0.05 grid so ties occur.
pub fn random_dataset<R: Rng>(rng: &mut R, max_images: usize, max_boxes: usize) -> Vec<ImageDetections> {
    let n_images = rng.gen_range(1..=max_images);
    (0..n_images)
        .map(|k| {
            let id = format!("im{k}");
            let truths: Vec<PoseDetection> =
                (0..rng.gen_range(0..=max_boxes)).map(|_| detection(&id, random_box(rng), 1.0)).collect();
            let n_pred = rng.gen_range(0..=max_boxes);
            let predictions = (0..n_pred)
                .map(|_| {
                    let conf = rng.gen_range(1..=20) as f64 * 0.05;
                    let bbox = if !truths.is_empty() && rng.gen_bool(0.7) {
                        let t = truths[rng.gen_range(0..truths.len())].bbox;
                        let j = rng.gen_range(0.0..0.5);
                        BBox::clamped(
                            t.cx + rng.gen_range(-j..=j) * t.w,
                            t.cy + rng.gen_range(-j..=j) * t.h,
                            t.w * rng.gen_range(0.7..1.3),
                            t.h * rng.gen_range(0.7..1.3),
                        )
                        .unwrap()
                    } else {
                        random_box(rng)
                    };
                    detection(&id, bbox, conf)
                })
                .collect();
            ImageDetections { predictions, truths }
        })
        .collect()
}
