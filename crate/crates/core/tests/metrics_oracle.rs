mod oracle;

use fruitlet_core::metrics::{
    average_precision, average_precision_50, greedy_match, iou, match_detections, pooled_counts, precision_recall,
    Criterion, ImageDetections,
};
use fruitlet_core::{BBox, PoseDetection};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sorted(preds: &[PoseDetection]) -> Vec<PoseDetection> {
    ImageDetections { predictions: preds.to_vec(), truths: vec![] }.sorted_predictions()
}

#[test]
fn iou_of_offset_squares() {
    let a = BBox::from_corners(0.0, 0.0, 0.5, 0.5).unwrap();
    let b = BBox::from_corners(0.25, 0.25, 0.75, 0.75).unwrap();
    assert!((iou(&a, &b) - 1.0 / 7.0).abs() < 1e-15);
    assert_eq!(iou(&a, &a), 1.0);
    assert_eq!(iou(&a, &BBox::from_corners(0.6, 0.6, 0.9, 0.9).unwrap()), 0.0);
}

#[test]
fn greedy_takes_higher_overlap_first() {
    // pred 0 overlaps T0 at 0.6 and T1 at 0.55; pred 1 overlaps only T0
    let sim = [[0.6, 0.55], [0.6, 0.0]];
    let m = greedy_match(2, 2, 0.5, |p, t| Some(sim[p][t]));
    assert_eq!(m.pairs, vec![(0, 0, 0.6)]);
    assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 1));
}

#[test]
fn match_detections_equals_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let img = &oracle::random_dataset(&mut rng, 1, 5)[0];
        let preds = sorted(&img.predictions);
        let thresh = [0.1, 0.3, 0.5][rng.gen_range(0..3)];
        let got: Vec<(usize, usize)> =
            match_detections(&preds, &img.truths, thresh).unwrap().pairs.iter().map(|p| (p.0, p.1)).collect();
        assert_eq!(got, oracle::exhaustive_pairs(&preds, &img.truths, thresh));
        assert_eq!(got, oracle::greedy_pairs(&preds, &img.truths, thresh));
    }
}

#[test]
fn dataset_metrics_equal_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let images = oracle::random_dataset(&mut rng, 10, 15);
        for min_conf in [0.0, 0.25, 0.5] {
            let pr = precision_recall(pooled_counts(&images, Criterion::BoxIou(0.5), min_conf).unwrap());
            let (p, r) = oracle::precision_recall_at(&images, 0.5, min_conf);
            assert!((pr.precision - p).abs() < 1e-9 && (pr.recall - r).abs() < 1e-9);
        }
        match (average_precision_50(&images), oracle::average_precision(&images, 0.5)) {
            (Ok(curve), Some(ap)) => {
                assert!((curve.ap - ap).abs() < 1e-9, "{} vs {ap}", curve.ap);
                assert!(curve.points.windows(2).all(|w| w[0].0 <= w[1].0));
                assert!(curve.points.iter().all(|p| (0.0..=1.0).contains(&p.1)));
            }
            (Err(fruitlet_core::Error::UndefinedAp), None) => {}
            (a, b) => panic!("disagree: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn unsorted_predictions_are_rejected() {
    let a = oracle::detection("i", BBox::clamped(0.5, 0.5, 0.1, 0.1).unwrap(), 0.2);
    let b = oracle::detection("i", BBox::clamped(0.3, 0.5, 0.1, 0.1).unwrap(), 0.9);
    assert!(matches!(match_detections(&[a, b], &[], 0.5), Err(fruitlet_core::Error::Unsorted)));
}

#[test]
fn degenerate_counts_are_flagged() {
    let pr = precision_recall(fruitlet_core::metrics::Counts { tp: 0, fp: 0, fn_: 5 });
    assert_eq!((pr.precision, pr.recall), (0.0, 0.0));
    assert!(pr.precision_degenerate && !pr.recall_degenerate);
    let pr = precision_recall(fruitlet_core::metrics::Counts { tp: 91, fp: 9, fn_: 0 });
    assert_eq!(pr.precision, 0.91);
}

#[test]
fn pose_ap_without_labeled_keypoints_is_undefined() {
    let mut t = oracle::detection("i", BBox::clamped(0.5, 0.5, 0.2, 0.2).unwrap(), 1.0);
    t.calyx = fruitlet_core::Keypoint::unlabeled();
    t.peduncle = fruitlet_core::Keypoint::unlabeled();
    let images = [ImageDetections { predictions: vec![t.clone()], truths: vec![t] }];
    let crit = Criterion::PoseOks(Default::default());
    assert!(matches!(average_precision(&images, crit), Err(fruitlet_core::Error::UndefinedAp)));
    assert_eq!(average_precision_50(&images).unwrap().ap, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn truth_order_does_not_change_matching(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = &oracle::random_dataset(&mut rng, 1, 8)[0];
        let preds = sorted(&img.predictions);
        let mut order: Vec<usize> = (0..img.truths.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let shuffled: Vec<PoseDetection> = order.iter().map(|&k| img.truths[k].clone()).collect();
        let a = match_detections(&preds, &img.truths, 0.5).unwrap();
        let b = match_detections(&preds, &shuffled, 0.5).unwrap();
        prop_assert_eq!((a.tp, a.fp, a.fn_), (b.tp, b.fp, b.fn_));
        let mut mapped: Vec<(usize, usize)> = b.pairs.iter().map(|p| (p.0, order[p.1])).collect();
        mapped.sort();
        let mut direct: Vec<(usize, usize)> = a.pairs.iter().map(|p| (p.0, p.1)).collect();
        direct.sort();
        prop_assert_eq!(mapped, direct);
        prop_assert_eq!(match_detections(&preds, &img.truths, 0.5).unwrap(), a);
    }

    #[test]
    fn counting_identities(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = &oracle::random_dataset(&mut rng, 1, 15)[0];
        let preds = sorted(&img.predictions);
        let m = match_detections(&preds, &img.truths, 0.5).unwrap();
        prop_assert_eq!(m.tp, m.pairs.len());
        prop_assert_eq!(m.tp + m.fn_, img.truths.len());
        prop_assert_eq!(m.tp + m.fp, preds.len());
        let mut truths: Vec<usize> = m.pairs.iter().map(|p| p.1).collect();
        truths.sort();
        truths.dedup();
        prop_assert_eq!(truths.len(), m.tp);
        let pr = precision_recall(m.counts());
        prop_assert!((0.0..=1.0).contains(&pr.precision) && (0.0..=1.0).contains(&pr.recall));
    }

    #[test]
    fn lowest_confidence_stray_never_raises_ap(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images = oracle::random_dataset(&mut rng, 5, 10);
        let Ok(before) = average_precision_50(&images) else { return Ok(()) };
        let k = rng.gen_range(0..images.len());
        let stray = oracle::detection("stray", BBox::clamped(0.995, 0.995, 0.01, 0.01).unwrap(), 0.001);
        prop_assume!(images[k].truths.iter().all(|t| iou(&t.bbox, &stray.bbox) == 0.0));
        images[k].predictions.push(stray);
        let after = average_precision_50(&images).unwrap();
        prop_assert!(after.ap <= before.ap);
    }
}
