mod common;

use chartforge::dataset::{decode_rle, encode_rle};
use chartforge::eval::{
    boundary_iou, box_iou, eval_boxes, hungarian_match, mask_iou, miou_union, BOUNDARY_RADII,
};
use chartforge::mask::BBox;
use chartforge::som::{filter_candidates, Candidate, FilterConfig};
use chartforge::Bitmap;
use common::{boundary_iou_oracle, brute_force_matching};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

fn bitmap(max: u32) -> impl Strategy<Value = Bitmap> {
    (1..=max, 1..=max)
        .prop_flat_map(|(w, h)| {
            (
                Just(w),
                Just(h),
                prop::collection::vec(any::<bool>(), (w * h) as usize),
            )
        })
        .prop_map(|(w, h, data)| Bitmap::from_row_major(w, h, data).unwrap())
}

fn blobby(w: u32, h: u32) -> impl Strategy<Value = Bitmap> {
    prop::collection::vec((0..w, 0..h, 1..w, 1..h), 1..4).prop_map(move |rects| {
        let mut m = Bitmap::new(w, h);
        for (x, y, rw, rh) in rects {
            m.union_with(&common::rect(w, h, x, y, (x + rw).min(w), (y + rh).min(h)));
        }
        m
    })
}

fn scored_matrix() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<bool>>)> {
    (0usize..=6, 0usize..=6).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..=4, m), n).prop_map(|rows| {
                rows.into_iter()
                    .map(|r| r.into_iter().map(|v| v as f64 / 4.0).collect())
                    .collect()
            }),
            prop::collection::vec(prop::collection::vec(any::<bool>(), m), n),
        )
    })
}

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0..50.0f64, 0.0..50.0f64, 1.0..30.0f64, 1.0..30.0f64)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rle_round_trip(m in bitmap(64)) {
        let rle = encode_rle(&m);
        prop_assert_eq!(rle.counts.iter().sum::<u64>(), (m.width() * m.height()) as u64);
        prop_assert_eq!(decode_rle(&rle).unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matching_is_optimal((scores, eligible) in scored_matrix()) {
        let got = hungarian_match(&scores, &eligible).unwrap();
        let (count, total) = brute_force_matching(&scores, &eligible);
        prop_assert_eq!(got.len(), count);
        prop_assert!((got.total_score() - total).abs() < 1e-9);
        let mut rows: Vec<_> = got.pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<_> = got.pairs.iter().map(|p| p.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), got.len());
        prop_assert_eq!(cols.len(), got.len());
        prop_assert!(got.pairs.iter().all(|&(i, j)| eligible[i][j]));
    }

    #[test]
    fn swapping_roles_swaps_precision_and_recall(
        preds in prop::collection::vec(bbox(), 0..6),
        gts in prop::collection::vec(bbox(), 1..6),
    ) {
        let a = eval_boxes(&preds, &gts, 0.5).unwrap();
        prop_assume!(!preds.is_empty());
        let b = eval_boxes(&gts, &preds, 0.5).unwrap();
        prop_assert_eq!(a.tp, b.tp);
        prop_assert!((a.precision - b.recall).abs() < 1e-12);
        prop_assert!((a.recall - b.precision).abs() < 1e-12);
        prop_assert!((a.f1 - b.f1).abs() < 1e-12);
    }

    #[test]
    fn adding_a_correct_prediction_keeps_tp(
        preds in prop::collection::vec(bbox(), 0..6),
        gts in prop::collection::vec(bbox(), 1..6),
        pick in any::<prop::sample::Index>(),
    ) {
        let before = eval_boxes(&preds, &gts, 0.5).unwrap();
        let mut more = preds.clone();
        more.push(gts[pick.index(gts.len())]);
        let after = eval_boxes(&more, &gts, 0.5).unwrap();
        prop_assert!(after.tp >= before.tp);
        for m in [&before, &after] {
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn box_iou_is_symmetric(a in bbox(), b in bbox()) {
        prop_assert!((box_iou(&a, &b) - box_iou(&b, &a)).abs() < 1e-12);
        prop_assert!((box_iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn union_iou_ignores_partition(gt in blobby(24, 24), pred in blobby(24, 24), cuts in prop::collection::vec(0u32..24, 1..4)) {
        let whole = miou_union(std::slice::from_ref(&pred), std::slice::from_ref(&gt)).unwrap();
        let mut pieces = Vec::new();
        let mut rest = gt.clone();
        for c in cuts {
            let piece = Bitmap::from_fn(24, 24, |x, y| rest.get(x, y) && x < c);
            rest.subtract(&piece);
            pieces.push(piece);
        }
        pieces.push(rest);
        let split = miou_union(&[pred], &pieces).unwrap();
        prop_assert!((whole - split).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_is_one(m in blobby(20, 20)) {
        prop_assert_eq!(mask_iou(&m, &m).unwrap(), 1.0);
        prop_assert_eq!(boundary_iou(&m, &m, &BOUNDARY_RADII).unwrap(), 1.0);
    }

    #[test]
    fn boundary_iou_matches_set_arithmetic(a in blobby(28, 20), b in blobby(28, 20)) {
        let got = boundary_iou(&a, &b, &BOUNDARY_RADII).unwrap();
        prop_assert!((got - boundary_iou_oracle(&a, &b, &BOUNDARY_RADII)).abs() < 1e-9);
    }
}

fn candidates() -> impl Strategy<Value = Vec<Candidate>> {
    prop::collection::vec((0u32..30, 0u32..30, 1u32..20, 1u32..20), 0..10).prop_map(|rects| {
        rects
            .into_iter()
            .enumerate()
            .map(|(k, (x, y, w, h))| Candidate {
                id: format!("c{k}"),
                mask: common::rect(32, 32, x, y, (x + w).min(32), (y + h).min(32)),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn filtering_is_idempotent(cands in candidates(), white_cols in 0u32..32) {
        let image = RgbImage::from_fn(32, 32, |x, _| if x < white_cols { Rgb([255, 255, 255]) } else { Rgb([40, 90, 200]) });
        let cfg = FilterConfig::default();
        let once = filter_candidates(&cands, &image, &cfg).unwrap();
        let twice = filter_candidates(&once.kept, &image, &cfg).unwrap();
        prop_assert_eq!(&twice.kept, &once.kept);
        prop_assert!(twice.removed.is_empty());
    }
}
