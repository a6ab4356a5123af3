//! COCO-style mask mAP: greedy confidence-ranked matching per image and
//! category, 101-point interpolated precision, area-stratified.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::bitmap::Bitmap;
use crate::mask::ElementCategory;

pub const MAX_DETECTIONS: usize = 100;
const SMALL_AREA: f64 = 32.0 * 32.0;
const MEDIUM_AREA: f64 = 96.0 * 96.0;
const RECALL_POINTS: usize = 101;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtInstance {
    pub image_id: u64,
    pub category: ElementCategory,
    pub mask: Bitmap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredInstance {
    pub image_id: u64,
    pub category: ElementCategory,
    pub mask: Bitmap,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AreaRange {
    All,
    Small,
    Medium,
    Large,
}

impl AreaRange {
    const ALL: [AreaRange; 4] = [
        AreaRange::All,
        AreaRange::Small,
        AreaRange::Medium,
        AreaRange::Large,
    ];

    fn contains(self, area: f64) -> bool {
        match self {
            AreaRange::All => true,
            AreaRange::Small => area < SMALL_AREA,
            AreaRange::Medium => (SMALL_AREA..MEDIUM_AREA).contains(&area),
            AreaRange::Large => area >= MEDIUM_AREA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    /// Mean over thresholds and categories.
    pub map: f64,
    pub ap50: f64,
    pub ap75: f64,
    /// `None` when no ground truth falls in the bucket.
    pub ap_small: Option<f64>,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
    pub per_category: BTreeMap<String, f64>,
    pub thresholds: Vec<f64>,
}

/// Matching outcome of one (image, category, area range, threshold).
struct Evaluated {
    /// (confidence, matched, ignored) per kept detection, in rank order.
    dets: Vec<(f64, bool, bool)>,
    non_ignored_gts: usize,
}

fn evaluate_cell(
    gts: &[&GtInstance],
    dts: &[&PredInstance],
    ious: &[Vec<f64>],
    range: AreaRange,
    thr: f64,
) -> Evaluated {
    let gt_ignore: Vec<bool> = gts
        .iter()
        .map(|g| !range.contains(g.mask.area() as f64))
        .collect();
    // non-ignored ground truths are considered first
    let mut order: Vec<usize> = (0..gts.len()).collect();
    order.sort_by_key(|&g| gt_ignore[g]);
    let mut gt_taken = vec![false; gts.len()];
    let mut dets = Vec::with_capacity(dts.len());
    for (d, det) in dts.iter().enumerate() {
        let mut best_iou = thr.min(1.0 - 1e-10);
        let mut best: Option<usize> = None;
        for &g in &order {
            if gt_taken[g] {
                continue;
            }
            if let Some(m) = best {
                if !gt_ignore[m] && gt_ignore[g] {
                    break;
                }
            }
            if ious[d][g] < best_iou {
                continue;
            }
            best_iou = ious[d][g];
            best = Some(g);
        }
        let (matched, ignored) = match best {
            Some(g) => {
                gt_taken[g] = true;
                (true, gt_ignore[g])
            }
            None => (false, !range.contains(det.mask.area() as f64)),
        };
        dets.push((det.confidence, matched, ignored));
    }
    Evaluated {
        dets,
        non_ignored_gts: gt_ignore.iter().filter(|&&i| !i).count(),
    }
}

/// Interpolated average precision; `None` when there are no ground truths.
fn average_precision(cells: &[Evaluated]) -> Option<f64> {
    let npig: usize = cells.iter().map(|c| c.non_ignored_gts).sum();
    if npig == 0 {
        return None;
    }
    let mut dets: Vec<(f64, bool, bool)> =
        cells.iter().flat_map(|c| c.dets.iter().copied()).collect();
    // stable: equal confidences keep image order
    dets.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    for &(_, matched, ignored) in &dets {
        if ignored {
            continue;
        }
        if matched {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / npig as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    for k in 0..RECALL_POINTS {
        let target = k as f64 / (RECALL_POINTS - 1) as f64;
        let idx = recall.partition_point(|&r| r < target);
        if idx < precision.len() {
            sum += precision[idx];
        }
    }
    Some(sum / RECALL_POINTS as f64)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mask mAP over categories that have ground truth.
pub fn coco_map(
    preds: &[PredInstance],
    gts: &[GtInstance],
    thresholds: &[f64],
) -> Result<MapReport, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::EmptyInput("IoU thresholds".into()));
    }
    for (k, p) in preds.iter().enumerate() {
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(EvalError::InvalidPrediction(format!(
                "prediction {k} has confidence {} outside [0, 1]",
                p.confidence
            )));
        }
    }
    let categories: BTreeSet<ElementCategory> = gts.iter().map(|g| g.category).collect();
    let images: BTreeSet<u64> = gts
        .iter()
        .map(|g| g.image_id)
        .chain(preds.iter().map(|p| p.image_id))
        .collect();

    // ap[category][range][threshold]
    let mut table: BTreeMap<ElementCategory, Vec<Vec<Option<f64>>>> = BTreeMap::new();
    for &cat in &categories {
        let mut cells: Vec<Vec<Vec<Evaluated>>> = AreaRange::ALL
            .iter()
            .map(|_| thresholds.iter().map(|_| Vec::new()).collect())
            .collect();
        for &img in &images {
            let g: Vec<&GtInstance> = gts
                .iter()
                .filter(|g| g.image_id == img && g.category == cat)
                .collect();
            let mut d: Vec<&PredInstance> = preds
                .iter()
                .filter(|p| p.image_id == img && p.category == cat)
                .collect();
            if g.is_empty() && d.is_empty() {
                continue;
            }
            d.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
            d.truncate(MAX_DETECTIONS);
            let ious = d
                .iter()
                .map(|p| {
                    g.iter()
                        .map(|t| super::metrics::mask_iou(&p.mask, &t.mask))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            for (r, &range) in AreaRange::ALL.iter().enumerate() {
                for (t, &thr) in thresholds.iter().enumerate() {
                    cells[r][t].push(evaluate_cell(&g, &d, &ious, range, thr));
                }
            }
        }
        let aps = cells
            .iter()
            .map(|per_thr| per_thr.iter().map(|c| average_precision(c)).collect())
            .collect();
        table.insert(cat, aps);
    }

    let collect = |range: usize, thr: Option<usize>| -> Vec<f64> {
        table
            .values()
            .flat_map(|aps| {
                aps[range]
                    .iter()
                    .enumerate()
                    .filter(move |(t, _)| thr.is_none_or(|x| x == *t))
                    .filter_map(|(_, v)| *v)
            })
            .collect()
    };
    let at = |value: f64| thresholds.iter().position(|&t| (t - value).abs() < 1e-12);
    let per_category = table
        .iter()
        .filter_map(|(c, aps)| {
            let v: Vec<f64> = aps[0].iter().filter_map(|v| *v).collect();
            mean(&v).map(|m| (c.name().to_string(), m))
        })
        .collect();
    Ok(MapReport {
        map: mean(&collect(0, None)).unwrap_or(0.0),
        ap50: at(0.5)
            .and_then(|t| mean(&collect(0, Some(t))))
            .unwrap_or(0.0),
        ap75: at(0.75)
            .and_then(|t| mean(&collect(0, Some(t))))
            .unwrap_or(0.0),
        ap_small: mean(&collect(1, None)),
        ap_medium: mean(&collect(2, None)),
        ap_large: mean(&collect(3, None)),
        per_category,
        thresholds: thresholds.to_vec(),
    })
}
