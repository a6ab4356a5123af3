//! Per-sample grounding metrics for points, boxes and masks.

use serde::{Deserialize, Serialize};

use super::hungarian::hungarian_match;
use super::EvalError;
use crate::bitmap::Bitmap;
use crate::mask::{BBox, ElementCategory, Point};

pub const POINT_RADIUS_PX: f64 = 5.0;
pub const BOX_IOU_THRESHOLD: f64 = 0.5;
pub const MASK_IOU_THRESHOLD: f64 = 0.5;
pub const BOUNDARY_RADII: [u32; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

impl SampleMetrics {
    /// Metrics from a match count; undefined ratios are 0.
    pub fn from_counts(tp: usize, predictions: usize, targets: usize) -> Self {
        debug_assert!(tp <= predictions && tp <= targets);
        let precision = ratio(tp as f64, predictions as f64);
        let recall = ratio(tp as f64, targets as f64);
        Self {
            tp,
            fp: predictions - tp,
            fn_: targets - tp,
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
        }
    }
}

fn check_dims<'a>(
    masks: impl IntoIterator<Item = &'a Bitmap>,
) -> Result<Option<(u32, u32)>, EvalError> {
    let mut dims = None;
    for m in masks {
        match dims {
            None => dims = Some(m.dims()),
            Some(d) if d != m.dims() => {
                return Err(EvalError::DimensionMismatch {
                    expected: d,
                    actual: m.dims(),
                })
            }
            _ => {}
        }
    }
    Ok(dims)
}

fn metrics_from_scores(
    scores: Vec<Vec<f64>>,
    eligible: Vec<Vec<bool>>,
    predictions: usize,
    targets: usize,
) -> Result<SampleMetrics, EvalError> {
    let matching = hungarian_match(&scores, &eligible)?;
    Ok(SampleMetrics::from_counts(
        matching.len(),
        predictions,
        targets,
    ))
}

/// Distance from `p` to the nearest foreground pixel of `mask`, looking no
/// further than `radius`; zero when `p` falls in a foreground pixel.
pub fn point_distance(p: Point, mask: &Bitmap, radius: f64) -> Option<f64> {
    let (w, h) = mask.dims();
    if !(p.x.is_finite() && p.y.is_finite()) {
        return None;
    }
    let (fx, fy) = (p.x.floor(), p.y.floor());
    if fx >= 0.0 && fy >= 0.0 && fx < w as f64 && fy < h as f64 && mask.get(fx as u32, fy as u32) {
        return Some(0.0);
    }
    let clamp = |v: f64, hi: u32| v.max(0.0).min(hi as f64 - 1.0);
    if w == 0 || h == 0 {
        return None;
    }
    let x0 = clamp((p.x - radius).ceil(), w) as u32;
    let x1 = clamp((p.x + radius).floor(), w) as u32;
    let y0 = clamp((p.y - radius).ceil(), h) as u32;
    let y1 = clamp((p.y + radius).floor(), h) as u32;
    let mut best: Option<f64> = None;
    for y in y0..=y1 {
        for x in x0..=x1 {
            if mask.get(x, y) {
                let d = ((x as f64 - p.x).powi(2) + (y as f64 - p.y).powi(2)).sqrt();
                if best.is_none_or(|b| d < b) {
                    best = Some(d);
                }
            }
        }
    }
    best.filter(|&d| d <= radius)
}

/// A point matches a target when it lands in the mask or within `radius`
/// pixels of it; among maximum matchings the closest points win.
pub fn eval_points(
    preds: &[Point],
    gts: &[Bitmap],
    radius: f64,
) -> Result<SampleMetrics, EvalError> {
    check_dims(gts)?;
    let mut scores = vec![vec![0.0; gts.len()]; preds.len()];
    let mut eligible = vec![vec![false; gts.len()]; preds.len()];
    for (i, p) in preds.iter().enumerate() {
        for (j, g) in gts.iter().enumerate() {
            if let Some(d) = point_distance(*p, g, radius) {
                scores[i][j] = -d;
                eligible[i][j] = true;
            }
        }
    }
    metrics_from_scores(scores, eligible, preds.len(), gts.len())
}

/// Intersection over union of continuous boxes.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    ratio(inter, a.area() + b.area() - inter)
}

pub fn eval_boxes(preds: &[BBox], gts: &[BBox], iou_thr: f64) -> Result<SampleMetrics, EvalError> {
    let scores: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| gts.iter().map(|g| box_iou(p, g)).collect())
        .collect();
    let eligible = scores
        .iter()
        .map(|row| row.iter().map(|&s| s >= iou_thr).collect())
        .collect();
    metrics_from_scores(scores, eligible, preds.len(), gts.len())
}

fn same_dims(a: &Bitmap, b: &Bitmap) -> Result<(), EvalError> {
    if a.dims() != b.dims() {
        return Err(EvalError::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    Ok(())
}

fn set_iou(a: &Bitmap, b: &Bitmap) -> f64 {
    ratio(a.intersection_count(b) as f64, a.union_count(b) as f64)
}

pub fn mask_iou(a: &Bitmap, b: &Bitmap) -> Result<f64, EvalError> {
    same_dims(a, b)?;
    Ok(set_iou(a, b))
}

/// Mean over `radii` of the IoU between the two masks' inner boundary bands.
pub fn boundary_iou(a: &Bitmap, b: &Bitmap, radii: &[u32]) -> Result<f64, EvalError> {
    same_dims(a, b)?;
    if radii.is_empty() {
        return Err(EvalError::EmptyInput("boundary radii".into()));
    }
    let sum: f64 = radii
        .iter()
        .map(|&d| set_iou(&a.boundary_band(d), &b.boundary_band(d)))
        .sum();
    Ok(sum / radii.len() as f64)
}

/// Which mask similarity a category is scored with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSimilarity {
    MaskIou,
    BoundaryIou,
}

impl MaskSimilarity {
    pub fn for_category(category: ElementCategory) -> Self {
        if category.thin_line() {
            MaskSimilarity::BoundaryIou
        } else {
            MaskSimilarity::MaskIou
        }
    }

    pub fn score(self, a: &Bitmap, b: &Bitmap) -> Result<f64, EvalError> {
        match self {
            MaskSimilarity::MaskIou => mask_iou(a, b),
            MaskSimilarity::BoundaryIou => boundary_iou(a, b, &BOUNDARY_RADII),
        }
    }
}

/// Mask matching; thin-line categories are scored on boundary bands.
pub fn eval_masks(
    preds: &[Bitmap],
    gts: &[Bitmap],
    category: ElementCategory,
    thr: f64,
) -> Result<SampleMetrics, EvalError> {
    check_dims(preds.iter().chain(gts))?;
    let sim = MaskSimilarity::for_category(category);
    let scores = preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| sim.score(p, g))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let eligible = scores
        .iter()
        .map(|row| row.iter().map(|&s| s >= thr).collect())
        .collect();
    metrics_from_scores(scores, eligible, preds.len(), gts.len())
}

/// IoU of the union of predictions with the union of targets.
pub fn miou_union(preds: &[Bitmap], gts: &[Bitmap]) -> Result<f64, EvalError> {
    check_dims(preds.iter().chain(gts))?;
    let (Some(p), Some(g)) = (Bitmap::union_all(preds), Bitmap::union_all(gts)) else {
        return Ok(0.0);
    };
    Ok(set_iou(&p, &g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    /// Mean per-sample union IoU (mask format only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub miou_union: Option<f64>,
    pub per_sample: Vec<SampleMetrics>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_sample_miou: Vec<f64>,
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// Uniform averages over samples; `miou_values` is empty or aligned.
pub fn macro_aggregate(
    per_sample: &[SampleMetrics],
    miou_values: &[f64],
) -> Result<MetricReport, EvalError> {
    let n = per_sample.len();
    if n == 0 {
        return Err(EvalError::EmptyInput("no samples".into()));
    }
    if !miou_values.is_empty() && miou_values.len() != n {
        return Err(EvalError::LengthMismatch {
            expected: n,
            actual: miou_values.len(),
        });
    }
    Ok(MetricReport {
        macro_p: mean(per_sample.iter().map(|m| m.precision), n),
        macro_r: mean(per_sample.iter().map(|m| m.recall), n),
        macro_f1: mean(per_sample.iter().map(|m| m.f1), n),
        miou_union: (!miou_values.is_empty()).then(|| mean(miou_values.iter().copied(), n)),
        per_sample: per_sample.to_vec(),
        per_sample_miou: miou_values.to_vec(),
    })
}
