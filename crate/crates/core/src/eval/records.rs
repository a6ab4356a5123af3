//! Prediction files and whole-bundle evaluation.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::coco::{coco_map, default_thresholds, GtInstance, MapReport, PredInstance};
use super::metrics::{
    eval_boxes, eval_masks, eval_points, macro_aggregate, miou_union, MetricReport, SampleMetrics,
    BOX_IOU_THRESHOLD, MASK_IOU_THRESHOLD, POINT_RADIUS_PX,
};
use super::EvalError;
use crate::bitmap::Bitmap;
use crate::dataset::{decode_rle, encode_rle, DatasetBundle, RleMask};
use crate::mask::ElementCategory;
use crate::targets::{PredictionFormat, PredictionSet};

/// One JSONL line: `{"sample_id", "format", "items"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    #[serde(flatten)]
    pub prediction: PredictionSet,
}

/// Category given either by dataset id or by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CategoryRef {
    Id(u32),
    Name(String),
}

impl CategoryRef {
    pub fn resolve(&self) -> Result<ElementCategory, EvalError> {
        match self {
            CategoryRef::Id(id) => ElementCategory::from_dataset_id(*id)
                .ok_or_else(|| EvalError::UnknownCategory(id.to_string())),
            CategoryRef::Name(name) => name
                .parse()
                .map_err(|_| EvalError::UnknownCategory(name.clone())),
        }
    }
}

/// One scored instance mask for mAP, COCO results style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub image_id: u64,
    pub category_id: CategoryRef,
    pub segmentation: RleMask,
    pub score: f64,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| {
                EvalError::InvalidPrediction(format!("{}:{}: {e}", path.display(), n + 1))
            })
        })
        .collect()
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    read_jsonl(path)
}

pub fn load_instance_predictions(path: &Path) -> Result<Vec<InstancePrediction>, EvalError> {
    read_jsonl(path)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)
            .map_err(|e| EvalError::InvalidPrediction(e.to_string()))?;
        out.push(b'\n');
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: PredictionFormat,
    pub sample_ids: Vec<String>,
    /// Samples without a prediction line, scored as empty predictions.
    pub missing: Vec<String>,
    #[serde(flatten)]
    pub report: MetricReport,
}

/// Scores one prediction per bundle sample. Samples absent from `records`
/// count as empty predictions.
pub fn evaluate_bundle(
    bundle: &DatasetBundle,
    records: &[PredictionRecord],
    format: PredictionFormat,
) -> Result<EvalReport, EvalError> {
    let mut by_id: HashMap<&str, &PredictionSet> = HashMap::new();
    for r in records {
        if bundle.sample(&r.sample_id).is_none() {
            return Err(EvalError::UnknownSample(r.sample_id.clone()));
        }
        if r.prediction.format() != format {
            return Err(EvalError::InvalidPrediction(format!(
                "sample {} is {:?}, expected {format:?}",
                r.sample_id,
                r.prediction.format()
            )));
        }
        if by_id.insert(&r.sample_id, &r.prediction).is_some() {
            return Err(EvalError::InvalidPrediction(format!(
                "duplicate prediction for sample {}",
                r.sample_id
            )));
        }
    }
    let empty = PredictionSet::empty(format);
    let mut per_sample: Vec<SampleMetrics> = Vec::with_capacity(bundle.samples.len());
    let mut miou: Vec<f64> = Vec::new();
    let mut missing = Vec::new();
    for sample in &bundle.samples {
        let pred = by_id.get(sample.id.as_str()).copied().unwrap_or_else(|| {
            missing.push(sample.id.clone());
            &empty
        });
        let image = bundle
            .image(sample.image_id)
            .ok_or_else(|| EvalError::UnknownSample(sample.id.clone()))?;
        pred.validate(image.width, image.height)
            .map_err(|m| EvalError::InvalidPrediction(format!("sample {}: {m}", sample.id)))?;
        let targets = bundle.sample_targets(sample)?;
        let metrics = match pred {
            PredictionSet::Point(points) => {
                let gts = targets
                    .iter()
                    .map(|a| a.bitmap())
                    .collect::<Result<Vec<_>, _>>()?;
                eval_points(points, &gts, POINT_RADIUS_PX)?
            }
            PredictionSet::Bbox(boxes) => {
                let gts: Vec<_> = targets.iter().map(|a| a.bbox).collect();
                eval_boxes(boxes, &gts, BOX_IOU_THRESHOLD)?
            }
            PredictionSet::Mask(masks) => {
                let gts = targets
                    .iter()
                    .map(|a| a.bitmap())
                    .collect::<Result<Vec<_>, _>>()?;
                miou.push(miou_union(masks, &gts)?);
                eval_masks(masks, &gts, sample.category, MASK_IOU_THRESHOLD)?
            }
        };
        per_sample.push(metrics);
    }
    Ok(EvalReport {
        format,
        sample_ids: bundle.samples.iter().map(|s| s.id.clone()).collect(),
        missing,
        report: macro_aggregate(&per_sample, &miou)?,
    })
}

/// Gold targets rewritten as predictions, one record per sample.
pub fn gold_predictions(
    bundle: &DatasetBundle,
    format: PredictionFormat,
) -> Result<Vec<PredictionRecord>, EvalError> {
    bundle
        .samples
        .iter()
        .map(|s| {
            let targets = bundle.sample_targets(s)?;
            let prediction = match format {
                PredictionFormat::Point => {
                    PredictionSet::Point(targets.iter().map(|a| a.point).collect())
                }
                PredictionFormat::Bbox => {
                    PredictionSet::Bbox(targets.iter().map(|a| a.bbox).collect())
                }
                PredictionFormat::Mask => PredictionSet::Mask(
                    targets
                        .iter()
                        .map(|a| a.bitmap())
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            };
            Ok(PredictionRecord {
                sample_id: s.id.clone(),
                prediction,
            })
        })
        .collect()
}

/// Every bundle annotation as a confidence-1 instance prediction.
pub fn gold_instance_predictions(bundle: &DatasetBundle) -> Vec<InstancePrediction> {
    bundle
        .annotations
        .iter()
        .map(|a| InstancePrediction {
            image_id: a.image_id,
            category_id: CategoryRef::Id(a.category_id),
            segmentation: a.rle.clone(),
            score: 1.0,
        })
        .collect()
}

fn decode_sized(rle: &RleMask, w: u32, h: u32) -> Result<Bitmap, EvalError> {
    let m = decode_rle(rle)?;
    if m.dims() != (w, h) {
        return Err(EvalError::DimensionMismatch {
            expected: (w, h),
            actual: m.dims(),
        });
    }
    Ok(m)
}

/// Mask mAP of instance predictions against every annotation in the bundle.
pub fn map_bundle(
    bundle: &DatasetBundle,
    preds: &[InstancePrediction],
) -> Result<MapReport, EvalError> {
    let mut gts = Vec::with_capacity(bundle.annotations.len());
    for a in &bundle.annotations {
        gts.push(GtInstance {
            image_id: a.image_id,
            category: a
                .category()
                .ok_or_else(|| EvalError::UnknownCategory(a.category_id.to_string()))?,
            mask: a.bitmap()?,
        });
    }
    let mut instances = Vec::with_capacity(preds.len());
    for p in preds {
        let image = bundle
            .image(p.image_id)
            .ok_or_else(|| EvalError::InvalidPrediction(format!("unknown image {}", p.image_id)))?;
        instances.push(PredInstance {
            image_id: p.image_id,
            category: p.category_id.resolve()?,
            mask: decode_sized(&p.segmentation, image.width, image.height)?,
            confidence: p.score,
        });
    }
    coco_map(&instances, &gts, &default_thresholds())
}

impl InstancePrediction {
    pub fn from_mask(image_id: u64, category: ElementCategory, mask: &Bitmap, score: f64) -> Self {
        Self {
            image_id,
            category_id: CategoryRef::Id(category.dataset_id()),
            segmentation: encode_rle(mask),
            score,
        }
    }
}
