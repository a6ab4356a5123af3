//! Set-based grounding metrics and COCO-style mAP.

mod coco;
mod hungarian;
mod metrics;
mod records;

use thiserror::Error;

pub use coco::{coco_map, default_thresholds, GtInstance, MapReport, PredInstance, MAX_DETECTIONS};
pub use hungarian::{hungarian_match, Matching};
pub use metrics::{
    boundary_iou, box_iou, eval_boxes, eval_masks, eval_points, macro_aggregate, mask_iou,
    miou_union, point_distance, MaskSimilarity, MetricReport, SampleMetrics, BOUNDARY_RADII,
    BOX_IOU_THRESHOLD, MASK_IOU_THRESHOLD, POINT_RADIUS_PX,
};
pub use records::{
    evaluate_bundle, gold_instance_predictions, gold_predictions, load_instance_predictions,
    load_predictions, map_bundle, write_jsonl, CategoryRef, EvalReport, InstancePrediction,
    PredictionRecord,
};

use crate::dataset::DatasetError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask is {actual:?}, expected {expected:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite score at ({row}, {col})")]
    NonFiniteScore { row: usize, col: usize },
    #[error("unknown category {0}")]
    UnknownCategory(String),
    #[error("unknown sample {0}")]
    UnknownSample(String),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
