//! Referring-target protocol: parses the `{"results": [...]}` target JSON
//! and resolves it against traced executions into ground-truth instances in
//! point, box and mask formats.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmap::Bitmap;
use crate::mask::{
    compose_instances, representative_point, tight_bbox, BBox, ElementCategory, InstanceId,
    InstanceMask, MaskError, Point,
};
use crate::tracer::{MarkerId, TracedScene};

#[derive(Debug, Error, PartialEq)]
pub enum ResolveError {
    #[error("target JSON schema error: {0}")]
    SchemaError(String),
    #[error("invocation_count is null but {marker} ran {executions} times")]
    AmbiguousNullInvocation { marker: MarkerId, executions: u32 },
    #[error("no execution {invocation:?} of {marker}")]
    UnknownExecution {
        marker: MarkerId,
        invocation: Option<u32>,
    },
    #[error("{marker} execution {invocation} has no element {index} ({available} instances)")]
    IndexOutOfRange {
        marker: MarkerId,
        invocation: u32,
        index: usize,
        available: usize,
    },
    #[error(
        "element_indices is null but {marker} execution {invocation} produced {count} instances"
    )]
    SingletonViolation {
        marker: MarkerId,
        invocation: u32,
        count: usize,
    },
    #[error("{marker} execution {invocation} produced no {category} instances")]
    CategoryMismatch {
        marker: MarkerId,
        invocation: u32,
        category: ElementCategory,
    },
    #[error("invalid grounding sample: {0}")]
    InvalidSample(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// One `results` entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub line: MarkerId,
    pub invocation_count: Option<u32>,
    pub element_indices: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub results: Vec<TargetEntry>,
}

#[derive(Deserialize)]
struct RawSpec {
    results: Option<Vec<RawEntry>>,
}

#[derive(Deserialize)]
struct RawEntry {
    line: Option<serde_json::Value>,
    #[serde(default)]
    invocation_count: serde_json::Value,
    #[serde(default)]
    element_indices: serde_json::Value,
}

fn non_negative(v: &serde_json::Value, what: &str) -> Result<u64, ResolveError> {
    v.as_u64().ok_or_else(|| {
        ResolveError::SchemaError(format!("{what} must be a non-negative integer, got {v}"))
    })
}

/// Parses and validates target JSON. A null `invocation_count` stays `None`
/// here; it is resolved once the marker's execution count is known.
pub fn parse_target_json(text: &str) -> Result<TargetSpec, ResolveError> {
    let raw: RawSpec =
        serde_json::from_str(text).map_err(|e| ResolveError::SchemaError(e.to_string()))?;
    let entries = raw
        .results
        .ok_or_else(|| ResolveError::SchemaError("missing \"results\"".into()))?;
    if entries.is_empty() {
        return Err(ResolveError::SchemaError(
            "\"results\" must refer to at least one target".into(),
        ));
    }
    let mut results = Vec::with_capacity(entries.len());
    for (k, e) in entries.into_iter().enumerate() {
        let line = match e.line {
            Some(serde_json::Value::String(s)) => s
                .parse::<MarkerId>()
                .map_err(|msg| ResolveError::SchemaError(format!("results[{k}].line: {msg}")))?,
            other => {
                return Err(ResolveError::SchemaError(format!(
                    "results[{k}].line must be a marker string, got {other:?}"
                )))
            }
        };
        let invocation_count = match &e.invocation_count {
            serde_json::Value::Null => None,
            v => Some(
                u32::try_from(non_negative(v, &format!("results[{k}].invocation_count"))?)
                    .map_err(|_| ResolveError::SchemaError("invocation_count too large".into()))?,
            ),
        };
        let element_indices = match &e.element_indices {
            serde_json::Value::Null => None,
            serde_json::Value::Array(items) => {
                if items.is_empty() {
                    return Err(ResolveError::SchemaError(format!(
                        "results[{k}].element_indices is empty; omit the entry instead"
                    )));
                }
                let mut out: Vec<usize> = Vec::with_capacity(items.len());
                for v in items {
                    let idx = non_negative(v, &format!("results[{k}].element_indices"))? as usize;
                    if out.contains(&idx) {
                        return Err(ResolveError::SchemaError(format!(
                            "results[{k}].element_indices repeats {idx}"
                        )));
                    }
                    out.push(idx);
                }
                Some(out)
            }
            other => {
                return Err(ResolveError::SchemaError(format!(
                    "results[{k}].element_indices must be a list or null, got {other}"
                )))
            }
        };
        results.push(TargetEntry {
            line,
            invocation_count,
            element_indices,
        });
    }
    Ok(TargetSpec { results })
}

/// Instances reachable from marked executions, keyed by (marker, invocation).
///
/// Built either from a live scene or from a stored dataset; `T` is whatever
/// handle the caller wants back.
#[derive(Debug, Clone)]
pub struct ExecutionIndex<T> {
    executions: BTreeMap<MarkerId, u32>,
    instances: BTreeMap<(MarkerId, u32), Vec<IndexedInstance<T>>>,
}

#[derive(Debug, Clone)]
struct IndexedInstance<T> {
    category: ElementCategory,
    element_index: usize,
    handle: T,
}

impl<T> Default for ExecutionIndex<T> {
    fn default() -> Self {
        Self {
            executions: BTreeMap::new(),
            instances: BTreeMap::new(),
        }
    }
}

impl<T: Clone + PartialEq> ExecutionIndex<T> {
    pub fn new(executions: BTreeMap<MarkerId, u32>) -> Self {
        Self {
            executions,
            instances: BTreeMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        marker: MarkerId,
        invocation: u32,
        category: ElementCategory,
        element_index: usize,
        handle: T,
    ) {
        self.instances
            .entry((marker, invocation))
            .or_default()
            .push(IndexedInstance {
                category,
                element_index,
                handle,
            });
    }

    /// Resolves every entry to handles, deduplicated in first-seen order.
    pub fn resolve(
        &self,
        spec: &TargetSpec,
        category: ElementCategory,
    ) -> Result<Vec<T>, ResolveError> {
        let mut out: Vec<T> = Vec::new();
        for entry in &spec.results {
            let marker = entry.line;
            let runs = self
                .executions
                .get(&marker)
                .copied()
                .filter(|&n| n > 0)
                .ok_or(ResolveError::UnknownExecution {
                    marker,
                    invocation: entry.invocation_count,
                })?;
            let invocation = match entry.invocation_count {
                Some(i) => i,
                None if runs == 1 => 0,
                None => {
                    return Err(ResolveError::AmbiguousNullInvocation {
                        marker,
                        executions: runs,
                    })
                }
            };
            if invocation >= runs {
                return Err(ResolveError::UnknownExecution {
                    marker,
                    invocation: Some(invocation),
                });
            }
            let mut found: Vec<&IndexedInstance<T>> = self
                .instances
                .get(&(marker, invocation))
                .into_iter()
                .flatten()
                .filter(|i| i.category == category)
                .collect();
            found.sort_by_key(|i| i.element_index);
            if found.is_empty() {
                return Err(ResolveError::CategoryMismatch {
                    marker,
                    invocation,
                    category,
                });
            }
            let selected: Vec<&IndexedInstance<T>> = match &entry.element_indices {
                None if found.len() == 1 => vec![found[0]],
                None => {
                    return Err(ResolveError::SingletonViolation {
                        marker,
                        invocation,
                        count: found.len(),
                    })
                }
                Some(indices) => indices
                    .iter()
                    .map(|&idx| {
                        found
                            .iter()
                            .copied()
                            .find(|i| i.element_index == idx)
                            .ok_or(ResolveError::IndexOutOfRange {
                                marker,
                                invocation,
                                index: idx,
                                available: found.len(),
                            })
                    })
                    .collect::<Result<_, _>>()?,
            };
            for s in selected {
                if !out.contains(&s.handle) {
                    out.push(s.handle.clone());
                }
            }
        }
        Ok(out)
    }
}

/// Resolves a target spec against a traced scene at `category`'s granularity.
pub fn resolve_targets(
    scene: &TracedScene,
    spec: &TargetSpec,
    category: ElementCategory,
) -> Result<Vec<InstanceMask>, ResolveError> {
    let mut index: ExecutionIndex<usize> = ExecutionIndex::new(scene.marker_executions());
    let mut pool: Vec<InstanceMask> = Vec::new();
    for entry in &spec.results {
        for call in scene.marker_calls(entry.line) {
            let invocation = call.invocation_count.unwrap_or(0);
            if pool.iter().any(|m| m.provenance.call_index == call.index) {
                continue;
            }
            let instances = match compose_instances(scene, call, category.granularity()) {
                Ok(v) => v,
                Err(
                    MaskError::UnsupportedGranularity { .. }
                    | MaskError::UnmappedCombination { .. },
                ) => continue,
                Err(e) => return Err(e.into()),
            };
            for inst in instances {
                index.insert(
                    entry.line,
                    invocation,
                    inst.category,
                    inst.provenance.element_index.unwrap_or(0),
                    pool.len(),
                );
                pool.push(inst);
            }
        }
    }
    let picked = index.resolve(spec, category)?;
    Ok(picked.into_iter().map(|i| pool[i].clone()).collect())
}

/// Aligned point / box / mask views of a target set.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFormats {
    pub points: Vec<Point>,
    pub bboxes: Vec<BBox>,
    pub masks: Vec<Bitmap>,
}

pub fn materialize_formats(targets: &[InstanceMask]) -> Result<TargetFormats, ResolveError> {
    materialize_bitmaps(targets.iter().map(|t| t.bitmap.clone()).collect())
}

fn materialize_bitmaps(masks: Vec<Bitmap>) -> Result<TargetFormats, ResolveError> {
    if masks.is_empty() {
        return Err(ResolveError::InvalidSample("no targets".into()));
    }
    let mut points = Vec::with_capacity(masks.len());
    let mut bboxes = Vec::with_capacity(masks.len());
    for m in &masks {
        bboxes.push(tight_bbox(m)?);
        points.push(representative_point(m)?);
    }
    Ok(TargetFormats {
        points,
        bboxes,
        masks,
    })
}

/// Primary referring-cue families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CluePrimary {
    Data,
    Visual,
    TextualLocalization,
}

/// The thirteen cue subtypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClueSubtype {
    ValueRangeFiltering,
    RankBandSetSelection,
    LocalStructurePatterns,
    CrossSeriesRelations,
    ColorAttributes,
    ShapeStyle,
    LineStrokeStyle,
    FillStyle,
    AxisLabels,
    AxisTicks,
    LegendEntries,
    SubplotTitles,
    TextAnnotations,
}

impl ClueSubtype {
    pub fn primary(self) -> CluePrimary {
        use ClueSubtype::*;
        match self {
            ValueRangeFiltering
            | RankBandSetSelection
            | LocalStructurePatterns
            | CrossSeriesRelations => CluePrimary::Data,
            ColorAttributes | ShapeStyle | LineStrokeStyle | FillStyle => CluePrimary::Visual,
            AxisLabels | AxisTicks | LegendEntries | SubplotTitles | TextAnnotations => {
                CluePrimary::TextualLocalization
            }
        }
    }
}

/// Tags describing which cues an expression relies on. Never read by the
/// evaluator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClueLabels {
    pub primary: Vec<CluePrimary>,
    #[serde(default)]
    pub subtypes: Vec<ClueSubtype>,
    #[serde(default)]
    pub hybrid: bool,
}

impl ClueLabels {
    pub fn validate(&self) -> Result<(), ResolveError> {
        let bad = |m: String| Err(ResolveError::InvalidSample(m));
        if self.primary.is_empty() {
            return bad("clue labels need at least one primary category".into());
        }
        let mut seen = self.primary.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.primary.len() {
            return bad("duplicate primary clue category".into());
        }
        if self.hybrid != (self.primary.len() > 1) {
            return bad("hybrid expressions combine two or more primary categories".into());
        }
        if let Some(s) = self
            .subtypes
            .iter()
            .find(|s| !self.primary.contains(&s.primary()))
        {
            return bad(format!(
                "subtype {s:?} outside the listed primary categories"
            ));
        }
        Ok(())
    }
}

/// One grounding example: image, expression, category and target set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingSample {
    pub id: String,
    /// Image id of the scene the targets come from.
    pub scene_ref: u64,
    pub expression: String,
    pub category: ElementCategory,
    pub clue_labels: ClueLabels,
    pub targets: Vec<InstanceId>,
    pub points: Vec<Point>,
    pub bboxes: Vec<BBox>,
    pub masks: Vec<Bitmap>,
}

impl GroundingSample {
    /// Builds a sample; every target must carry `category`.
    pub fn new(
        id: impl Into<String>,
        scene_ref: u64,
        expression: impl Into<String>,
        category: ElementCategory,
        clue_labels: ClueLabels,
        targets: &[InstanceMask],
    ) -> Result<Self, ResolveError> {
        if let Some(t) = targets.iter().find(|t| t.category != category) {
            return Err(ResolveError::InvalidSample(format!(
                "target {} is {} but the sample category is {category}",
                t.instance_id, t.category
            )));
        }
        let formats = materialize_formats(targets)?;
        let sample = Self {
            id: id.into(),
            scene_ref,
            expression: expression.into(),
            category,
            clue_labels,
            targets: targets.iter().map(|t| t.instance_id.clone()).collect(),
            points: formats.points,
            bboxes: formats.bboxes,
            masks: formats.masks,
        };
        sample.validate()?;
        Ok(sample)
    }

    /// Builds a sample from already-materialized target masks.
    pub fn from_masks(
        id: impl Into<String>,
        scene_ref: u64,
        expression: impl Into<String>,
        category: ElementCategory,
        clue_labels: ClueLabels,
        targets: Vec<(InstanceId, Bitmap)>,
    ) -> Result<Self, ResolveError> {
        let (ids, masks): (Vec<_>, Vec<_>) = targets.into_iter().unzip();
        let formats = materialize_bitmaps(masks)?;
        let sample = Self {
            id: id.into(),
            scene_ref,
            expression: expression.into(),
            category,
            clue_labels,
            targets: ids,
            points: formats.points,
            bboxes: formats.bboxes,
            masks: formats.masks,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<(), ResolveError> {
        let k = self.targets.len();
        if k == 0 {
            return Err(ResolveError::InvalidSample(
                "a sample needs at least one target".into(),
            ));
        }
        if self.points.len() != k || self.bboxes.len() != k || self.masks.len() != k {
            return Err(ResolveError::InvalidSample(
                "target formats are not aligned".into(),
            ));
        }
        let mut ids = self.targets.clone();
        ids.sort();
        ids.dedup();
        if ids.len() != k {
            return Err(ResolveError::InvalidSample(
                "duplicate target instance".into(),
            ));
        }
        self.clue_labels.validate()
    }

    pub fn dims(&self) -> (u32, u32) {
        self.masks.first().map(Bitmap::dims).unwrap_or((0, 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionFormat {
    Point,
    Bbox,
    Mask,
}

/// A model's output set for one sample, in a single format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", content = "items", rename_all = "snake_case")]
pub enum PredictionSet {
    Point(Vec<Point>),
    Bbox(Vec<BBox>),
    Mask(Vec<Bitmap>),
}

impl PredictionSet {
    pub fn empty(format: PredictionFormat) -> Self {
        match format {
            PredictionFormat::Point => PredictionSet::Point(Vec::new()),
            PredictionFormat::Bbox => PredictionSet::Bbox(Vec::new()),
            PredictionFormat::Mask => PredictionSet::Mask(Vec::new()),
        }
    }

    pub fn format(&self) -> PredictionFormat {
        match self {
            PredictionSet::Point(_) => PredictionFormat::Point,
            PredictionSet::Bbox(_) => PredictionFormat::Bbox,
            PredictionSet::Mask(_) => PredictionFormat::Mask,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PredictionSet::Point(v) => v.len(),
            PredictionSet::Bbox(v) => v.len(),
            PredictionSet::Mask(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks every item lies inside a `width`×`height` image.
    pub fn validate(&self, width: u32, height: u32) -> Result<(), String> {
        match self {
            PredictionSet::Point(v) => v
                .iter()
                .position(|p| !p.within(width, height))
                .map_or(Ok(()), |i| Err(format!("point {i} outside the image"))),
            PredictionSet::Bbox(v) => v
                .iter()
                .position(|b| !b.is_valid() || !b.within(width, height))
                .map_or(Ok(()), |i| {
                    Err(format!("box {i} invalid or outside the image"))
                }),
            PredictionSet::Mask(v) => v
                .iter()
                .position(|m| m.dims() != (width, height))
                .map_or(Ok(()), |i| {
                    Err(format!("mask {i} has the wrong dimensions"))
                }),
        }
    }
}
