//! COCO-style dataset bundle: `dataset.json` plus `images/*.png`.

mod rle;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rle::{decode_rle, encode_rle, RleMask};

use crate::bitmap::Bitmap;
use crate::mask::{
    scene_instances, BBox, ElementCategory, Granularity, InstanceId, MaskError, Point, Provenance,
};
use crate::targets::{
    parse_target_json, ClueLabels, CluePrimary, ClueSubtype, ExecutionIndex, GroundingSample,
    ResolveError, TargetSpec,
};
use crate::tracer::{MarkerId, TracedScene};

pub const SCHEMA_VERSION: u32 = 1;
pub const DATASET_FILE: &str = "dataset.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("RLE counts sum to {actual}, expected {expected}")]
    LengthMismatch { expected: u64, actual: u64 },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("invalid bundle: {0}")]
    Invalid(String),
    #[error("unsupported schema_version {0}")]
    SchemaVersion(u32),
    #[error("image error: {0}")]
    Image(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    /// Path relative to the bundle directory.
    pub file: String,
    pub height: u32,
    pub width: u32,
    pub source_tag: String,
    pub render_scale: f64,
    pub seed: u64,
    /// How many times each marker ran; lets target specs resolve offline.
    pub marker_executions: BTreeMap<MarkerId, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub id: u32,
    pub name: ElementCategory,
    pub thin_line: bool,
    pub granularity: Granularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    pub instance_id: InstanceId,
    pub rle: RleMask,
    pub bbox: BBox,
    pub point: Point,
    pub area: u64,
    pub provenance: Provenance,
}

impl AnnotationRecord {
    pub fn category(&self) -> Option<ElementCategory> {
        ElementCategory::from_dataset_id(self.category_id)
    }

    pub fn bitmap(&self) -> Result<Bitmap, DatasetError> {
        decode_rle(&self.rle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub image_id: u64,
    pub expression: String,
    pub category: ElementCategory,
    pub clue_labels: ClueLabels,
    /// Annotation ids.
    pub targets: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub schema_version: u32,
    pub images: Vec<ImageRecord>,
    pub categories: Vec<CategoryRecord>,
    pub annotations: Vec<AnnotationRecord>,
    pub samples: Vec<SampleRecord>,
}

/// A traced scene plus the label it is filed under (usually the script stem).
#[derive(Debug, Clone)]
pub struct SceneEntry {
    pub source_tag: String,
    pub scene: TracedScene,
}

pub fn category_table() -> Vec<CategoryRecord> {
    ElementCategory::sorted_by_name()
        .into_iter()
        .map(|c| CategoryRecord {
            id: c.dataset_id(),
            name: c,
            thin_line: c.thin_line(),
            granularity: c.granularity(),
        })
        .collect()
}

impl DatasetBundle {
    pub fn empty() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            images: Vec::new(),
            categories: category_table(),
            annotations: Vec::new(),
            samples: Vec::new(),
        }
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn image_by_tag(&self, tag: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.source_tag == tag)
    }

    pub fn annotation(&self, id: u64) -> Option<&AnnotationRecord> {
        self.annotations
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.annotations[i])
    }

    pub fn sample(&self, id: &str) -> Option<&SampleRecord> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Annotations of one image with a given category.
    pub fn image_annotations(
        &self,
        image_id: u64,
        category: ElementCategory,
    ) -> impl Iterator<Item = &AnnotationRecord> {
        let cid = category.dataset_id();
        self.annotations
            .iter()
            .filter(move |a| a.image_id == image_id && a.category_id == cid)
    }

    /// Target annotations of a sample, in sample order.
    pub fn sample_targets(
        &self,
        sample: &SampleRecord,
    ) -> Result<Vec<&AnnotationRecord>, DatasetError> {
        sample
            .targets
            .iter()
            .map(|&id| {
                self.annotation(id).ok_or_else(|| {
                    DatasetError::DanglingReference(format!(
                        "sample {} -> annotation {id}",
                        sample.id
                    ))
                })
            })
            .collect()
    }

    /// Rebuilds the full in-memory sample (with decoded masks).
    pub fn grounding_sample(&self, sample: &SampleRecord) -> Result<GroundingSample, DatasetError> {
        let targets = self
            .sample_targets(sample)?
            .into_iter()
            .map(|a| Ok((a.instance_id.clone(), a.bitmap()?)))
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Ok(GroundingSample::from_masks(
            sample.id.clone(),
            sample.image_id,
            sample.expression.clone(),
            sample.category,
            sample.clue_labels.clone(),
            targets,
        )?)
    }

    /// Checks foreign keys, category homogeneity and stored geometry.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DatasetError::SchemaVersion(self.schema_version));
        }
        if self.categories != category_table() {
            return Err(DatasetError::Invalid(
                "category table does not match the taxonomy".into(),
            ));
        }
        let mut dims = HashMap::new();
        for img in &self.images {
            if dims.insert(img.id, (img.width, img.height)).is_some() {
                return Err(DatasetError::Invalid(format!(
                    "duplicate image id {}",
                    img.id
                )));
            }
        }
        let mut last = None;
        for a in &self.annotations {
            if last.is_some_and(|l| a.id <= l) {
                return Err(DatasetError::Invalid(
                    "annotation ids must be strictly increasing".into(),
                ));
            }
            last = Some(a.id);
            let &(w, h) = dims.get(&a.image_id).ok_or_else(|| {
                DatasetError::DanglingReference(format!(
                    "annotation {} -> image {}",
                    a.id, a.image_id
                ))
            })?;
            if a.category().is_none() {
                return Err(DatasetError::DanglingReference(format!(
                    "annotation {} -> category {}",
                    a.id, a.category_id
                )));
            }
            if (a.rle.width(), a.rle.height()) != (w, h) {
                return Err(DatasetError::Invalid(format!(
                    "annotation {} mask size differs from its image",
                    a.id
                )));
            }
        }
        let mut sample_ids = std::collections::HashSet::new();
        for s in &self.samples {
            if !sample_ids.insert(s.id.as_str()) {
                return Err(DatasetError::Invalid(format!(
                    "duplicate sample id {}",
                    s.id
                )));
            }
            if !dims.contains_key(&s.image_id) {
                return Err(DatasetError::DanglingReference(format!(
                    "sample {} -> image {}",
                    s.id, s.image_id
                )));
            }
            if s.targets.is_empty() {
                return Err(
                    ResolveError::InvalidSample(format!("sample {} has no targets", s.id)).into(),
                );
            }
            s.clue_labels.validate()?;
            for a in self.sample_targets(s)? {
                if a.image_id != s.image_id || a.category() != Some(s.category) {
                    return Err(DatasetError::Invalid(format!(
                        "sample {} target {} is not a {} of image {}",
                        s.id, a.id, s.category, s.image_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Index of marked executions for one image, keyed to annotation ids.
    pub fn execution_index(&self, image_id: u64) -> Result<ExecutionIndex<u64>, DatasetError> {
        let img = self
            .image(image_id)
            .ok_or_else(|| DatasetError::DanglingReference(format!("image {image_id}")))?;
        let mut index = ExecutionIndex::new(img.marker_executions.clone());
        for a in self.annotations.iter().filter(|a| a.image_id == image_id) {
            let (Some(marker), Some(category)) = (a.provenance.marker, a.category()) else {
                continue;
            };
            index.insert(
                marker,
                a.provenance.invocation_count.unwrap_or(0),
                category,
                a.provenance.element_index.unwrap_or(0),
                a.id,
            );
        }
        Ok(index)
    }

    /// Resolves a target request against the stored annotations and appends
    /// the resulting sample.
    pub fn add_sample(&mut self, request: &SampleRequest) -> Result<&SampleRecord, DatasetError> {
        let image_id = self
            .image_by_tag(&request.source_tag)
            .ok_or_else(|| {
                DatasetError::DanglingReference(format!("source_tag {}", request.source_tag))
            })?
            .id;
        request.clue_labels.validate()?;
        let spec = request.target_spec()?;
        let targets = self
            .execution_index(image_id)?
            .resolve(&spec, request.category)?;
        let id = match &request.sample_id {
            Some(id) => id.clone(),
            None => format!("s{:06}", self.samples.len() + 1),
        };
        if self.sample(&id).is_some() {
            return Err(DatasetError::Invalid(format!("duplicate sample id {id}")));
        }
        self.samples.push(SampleRecord {
            id,
            image_id,
            expression: request.expression.clone(),
            category: request.category,
            clue_labels: request.clue_labels.clone(),
            targets,
        });
        Ok(self.samples.last().expect("just pushed"))
    }

    pub fn to_json(&self) -> Result<String, DatasetError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Rewrites `dataset.json` in `dir` (images are left untouched).
    pub fn write_json(&self, dir: &Path) -> Result<(), DatasetError> {
        self.validate()?;
        fs::write(dir.join(DATASET_FILE), self.to_json()?)?;
        Ok(())
    }

    pub fn load_image(&self, dir: &Path, image_id: u64) -> Result<RgbImage, DatasetError> {
        let rec = self
            .image(image_id)
            .ok_or_else(|| DatasetError::DanglingReference(format!("image {image_id}")))?;
        let img = image::open(dir.join(&rec.file))
            .map_err(|e| DatasetError::Image(e.to_string()))?
            .to_rgb8();
        if img.dimensions() != (rec.width, rec.height) {
            return Err(DatasetError::Invalid(format!(
                "image {image_id} has the wrong size"
            )));
        }
        Ok(img)
    }
}

/// A target request as read from a `resolve` input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    pub source_tag: String,
    pub expression: String,
    pub category: ElementCategory,
    pub clue_labels: ClueLabels,
    /// The `{"results": [...]}` object.
    pub targets: serde_json::Value,
}

impl SampleRequest {
    pub fn target_spec(&self) -> Result<TargetSpec, ResolveError> {
        parse_target_json(&self.targets.to_string())
    }
}

/// Reads a JSON array of [`SampleRequest`]s.
pub fn load_requests(path: &Path) -> Result<Vec<SampleRequest>, DatasetError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn image_file(id: u64) -> String {
    format!("images/{id:06}.png")
}

/// Builds the bundle in memory; image ids follow `scenes` order from 1.
pub fn build_bundle(
    scenes: &[SceneEntry],
    samples: &[GroundingSample],
) -> Result<DatasetBundle, DatasetError> {
    let mut bundle = DatasetBundle::empty();
    let mut lookup: HashMap<(u64, InstanceId), u64> = HashMap::new();
    let mut next_ann = 1u64;
    for (k, entry) in scenes.iter().enumerate() {
        let image_id = k as u64 + 1;
        let scene = &entry.scene;
        if bundle.image_by_tag(&entry.source_tag).is_some() {
            return Err(DatasetError::Invalid(format!(
                "duplicate source_tag {}",
                entry.source_tag
            )));
        }
        bundle.images.push(ImageRecord {
            id: image_id,
            file: image_file(image_id),
            height: scene.height,
            width: scene.width,
            source_tag: entry.source_tag.clone(),
            render_scale: scene.render_scale,
            seed: scene.seed,
            marker_executions: scene.marker_executions(),
        });
        for inst in scene_instances(scene)? {
            lookup.insert((image_id, inst.instance_id.clone()), next_ann);
            bundle.annotations.push(AnnotationRecord {
                id: next_ann,
                image_id,
                category_id: inst.category.dataset_id(),
                rle: encode_rle(&inst.bitmap),
                bbox: inst.tight_bbox()?,
                point: inst.representative_point()?,
                area: inst.bitmap.area() as u64,
                instance_id: inst.instance_id,
                provenance: inst.provenance,
            });
            next_ann += 1;
        }
    }
    for s in samples {
        if s.scene_ref == 0 || s.scene_ref > scenes.len() as u64 {
            return Err(DatasetError::DanglingReference(format!(
                "sample {} -> scene {}",
                s.id, s.scene_ref
            )));
        }
        let targets = s
            .targets
            .iter()
            .map(|t| {
                lookup
                    .get(&(s.scene_ref, t.clone()))
                    .copied()
                    .ok_or_else(|| {
                        DatasetError::DanglingReference(format!("sample {} -> instance {t}", s.id))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        bundle.samples.push(SampleRecord {
            id: s.id.clone(),
            image_id: s.scene_ref,
            expression: s.expression.clone(),
            category: s.category,
            clue_labels: s.clue_labels.clone(),
            targets,
        });
    }
    bundle.validate()?;
    Ok(bundle)
}

/// Writes `out_dir/dataset.json` and `out_dir/images/*.png`, then reloads
/// the bundle from disk.
pub fn emit_dataset(
    scenes: &[SceneEntry],
    samples: &[GroundingSample],
    out_dir: &Path,
) -> Result<DatasetBundle, DatasetError> {
    let bundle = build_bundle(scenes, samples)?;
    fs::create_dir_all(out_dir.join("images"))?;
    for (entry, rec) in scenes.iter().zip(&bundle.images) {
        entry
            .scene
            .image
            .save_with_format(out_dir.join(&rec.file), image::ImageFormat::Png)
            .map_err(|e| DatasetError::Image(e.to_string()))?;
    }
    bundle.write_json(out_dir)?;
    load_bundle(out_dir)
}

/// Accepts either the bundle directory or its `dataset.json`.
pub fn bundle_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

pub fn load_bundle(path: &Path) -> Result<DatasetBundle, DatasetError> {
    let file = if path.is_dir() {
        path.join(DATASET_FILE)
    } else {
        path.to_path_buf()
    };
    let bundle: DatasetBundle = serde_json::from_str(&fs::read_to_string(file)?)?;
    bundle.validate()?;
    Ok(bundle)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub images: usize,
    pub annotations: usize,
    pub samples: usize,
    pub mean_targets: f64,
    /// K → number of samples with K targets.
    pub targets_per_sample: BTreeMap<usize, usize>,
    /// Whitespace-token count → number of expressions.
    pub expression_length: BTreeMap<usize, usize>,
    pub samples_per_category: BTreeMap<String, usize>,
    pub annotations_per_category: BTreeMap<String, usize>,
    pub samples_per_clue: BTreeMap<CluePrimary, usize>,
    pub samples_per_subtype: BTreeMap<ClueSubtype, usize>,
    pub hybrid_samples: usize,
}

pub fn dataset_stats(bundle: &DatasetBundle) -> StatsReport {
    let mut r = StatsReport {
        images: bundle.images.len(),
        annotations: bundle.annotations.len(),
        samples: bundle.samples.len(),
        ..StatsReport::default()
    };
    for a in &bundle.annotations {
        if let Some(c) = a.category() {
            *r.annotations_per_category
                .entry(c.name().to_string())
                .or_default() += 1;
        }
    }
    let mut total_targets = 0usize;
    for s in &bundle.samples {
        total_targets += s.targets.len();
        *r.targets_per_sample.entry(s.targets.len()).or_default() += 1;
        *r.expression_length
            .entry(s.expression.split_whitespace().count())
            .or_default() += 1;
        *r.samples_per_category
            .entry(s.category.name().to_string())
            .or_default() += 1;
        for p in &s.clue_labels.primary {
            *r.samples_per_clue.entry(*p).or_default() += 1;
        }
        for t in &s.clue_labels.subtypes {
            *r.samples_per_subtype.entry(*t).or_default() += 1;
        }
        if s.clue_labels.hybrid {
            r.hybrid_samples += 1;
        }
    }
    if r.samples > 0 {
        r.mean_targets = total_targets as f64 / r.samples as f64;
    }
    r
}
