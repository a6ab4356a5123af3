//! Script tracing: runs a matplotlib plotting script inside an isolated
//! Python process with the high-level Axes chart methods wrapped, and
//! collects every call, its per-marker invocation ordinal and the primitive
//! artists it returned.
//!
//! Each primitive is also rendered alone over a transparent background at
//! figure-finalization time; those isolation renders travel with the scene
//! so masks can be extracted later without re-running the script.

mod exec;
mod markers;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dataset::RleMask;

pub use exec::{execute_script, RunConfig, HARNESS_SOURCE};
pub use markers::{parse_markers, MarkerId, MarkerMap};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("marker {marker} appears on line {first_line} and line {second_line}")]
    DuplicateMarker {
        marker: MarkerId,
        first_line: usize,
        second_line: usize,
    },
    #[error("malformed marker {token:?} on line {line}")]
    MalformedMarker { line: usize, token: String },
    #[error("script exceeded the {timeout_s} s wall-clock limit")]
    ExecTimeout { timeout_s: f64 },
    #[error("script error: {0}")]
    ScriptError(String),
    #[error("marker {marker} on line {line} was never executed")]
    NoMarkedCalls { marker: MarkerId, line: usize },
    #[error("unknown marker {0}")]
    UnknownMarker(MarkerId),
    #[error("marker {0} has no recorded execution")]
    UnknownExecution(MarkerId),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("tracing harness failed: {0}")]
    Harness(String),
    #[error("malformed scene record: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Instrumented high-level Axes methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiName {
    Plot,
    Scatter,
    Bar,
    Barh,
    Hist,
    Boxplot,
    Errorbar,
    Pie,
    Fill,
    FillBetween,
    Stackplot,
    AddPatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxesKind {
    Cartesian,
    Polar,
}

/// Semantic role of a primitive within the call that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveRole {
    LinePath,
    MarkerSet,
    BarPatch,
    BoxBody,
    Whisker,
    Cap,
    Median,
    ErrorbarLine,
    ErrorbarCap,
    Wedge,
    AreaPatch,
    BinPatch,
    Rectangle,
}

/// Styling facts kept from a call's arguments; raw values are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSummary {
    pub linestyle: bool,
    pub marker: Option<String>,
    pub color: Option<String>,
    pub orientation: Option<String>,
}

/// Opaque primitive handle, rendered as `p<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimitiveId(pub u32);

impl fmt::Display for PrimitiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl FromStr for PrimitiveId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('p')
            .and_then(|d| d.parse().ok())
            .map(PrimitiveId)
            .ok_or_else(|| format!("bad primitive id {s:?}"))
    }
}

impl Serialize for PrimitiveId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PrimitiveId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedCall {
    /// Position in execution order.
    pub index: usize,
    pub marker: Option<MarkerId>,
    /// 1-based script line of the call expression, when called from the script.
    pub line: Option<usize>,
    /// 0-based ordinal among executions of the same marker.
    pub invocation_count: Option<u32>,
    pub api_name: ApiName,
    pub axes_id: String,
    pub axes_kind: AxesKind,
    pub arg_summary: ArgSummary,
    pub primitive_ids: Vec<PrimitiveId>,
}

/// Isolation renders of one primitive, column-major RLE over the scene raster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveRenders {
    pub full: RleMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_only: Option<RleMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markers_only: Option<RleMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveRecord {
    pub id: PrimitiveId,
    pub role: PrimitiveRole,
    pub parent_call: usize,
    pub per_datum_index: Option<usize>,
    pub renders: PrimitiveRenders,
}

/// One subplot of the traced figure; bbox in pixels, origin top-left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxesInfo {
    pub id: String,
    pub kind: AxesKind,
    pub bbox: [f64; 4],
}

/// Everything recorded from one script execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedScene {
    #[serde(skip, default = "empty_image")]
    pub image: RgbImage,
    pub width: u32,
    pub height: u32,
    pub render_scale: f64,
    pub seed: u64,
    pub marker_map: MarkerMap,
    pub axes: Vec<AxesInfo>,
    pub calls: Vec<TracedCall>,
    pub primitives: Vec<PrimitiveRecord>,
}

fn empty_image() -> RgbImage {
    RgbImage::new(0, 0)
}

impl TracedScene {
    pub fn primitive(&self, id: PrimitiveId) -> Option<&PrimitiveRecord> {
        self.primitives
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.primitives[i])
    }

    pub fn call(&self, index: usize) -> Option<&TracedCall> {
        self.calls.get(index)
    }

    /// Primitives of a call in recorded order.
    pub fn call_primitives<'a>(
        &'a self,
        call: &'a TracedCall,
    ) -> impl Iterator<Item = &'a PrimitiveRecord> + 'a {
        call.primitive_ids
            .iter()
            .filter_map(|&id| self.primitive(id))
    }

    /// Calls of a marker in invocation order.
    pub fn marker_calls(&self, marker: MarkerId) -> impl Iterator<Item = &TracedCall> {
        self.calls.iter().filter(move |c| c.marker == Some(marker))
    }

    /// Number of executions per marker (markers with zero executions included).
    pub fn marker_executions(&self) -> BTreeMap<MarkerId, u32> {
        let mut out: BTreeMap<MarkerId, u32> =
            self.marker_map.iter().map(|(m, _)| (m, 0)).collect();
        for c in &self.calls {
            if let Some(m) = c.marker {
                *out.entry(m).or_default() += 1;
            }
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.png` under `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), TraceError> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string(self).map_err(|e| TraceError::Decode(e.to_string()))?;
        fs::write(dir.join(format!("{stem}.json")), json)?;
        self.image
            .save(dir.join(format!("{stem}.png")))
            .map_err(|e| TraceError::Harness(e.to_string()))?;
        Ok(())
    }

    pub fn load(json_path: &Path, png_path: &Path) -> Result<Self, TraceError> {
        let text = fs::read_to_string(json_path)?;
        let mut scene: TracedScene =
            serde_json::from_str(&text).map_err(|e| TraceError::Decode(e.to_string()))?;
        scene.image = image::open(png_path)
            .map_err(|e| TraceError::Decode(e.to_string()))?
            .to_rgb8();
        if scene.image.dimensions() != (scene.width, scene.height) {
            return Err(TraceError::Decode(format!(
                "image is {:?}, scene says {}x{}",
                scene.image.dimensions(),
                scene.width,
                scene.height
            )));
        }
        Ok(scene)
    }
}

/// All executions of a marked line with their primitives, by invocation order.
pub fn primitive_inventory(
    scene: &TracedScene,
    marker: MarkerId,
) -> Result<Vec<(u32, Vec<PrimitiveId>)>, TraceError> {
    if !scene.marker_map.contains(marker) {
        return Err(TraceError::UnknownMarker(marker));
    }
    let mut out: Vec<(u32, Vec<PrimitiveId>)> = scene
        .marker_calls(marker)
        .map(|c| (c.invocation_count.unwrap_or(0), c.primitive_ids.clone()))
        .collect();
    if out.is_empty() {
        return Err(TraceError::UnknownExecution(marker));
    }
    out.sort_by_key(|(inv, _)| *inv);
    Ok(out)
}
