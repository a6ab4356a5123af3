//! Instance masks from traced primitives.
//!
//! Masks are amodal: each comes from an isolation render of its artist, so
//! overlapping siblings never cut into it, while axes clipping still applies.
//! Instances are composed along the primitive → part → composite hierarchy
//! and labelled from the API call, the primitive's role and the axes kind.

use std::fmt;
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmap::Bitmap;
use crate::dataset::{decode_rle, RleMask};
use crate::tracer::{
    ApiName, AxesKind, MarkerId, PrimitiveId, PrimitiveRecord, PrimitiveRole, TracedCall,
    TracedScene,
};

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("render is {actual:?} but the scene image is {expected:?}")]
    RenderMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("unknown primitive {0}")]
    UnknownPrimitive(PrimitiveId),
    #[error("primitive {0} has no {1:?} render")]
    NoStyleVariant(PrimitiveId, StyleOverride),
    #[error("{api:?} call cannot produce {granularity} instances")]
    UnsupportedGranularity {
        api: ApiName,
        granularity: Granularity,
    },
    #[error("no category for {api:?}/{role:?} on {axes:?} axes at {granularity} granularity")]
    UnmappedCombination {
        api: ApiName,
        role: PrimitiveRole,
        axes: AxesKind,
        granularity: Granularity,
    },
    #[error("unknown call index {0}")]
    UnknownCall(usize),
    #[error("corrupt render: {0}")]
    CorruptRender(String),
}

/// Level of the primitive → part → composite hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Primitive,
    Part,
    Composite,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [
        Granularity::Primitive,
        Granularity::Part,
        Granularity::Composite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Primitive => "primitive",
            Granularity::Part => "part",
            Granularity::Composite => "composite",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The 18 fine-grained chart element types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementCategory {
    VBar,
    HBar,
    Hist,
    Scatter,
    LinePoints,
    #[serde(rename = "Line_withPoints")]
    LineWithPoints,
    #[serde(rename = "PolarLine_withPoints")]
    PolarLineWithPoints,
    PolarLinePoints,
    PolarVBar,
    PieSector,
    Treemap,
    #[serde(rename = "BoxPlot_BoxPatch")]
    BoxPlotBoxPatch,
    BoxMedianLine,
    FullBox,
    ErrorBar,
    Fill,
    #[serde(rename = "Fill_between_density")]
    FillBetweenDensity,
    #[serde(rename = "Stackplot_area")]
    StackplotArea,
}

impl ElementCategory {
    pub const ALL: [ElementCategory; 18] = [
        ElementCategory::VBar,
        ElementCategory::HBar,
        ElementCategory::Hist,
        ElementCategory::Scatter,
        ElementCategory::LinePoints,
        ElementCategory::LineWithPoints,
        ElementCategory::PolarLineWithPoints,
        ElementCategory::PolarLinePoints,
        ElementCategory::PolarVBar,
        ElementCategory::PieSector,
        ElementCategory::Treemap,
        ElementCategory::BoxPlotBoxPatch,
        ElementCategory::BoxMedianLine,
        ElementCategory::FullBox,
        ElementCategory::ErrorBar,
        ElementCategory::Fill,
        ElementCategory::FillBetweenDensity,
        ElementCategory::StackplotArea,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ElementCategory::VBar => "VBar",
            ElementCategory::HBar => "HBar",
            ElementCategory::Hist => "Hist",
            ElementCategory::Scatter => "Scatter",
            ElementCategory::LinePoints => "LinePoints",
            ElementCategory::LineWithPoints => "Line_withPoints",
            ElementCategory::PolarLineWithPoints => "PolarLine_withPoints",
            ElementCategory::PolarLinePoints => "PolarLinePoints",
            ElementCategory::PolarVBar => "PolarVBar",
            ElementCategory::PieSector => "PieSector",
            ElementCategory::Treemap => "Treemap",
            ElementCategory::BoxPlotBoxPatch => "BoxPlot_BoxPatch",
            ElementCategory::BoxMedianLine => "BoxMedianLine",
            ElementCategory::FullBox => "FullBox",
            ElementCategory::ErrorBar => "ErrorBar",
            ElementCategory::Fill => "Fill",
            ElementCategory::FillBetweenDensity => "Fill_between_density",
            ElementCategory::StackplotArea => "Stackplot_area",
        }
    }

    /// Thin-line elements are scored with boundary IoU.
    pub fn thin_line(self) -> bool {
        matches!(
            self,
            ElementCategory::ErrorBar
                | ElementCategory::BoxMedianLine
                | ElementCategory::LineWithPoints
                | ElementCategory::PolarLineWithPoints
        )
    }

    pub fn granularity(self) -> Granularity {
        match self {
            ElementCategory::BoxPlotBoxPatch => Granularity::Part,
            ElementCategory::FullBox
            | ElementCategory::ErrorBar
            | ElementCategory::LineWithPoints
            | ElementCategory::PolarLineWithPoints => Granularity::Composite,
            _ => Granularity::Primitive,
        }
    }

    /// Categories sorted by name; position + 1 is the stable dataset id.
    pub fn sorted_by_name() -> Vec<ElementCategory> {
        let mut all = Self::ALL.to_vec();
        all.sort_by_key(|c| c.name());
        all
    }

    pub fn dataset_id(self) -> u32 {
        Self::sorted_by_name()
            .iter()
            .position(|&c| c == self)
            .expect("category in table") as u32
            + 1
    }

    pub fn from_dataset_id(id: u32) -> Option<Self> {
        let idx = (id as usize).checked_sub(1)?;
        Self::sorted_by_name().get(idx).copied()
    }
}

impl fmt::Display for ElementCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown element category {s:?}"))
    }
}

/// Re-render a line-with-markers primitive with one of its styles suppressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleOverride {
    LineOnly,
    MarkersOnly,
}

/// Scene-unique instance handle, `c<call>/<granularity>/<element>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub String);

impl InstanceId {
    fn new(call: usize, granularity: Granularity, element: usize) -> Self {
        Self(format!("c{call}/{granularity}/{element}"))
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub call_index: usize,
    pub marker: Option<MarkerId>,
    pub invocation_count: Option<u32>,
    pub element_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub instance_id: InstanceId,
    pub bitmap: Bitmap,
    pub category: ElementCategory,
    pub granularity: Granularity,
    pub provenance: Provenance,
}

/// Continuous pixel box, origin top-left, max sides exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max <= width as f64
            && self.y_max <= height as f64
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x < width as f64 && self.y < height as f64
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

fn decode_render(rle: &RleMask, scene: &TracedScene) -> Result<Bitmap, MaskError> {
    let bitmap = decode_rle(rle).map_err(|e| MaskError::CorruptRender(e.to_string()))?;
    if bitmap.dims() != (scene.width, scene.height) {
        return Err(MaskError::RenderMismatch {
            expected: (scene.width, scene.height),
            actual: bitmap.dims(),
        });
    }
    Ok(bitmap)
}

/// Pixels contributed by one primitive rendered alone.
pub fn extract_primitive_mask(
    scene: &TracedScene,
    primitive_id: PrimitiveId,
    style_override: Option<StyleOverride>,
) -> Result<Bitmap, MaskError> {
    let record = scene
        .primitive(primitive_id)
        .ok_or(MaskError::UnknownPrimitive(primitive_id))?;
    let rle = match style_override {
        None => &record.renders.full,
        Some(StyleOverride::LineOnly) => {
            record
                .renders
                .line_only
                .as_ref()
                .ok_or(MaskError::NoStyleVariant(
                    primitive_id,
                    StyleOverride::LineOnly,
                ))?
        }
        Some(StyleOverride::MarkersOnly) => {
            record
                .renders
                .markers_only
                .as_ref()
                .ok_or(MaskError::NoStyleVariant(
                    primitive_id,
                    StyleOverride::MarkersOnly,
                ))?
        }
    };
    let bitmap = decode_render(rle, scene)?;
    if bitmap.is_empty() {
        return Err(MaskError::EmptyMask);
    }
    Ok(bitmap)
}

/// Primitive role that anchors an instance of the given granularity.
fn anchor_role(api: ApiName, granularity: Granularity) -> Option<PrimitiveRole> {
    use Granularity::*;
    use PrimitiveRole::*;
    Some(match (api, granularity) {
        (ApiName::Plot, Primitive) => MarkerSet,
        (ApiName::Plot, Composite) => LinePath,
        (ApiName::Scatter, Primitive) => MarkerSet,
        (ApiName::Bar | ApiName::Barh, Primitive) => BarPatch,
        (ApiName::Hist, Primitive) => BinPatch,
        (ApiName::Boxplot, Primitive) => Median,
        (ApiName::Boxplot, Part | Composite) => BoxBody,
        (ApiName::Errorbar, Composite) => ErrorbarLine,
        (ApiName::Pie, Primitive) => Wedge,
        (ApiName::Fill | ApiName::FillBetween | ApiName::Stackplot, Primitive) => AreaPatch,
        (ApiName::AddPatch, Primitive) => Rectangle,
        _ => return None,
    })
}

/// Fine-grained category of an instance anchored on `role` within `call`.
///
/// Markers drawn by `plot` with a visible line belong to the line series;
/// markers from `scatter` (or `plot` without a line) are scatter markers.
pub fn assign_label(
    call: &TracedCall,
    role: PrimitiveRole,
    granularity: Granularity,
) -> Result<ElementCategory, MaskError> {
    use ElementCategory as C;
    use Granularity::*;
    use PrimitiveRole as R;
    let polar = call.axes_kind == AxesKind::Polar;
    let has_line = call.arg_summary.linestyle;
    let category = match (call.api_name, role, granularity) {
        (ApiName::Plot, R::MarkerSet, Primitive) => match (has_line, polar) {
            (true, false) => Some(C::LinePoints),
            (true, true) => Some(C::PolarLinePoints),
            (false, false) => Some(C::Scatter),
            (false, true) => None,
        },
        (ApiName::Plot, R::LinePath, Composite) if has_line => Some(if polar {
            C::PolarLineWithPoints
        } else {
            C::LineWithPoints
        }),
        (ApiName::Scatter, R::MarkerSet, Primitive) if !polar => Some(C::Scatter),
        (ApiName::Bar, R::BarPatch, Primitive) => Some(if polar { C::PolarVBar } else { C::VBar }),
        (ApiName::Barh, R::BarPatch, Primitive) if !polar => Some(C::HBar),
        (ApiName::Hist, R::BinPatch, Primitive) if !polar => Some(C::Hist),
        (ApiName::Boxplot, R::Median, Primitive) if !polar => Some(C::BoxMedianLine),
        (ApiName::Boxplot, R::BoxBody, Part) if !polar => Some(C::BoxPlotBoxPatch),
        (ApiName::Boxplot, R::BoxBody, Composite) if !polar => Some(C::FullBox),
        (ApiName::Errorbar, R::ErrorbarLine, Composite) if !polar => Some(C::ErrorBar),
        (ApiName::Pie, R::Wedge, Primitive) => Some(C::PieSector),
        (ApiName::Fill, R::AreaPatch, Primitive) => Some(C::Fill),
        (ApiName::FillBetween, R::AreaPatch, Primitive) if !polar => Some(C::FillBetweenDensity),
        (ApiName::Stackplot, R::AreaPatch, Primitive) if !polar => Some(C::StackplotArea),
        (ApiName::AddPatch, R::Rectangle, Primitive) if !polar => Some(C::Treemap),
        _ => None,
    };
    category.ok_or(MaskError::UnmappedCombination {
        api: call.api_name,
        role,
        axes: call.axes_kind,
        granularity,
    })
}

fn full_render(scene: &TracedScene, record: &PrimitiveRecord) -> Result<Bitmap, MaskError> {
    decode_render(&record.renders.full, scene)
}

/// One instance mask per element of `call` at the requested granularity,
/// ordered by element index (the call's input-data order).
///
/// Composite boxes are the union of box body `i`, whiskers and caps at flat
/// positions `2i` and `2i+1`, and median `i`. Error bars are the union of bar
/// segment `i` and its caps. Elements whose pixels are all clipped are
/// skipped, so element indices can have gaps.
pub fn compose_instances(
    scene: &TracedScene,
    call: &TracedCall,
    granularity: Granularity,
) -> Result<Vec<InstanceMask>, MaskError> {
    let role =
        anchor_role(call.api_name, granularity).ok_or(MaskError::UnsupportedGranularity {
            api: call.api_name,
            granularity,
        })?;
    let category = assign_label(call, role, granularity)?;
    let prims: Vec<&PrimitiveRecord> = scene.call_primitives(call).collect();
    let by_role = |r: PrimitiveRole, idx: usize| {
        prims
            .iter()
            .copied()
            .find(|p| p.role == r && p.per_datum_index == Some(idx))
    };

    let mut out = Vec::new();
    for anchor in prims.iter().filter(|p| p.role == role) {
        let element = anchor.per_datum_index.unwrap_or(0);
        let mut bitmap = full_render(scene, anchor)?;
        match category {
            ElementCategory::FullBox => {
                let parts = [
                    (PrimitiveRole::Whisker, 2 * element),
                    (PrimitiveRole::Whisker, 2 * element + 1),
                    (PrimitiveRole::Cap, 2 * element),
                    (PrimitiveRole::Cap, 2 * element + 1),
                    (PrimitiveRole::Median, element),
                ];
                for (r, idx) in parts {
                    if let Some(p) = by_role(r, idx) {
                        bitmap.union_with(&full_render(scene, p)?);
                    }
                }
            }
            ElementCategory::ErrorBar => {
                if let Some(p) = by_role(PrimitiveRole::ErrorbarCap, element) {
                    bitmap.union_with(&full_render(scene, p)?);
                }
            }
            _ => {}
        }
        if bitmap.is_empty() {
            debug!(
                "call {} element {element}: no visible pixels, skipped",
                call.index
            );
            continue;
        }
        out.push(InstanceMask {
            instance_id: InstanceId::new(call.index, granularity, element),
            bitmap,
            category,
            granularity,
            provenance: Provenance {
                call_index: call.index,
                marker: call.marker,
                invocation_count: call.invocation_count,
                element_index: anchor.per_datum_index,
            },
        });
    }
    out.sort_by_key(|m| m.provenance.element_index);
    Ok(out)
}

/// Every labelled instance in the scene, across calls and granularities.
/// Combinations outside the taxonomy are skipped and logged.
pub fn scene_instances(scene: &TracedScene) -> Result<Vec<InstanceMask>, MaskError> {
    let mut out = Vec::new();
    for call in &scene.calls {
        for granularity in Granularity::ALL {
            match compose_instances(scene, call, granularity) {
                Ok(instances) => out.extend(instances),
                Err(MaskError::UnsupportedGranularity { .. }) => {}
                Err(e @ MaskError::UnmappedCombination { .. }) => {
                    debug!("call {}: {e}; excluded", call.index);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Tight enclosing box; max sides are exclusive so a single pixel has area 1.
pub fn tight_bbox(mask: &Bitmap) -> Result<BBox, MaskError> {
    let mut bounds: Option<(u32, u32, u32, u32)> = None;
    for (x, y) in mask.foreground() {
        bounds = Some(match bounds {
            None => (x, y, x, y),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        });
    }
    let (x0, y0, x1, y1) = bounds.ok_or(MaskError::EmptyMask)?;
    Ok(BBox::new(
        x0 as f64,
        y0 as f64,
        x1 as f64 + 1.0,
        y1 as f64 + 1.0,
    ))
}

/// Foreground pixel nearest the foreground centroid; ties go to the
/// smallest `(y, x)`.
pub fn representative_point(mask: &Bitmap) -> Result<Point, MaskError> {
    let (mut sx, mut sy, mut n) = (0f64, 0f64, 0usize);
    for (x, y) in mask.foreground() {
        sx += x as f64;
        sy += y as f64;
        n += 1;
    }
    if n == 0 {
        return Err(MaskError::EmptyMask);
    }
    let (cx, cy) = (sx / n as f64, sy / n as f64);
    let mut best: Option<(f64, u32, u32)> = None;
    // foreground() walks row-major, i.e. ascending (y, x): strict < keeps the first tie
    for (x, y) in mask.foreground() {
        let d = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        if best.is_none_or(|(bd, _, _)| d < bd) {
            best = Some((d, x, y));
        }
    }
    let (_, x, y) = best.expect("non-empty");
    Ok(Point::new(x as f64, y as f64))
}

impl InstanceMask {
    pub fn tight_bbox(&self) -> Result<BBox, MaskError> {
        tight_bbox(&self.bitmap)
    }

    pub fn representative_point(&self) -> Result<Point, MaskError> {
        representative_point(&self.bitmap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::ArgSummary;

    fn call(api: ApiName, axes: AxesKind, linestyle: bool) -> TracedCall {
        TracedCall {
            index: 0,
            marker: None,
            line: None,
            invocation_count: None,
            api_name: api,
            axes_id: "ax0".into(),
            axes_kind: axes,
            arg_summary: ArgSummary {
                linestyle,
                ..ArgSummary::default()
            },
            primitive_ids: vec![],
        }
    }

    #[test]
    fn taxonomy_has_eighteen_names_and_four_thin_lines() {
        assert_eq!(ElementCategory::ALL.len(), 18);
        let thin: Vec<_> = ElementCategory::ALL
            .iter()
            .filter(|c| c.thin_line())
            .map(|c| c.name())
            .collect();
        assert_eq!(
            thin,
            vec![
                "Line_withPoints",
                "PolarLine_withPoints",
                "BoxMedianLine",
                "ErrorBar"
            ]
        );
        for c in ElementCategory::ALL {
            assert_eq!(c.name().parse::<ElementCategory>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
            assert_eq!(ElementCategory::from_dataset_id(c.dataset_id()), Some(c));
        }
    }

    #[test]
    fn dataset_ids_are_alphabetical() {
        assert_eq!(ElementCategory::BoxMedianLine.dataset_id(), 1);
        assert_eq!(ElementCategory::VBar.dataset_id(), 18);
        assert_eq!(ElementCategory::from_dataset_id(0), None);
        assert_eq!(ElementCategory::from_dataset_id(19), None);
    }

    #[test]
    fn plot_markers_with_line_are_line_points() {
        let c = call(ApiName::Plot, AxesKind::Cartesian, true);
        assert_eq!(
            assign_label(&c, PrimitiveRole::MarkerSet, Granularity::Primitive),
            Ok(ElementCategory::LinePoints)
        );
    }

    #[test]
    fn scatter_markers_are_scatter() {
        let c = call(ApiName::Scatter, AxesKind::Cartesian, false);
        assert_eq!(
            assign_label(&c, PrimitiveRole::MarkerSet, Granularity::Primitive),
            Ok(ElementCategory::Scatter)
        );
        let c = call(ApiName::Plot, AxesKind::Cartesian, false);
        assert_eq!(
            assign_label(&c, PrimitiveRole::MarkerSet, Granularity::Primitive),
            Ok(ElementCategory::Scatter)
        );
    }

    #[test]
    fn polar_line_composite() {
        let c = call(ApiName::Plot, AxesKind::Polar, true);
        assert_eq!(
            assign_label(&c, PrimitiveRole::LinePath, Granularity::Composite),
            Ok(ElementCategory::PolarLineWithPoints)
        );
        assert_eq!(
            assign_label(&c, PrimitiveRole::MarkerSet, Granularity::Primitive),
            Ok(ElementCategory::PolarLinePoints)
        );
        let c = call(ApiName::Bar, AxesKind::Polar, false);
        assert_eq!(
            assign_label(&c, PrimitiveRole::BarPatch, Granularity::Primitive),
            Ok(ElementCategory::PolarVBar)
        );
    }

    #[test]
    fn boxplot_levels() {
        let c = call(ApiName::Boxplot, AxesKind::Cartesian, false);
        assert_eq!(
            assign_label(&c, PrimitiveRole::Median, Granularity::Primitive),
            Ok(ElementCategory::BoxMedianLine)
        );
        assert_eq!(
            assign_label(&c, PrimitiveRole::BoxBody, Granularity::Part),
            Ok(ElementCategory::BoxPlotBoxPatch)
        );
        assert_eq!(
            assign_label(&c, PrimitiveRole::BoxBody, Granularity::Composite),
            Ok(ElementCategory::FullBox)
        );
    }

    #[test]
    fn unmapped_combinations() {
        let c = call(ApiName::Scatter, AxesKind::Polar, false);
        assert!(matches!(
            assign_label(&c, PrimitiveRole::MarkerSet, Granularity::Primitive),
            Err(MaskError::UnmappedCombination { .. })
        ));
        let c = call(ApiName::Bar, AxesKind::Cartesian, false);
        assert!(assign_label(&c, PrimitiveRole::Whisker, Granularity::Primitive).is_err());
    }

    #[test]
    fn label_is_deterministic_over_every_combination() {
        let roles = [
            PrimitiveRole::LinePath,
            PrimitiveRole::MarkerSet,
            PrimitiveRole::BarPatch,
            PrimitiveRole::BoxBody,
            PrimitiveRole::Median,
            PrimitiveRole::AreaPatch,
        ];
        for api in [ApiName::Plot, ApiName::Bar, ApiName::Boxplot, ApiName::Fill] {
            for axes in [AxesKind::Cartesian, AxesKind::Polar] {
                for ls in [false, true] {
                    let c = call(api, axes, ls);
                    for r in roles {
                        for g in Granularity::ALL {
                            assert_eq!(assign_label(&c, r, g), assign_label(&c, r, g));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn every_category_is_reachable_from_its_anchor() {
        let apis = [
            ApiName::Plot,
            ApiName::Scatter,
            ApiName::Bar,
            ApiName::Barh,
            ApiName::Hist,
            ApiName::Boxplot,
            ApiName::Errorbar,
            ApiName::Pie,
            ApiName::Fill,
            ApiName::FillBetween,
            ApiName::Stackplot,
            ApiName::AddPatch,
        ];
        let mut seen = std::collections::BTreeSet::new();
        for api in apis {
            for axes in [AxesKind::Cartesian, AxesKind::Polar] {
                for ls in [false, true] {
                    let c = call(api, axes, ls);
                    for g in Granularity::ALL {
                        if let Some(role) = anchor_role(api, g) {
                            if let Ok(cat) = assign_label(&c, role, g) {
                                assert_eq!(cat.granularity(), g, "{cat}");
                                seen.insert(cat);
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(seen.len(), 18);
    }

    #[test]
    fn bbox_of_single_pixel() {
        let mut m = Bitmap::new(30, 30);
        m.set(10, 20, true);
        assert_eq!(tight_bbox(&m).unwrap(), BBox::new(10.0, 20.0, 11.0, 21.0));
    }

    #[test]
    fn bbox_of_block_at_origin() {
        let m = Bitmap::from_fn(20, 20, |x, y| x < 10 && y < 10);
        assert_eq!(tight_bbox(&m).unwrap(), BBox::new(0.0, 0.0, 10.0, 10.0));
    }

    #[test]
    fn bbox_of_l_shape_matches_full_scan() {
        let m = Bitmap::from_fn(40, 30, |x, y| {
            ((5..8).contains(&x) && (3..25).contains(&y))
                || ((22..25).contains(&y) && (5..31).contains(&x))
        });
        // full-scan oracle
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..30 {
            for x in 0..40 {
                if m.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        let expected = BBox::new(x0 as f64, y0 as f64, x1 as f64 + 1.0, y1 as f64 + 1.0);
        assert_eq!(expected, BBox::new(5.0, 3.0, 31.0, 25.0));
        assert_eq!(tight_bbox(&m).unwrap(), expected);
    }

    #[test]
    fn empty_mask_errors() {
        let m = Bitmap::new(4, 4);
        assert_eq!(tight_bbox(&m), Err(MaskError::EmptyMask));
        assert_eq!(representative_point(&m), Err(MaskError::EmptyMask));
    }

    #[test]
    fn point_of_filled_square_is_center() {
        let m = Bitmap::from_fn(20, 20, |x, y| (3..=9).contains(&x) && (3..=9).contains(&y));
        assert_eq!(representative_point(&m).unwrap(), Point::new(6.0, 6.0));
    }

    #[test]
    fn point_of_ring_is_on_the_ring() {
        let m = Bitmap::from_fn(41, 41, |x, y| {
            let d = ((x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2)).sqrt();
            (d - 12.0).abs() < 0.5
        });
        let p = representative_point(&m).unwrap();
        assert!(m.get(p.x as u32, p.y as u32));
        // smallest squared radius on the ring is 136 = 10^2 + 6^2 (133..135 are not sums of
        // two squares); of those eight pixels the smallest (y, x) is (14, 10)
        assert_eq!(p, Point::new(14.0, 10.0));
    }

    #[test]
    fn point_of_crescent_matches_brute_force() {
        let m = Bitmap::from_fn(50, 50, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            let outer = (fx - 25.0).powi(2) + (fy - 25.0).powi(2) <= 15.0f64.powi(2);
            let inner = (fx - 31.0).powi(2) + (fy - 25.0).powi(2) <= 13.0f64.powi(2);
            outer && !inner
        });
        // brute-force oracle over all pixels with explicit (y, x) tie order
        let fg: Vec<(u32, u32)> = (0..50)
            .flat_map(|y| (0..50).map(move |x| (x, y)))
            .filter(|&(x, y)| m.get(x, y))
            .collect();
        let cx = fg.iter().map(|p| p.0 as f64).sum::<f64>() / fg.len() as f64;
        let cy = fg.iter().map(|p| p.1 as f64).sum::<f64>() / fg.len() as f64;
        let best = fg
            .iter()
            .min_by(|a, b| {
                let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
                let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
                da.partial_cmp(&db)
                    .unwrap()
                    .then((a.1, a.0).cmp(&(b.1, b.0)))
            })
            .unwrap();
        let p = representative_point(&m).unwrap();
        assert_eq!((p.x as u32, p.y as u32), *best);
        assert!(m.get(p.x as u32, p.y as u32));
    }

    #[test]
    fn bbox_and_point_serialize_as_arrays() {
        let b = BBox::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1.0,2.0,3.0,4.0]");
        let p: Point = serde_json::from_str("[5, 6]").unwrap();
        assert_eq!(p, Point::new(5.0, 6.0));
    }
}
