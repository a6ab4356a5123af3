use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{
    parse_markers, ApiName, ArgSummary, AxesInfo, AxesKind, MarkerId, PrimitiveId, PrimitiveRecord,
    PrimitiveRenders, PrimitiveRole, TraceError, TracedCall, TracedScene,
};
use crate::dataset::RleMask;

/// Python side of the tracer, written next to the script for each run.
pub const HARNESS_SOURCE: &str = include_str!("harness.py");

const PYTHON_ENV: &str = "CHARTFORGE_PYTHON";
const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub timeout_s: f64,
    /// Dots per inch used for every render.
    pub render_scale: f64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            timeout_s: 60.0,
            render_scale: 100.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(TraceError::InvalidConfig(format!(
                "timeout_s must be positive, got {}",
                self.timeout_s
            )));
        }
        if !(self.render_scale > 0.0 && self.render_scale.is_finite()) {
            return Err(TraceError::InvalidConfig(format!(
                "render_scale must be positive, got {}",
                self.render_scale
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawTrace {
    status: String,
    #[serde(default)]
    message: String,
    #[serde(default)]
    width: u32,
    #[serde(default)]
    height: u32,
    #[serde(default)]
    render_scale: f64,
    #[serde(default)]
    executed_lines: Vec<usize>,
    #[serde(default)]
    axes: Vec<AxesInfo>,
    #[serde(default)]
    calls: Vec<RawCall>,
    #[serde(default)]
    primitives: Vec<RawPrimitive>,
}

#[derive(Deserialize)]
struct RawCall {
    index: usize,
    line: Option<usize>,
    api_name: ApiName,
    axes_id: String,
    axes_kind: AxesKind,
    arg_summary: ArgSummary,
    primitives: Vec<PrimitiveId>,
}

#[derive(Deserialize)]
struct RawPrimitive {
    id: PrimitiveId,
    role: PrimitiveRole,
    call: usize,
    per_datum_index: Option<usize>,
    renders: BTreeMap<String, Vec<u64>>,
}

/// Runs a plotting script in a fresh Python process and returns its trace.
///
/// The process gets its own scratch directory as working directory, a fixed
/// seed and render scale, and is killed once `config.timeout_s` elapses.
pub fn execute_script(script_text: &str, config: &RunConfig) -> Result<TracedScene, TraceError> {
    config.validate()?;
    let marker_map = parse_markers(script_text)?;

    let scratch = tempfile::Builder::new().prefix("chartforge-").tempdir()?;
    let script_path = scratch.path().join("script.py");
    let harness_path = scratch.path().join("harness.py");
    let out_dir = scratch.path().join("out");
    let work_dir = scratch.path().join("work");
    fs::create_dir_all(&out_dir)?;
    fs::create_dir_all(&work_dir)?;
    fs::write(&script_path, script_text)?;
    fs::write(&harness_path, HARNESS_SOURCE)?;
    let stderr_path = scratch.path().join("stderr.txt");

    let python = std::env::var(PYTHON_ENV).unwrap_or_else(|_| "python3".to_string());
    let mut child = Command::new(python)
        .arg(&harness_path)
        .arg(&script_path)
        .arg(&out_dir)
        .arg(config.seed.to_string())
        .arg(config.render_scale.to_string())
        .current_dir(&work_dir)
        .env("CHARTFORGE_HEADLESS", "1")
        .env("MPLBACKEND", "Agg")
        .env("PYTHONHASHSEED", "0")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(File::create(&stderr_path)?)
        .spawn()
        .map_err(|e| TraceError::Harness(format!("cannot start python: {e}")))?;

    let limit = Duration::from_secs_f64(config.timeout_s);
    let started = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() >= limit {
            let _ = child.kill();
            let _ = child.wait();
            return Err(TraceError::ExecTimeout {
                timeout_s: config.timeout_s,
            });
        }
        thread::sleep(POLL);
    };

    let trace_path = out_dir.join("trace.json");
    let raw: Option<RawTrace> = fs::read_to_string(&trace_path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let raw = match raw {
        Some(raw) if raw.status == "script_error" => {
            return Err(TraceError::ScriptError(raw.message))
        }
        Some(raw) if status.success() && raw.status == "ok" => raw,
        _ => {
            let stderr = fs::read_to_string(&stderr_path).unwrap_or_default();
            let tail: Vec<&str> = stderr.lines().rev().take(8).collect();
            let tail: Vec<&str> = tail.into_iter().rev().collect();
            return Err(TraceError::Harness(format!(
                "{status}: {}",
                tail.join("\n")
            )));
        }
    };

    let pixels = fs::read(out_dir.join("image.rgb"))?;
    let image = RgbImage::from_raw(raw.width, raw.height, pixels)
        .ok_or_else(|| TraceError::Decode("raster size does not match trace".into()))?;
    assemble(raw, image, marker_map, config.seed)
}

fn assemble(
    raw: RawTrace,
    image: RgbImage,
    marker_map: super::MarkerMap,
    seed: u64,
) -> Result<TracedScene, TraceError> {
    if raw.width == 0 || raw.height == 0 {
        return Err(TraceError::Decode("empty raster".into()));
    }
    let size = [raw.height, raw.width];
    let mut counters: BTreeMap<MarkerId, u32> = BTreeMap::new();
    let calls: Vec<TracedCall> = raw
        .calls
        .into_iter()
        .map(|c| {
            let marker = c.line.and_then(|l| marker_map.marker_at(l));
            let invocation_count = marker.map(|m| {
                let n = counters.entry(m).or_default();
                *n += 1;
                *n - 1
            });
            TracedCall {
                index: c.index,
                marker,
                line: c.line,
                invocation_count,
                api_name: c.api_name,
                axes_id: c.axes_id,
                axes_kind: c.axes_kind,
                arg_summary: c.arg_summary,
                primitive_ids: c.primitives,
            }
        })
        .collect();

    let executed: BTreeSet<usize> = raw.executed_lines.into_iter().collect();
    for (marker, line) in marker_map.iter() {
        if counters.contains_key(&marker) {
            continue;
        }
        if executed.contains(&line) {
            return Err(TraceError::ScriptError(format!(
                "marker {marker} on line {line} does not create a plotting element"
            )));
        }
        return Err(TraceError::NoMarkedCalls { marker, line });
    }

    let rle = |counts: Vec<u64>| RleMask { size, counts };
    let mut primitives = Vec::with_capacity(raw.primitives.len());
    for p in raw.primitives {
        let mut renders = p.renders;
        let full = renders
            .remove("full")
            .ok_or_else(|| TraceError::Decode(format!("{} has no full render", p.id)))?;
        if p.call >= calls.len() {
            return Err(TraceError::Decode(format!(
                "{} points at missing call",
                p.id
            )));
        }
        primitives.push(PrimitiveRecord {
            id: p.id,
            role: p.role,
            parent_call: p.call,
            per_datum_index: p.per_datum_index,
            renders: PrimitiveRenders {
                full: rle(full),
                line_only: renders.remove("line_only").map(rle),
                markers_only: renders.remove("markers_only").map(rle),
            },
        });
    }
    primitives.sort_by_key(|p| p.id);

    Ok(TracedScene {
        image,
        width: raw.width,
        height: raw.height,
        render_scale: raw.render_scale,
        seed,
        marker_map,
        axes: raw.axes,
        calls,
        primitives,
    })
}
