//! Two-stage detect-then-select grounding with Set-of-Mark prompts:
//! candidate filtering, mark overlay, selection parsing and a bundle runner.

mod client;
mod filter;
mod overlay;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use image::RgbImage;
use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{
    default_prompt, encode_png, ClientError, HttpClient, ReplayClient, ReplayEntry, ScriptedClient,
    SelectionClient, SelectionRequest, TOKEN_ENV,
};
pub use filter::{filter_candidates, FilterConfig, FilterOutcome, Removal, RemovalReason};
pub use overlay::{overlay_marks, BadgeBox, BadgeStyle, MarkedImage};

use crate::bitmap::Bitmap;
use crate::dataset::{DatasetBundle, DatasetError, SampleRecord};
use crate::eval::{hungarian_match, MaskSimilarity, PredictionRecord, MASK_IOU_THRESHOLD};
use crate::mask::ElementCategory;
use crate::targets::PredictionSet;

#[derive(Debug, Error)]
pub enum SomError {
    #[error("mask is {actual:?}, image is {expected:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("no candidates to mark")]
    EmptyCandidates,
    #[error("candidate {0} has no foreground pixels")]
    EmptyMask(String),
    #[error("no bracketed selection list in response")]
    NoSelectionFound,
    #[error("mark {0} does not exist")]
    UnknownMarkId(u64),
    #[error("client failed on sample {sample_id}: {message}")]
    ClientFailure { sample_id: String, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// A candidate region proposed by a detector (or taken from gold masks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub mask: Bitmap,
}

fn selection_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\s*(\d+(?:\s*,\s*\d+)*)?\s*,?\s*\]").expect("valid pattern"))
}

/// Takes the last bracketed integer list in `response` and maps its mark
/// numbers to candidate ids, dropping repeats. `[]` is a valid empty answer.
pub fn parse_selection(
    response: &str,
    id_map: &BTreeMap<u32, String>,
) -> Result<Vec<String>, SomError> {
    let caps = selection_pattern()
        .captures_iter(response)
        .last()
        .ok_or(SomError::NoSelectionFound)?;
    let mut out: Vec<String> = Vec::new();
    let Some(list) = caps.get(1) else {
        return Ok(out);
    };
    for tok in list.as_str().split(',') {
        let n: u64 = tok.trim().parse().map_err(|_| SomError::NoSelectionFound)?;
        let id = u32::try_from(n)
            .ok()
            .and_then(|k| id_map.get(&k))
            .ok_or(SomError::UnknownMarkId(n))?;
        if !out.contains(id) {
            out.push(id.clone());
        }
    }
    Ok(out)
}

/// Renders mark numbers the way [`parse_selection`] reads them.
pub fn render_selection(marks: &[u32]) -> String {
    let parts: Vec<String> = marks.iter().map(u32::to_string).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingOutcome {
    pub prediction: PredictionSet,
    pub selected: Vec<String>,
    pub response: Option<String>,
    /// Why the prediction is empty, when it is for a recoverable reason.
    pub note: Option<String>,
    pub marked: Option<MarkedImage>,
}

/// Marks the candidates, asks the client, and turns its answer into a mask
/// prediction. Unparseable answers yield an empty prediction with a note;
/// client failures are errors.
pub fn run_grounding(
    sample_id: &str,
    image: &RgbImage,
    expression: &str,
    candidates: &[Candidate],
    client: &dyn SelectionClient,
    style: &BadgeStyle,
) -> Result<GroundingOutcome, SomError> {
    if candidates.is_empty() {
        return Ok(GroundingOutcome {
            prediction: PredictionSet::Mask(Vec::new()),
            selected: Vec::new(),
            response: None,
            note: Some("no candidates".into()),
            marked: None,
        });
    }
    let marked = overlay_marks(image, candidates, style)?;
    let request = SelectionRequest {
        sample_id,
        marked_image: &marked.image,
        expression,
        candidate_count: candidates.len(),
    };
    let response = client
        .select(&request)
        .map_err(|e| SomError::ClientFailure {
            sample_id: sample_id.to_string(),
            message: e.0,
        })?;
    let (selected, note) = match parse_selection(&response, &marked.id_map) {
        Ok(s) => (s, None),
        Err(e @ (SomError::NoSelectionFound | SomError::UnknownMarkId(_))) => {
            warn!("sample {sample_id}: {e}; scored as an empty prediction");
            (Vec::new(), Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let masks = selected
        .iter()
        .map(|id| {
            candidates
                .iter()
                .find(|c| &c.id == id)
                .map(|c| c.mask.clone())
                .expect("id_map only holds candidate ids")
        })
        .collect();
    Ok(GroundingOutcome {
        prediction: PredictionSet::Mask(masks),
        selected,
        response: Some(response),
        note,
        marked: Some(marked),
    })
}

/// Where stage-one candidates come from.
#[derive(Debug, Clone)]
pub enum CandidateSource {
    /// Every gold annotation of the sample's category in its image, unfiltered.
    Oracle,
    /// Externally proposed candidates per image id, filtered before marking.
    Proposals(BTreeMap<u64, Vec<Candidate>>),
}

/// Proposal file line: `{image_id, id, mask}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub image_id: u64,
    #[serde(flatten)]
    pub candidate: Candidate,
}

pub fn load_proposals(path: &Path) -> Result<BTreeMap<u64, Vec<Candidate>>, SomError> {
    let text = std::fs::read_to_string(path).map_err(|e| SomError::Dataset(e.into()))?;
    let mut out: BTreeMap<u64, Vec<Candidate>> = BTreeMap::new();
    for (n, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let r: ProposalRecord = serde_json::from_str(line)
            .map_err(|e| SomError::InvalidConfig(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.entry(r.image_id).or_default().push(r.candidate);
    }
    Ok(out)
}

/// Gold annotations of the sample's category in its image, as candidates.
pub fn oracle_candidates(
    bundle: &DatasetBundle,
    sample: &SampleRecord,
) -> Result<Vec<Candidate>, SomError> {
    bundle
        .image_annotations(sample.image_id, sample.category)
        .map(|a| {
            Ok(Candidate {
                id: format!("a{}", a.id),
                mask: a.bitmap()?,
            })
        })
        .collect()
}

/// Marks (from 1) of the candidates that best match the targets under the
/// evaluation similarity, one per target at most.
pub fn gold_marks(
    candidates: &[Candidate],
    targets: &[Bitmap],
    category: ElementCategory,
) -> Result<Vec<u32>, SomError> {
    let sim = MaskSimilarity::for_category(category);
    let mut scores = vec![vec![0.0; targets.len()]; candidates.len()];
    let mut eligible = vec![vec![false; targets.len()]; candidates.len()];
    for (i, c) in candidates.iter().enumerate() {
        for (j, t) in targets.iter().enumerate() {
            let s = sim
                .score(&c.mask, t)
                .map_err(|e| SomError::InvalidConfig(e.to_string()))?;
            scores[i][j] = s;
            eligible[i][j] = s >= MASK_IOU_THRESHOLD;
        }
    }
    let matching =
        hungarian_match(&scores, &eligible).map_err(|e| SomError::InvalidConfig(e.to_string()))?;
    let mut by_target: Vec<(usize, u32)> = matching
        .pairs
        .iter()
        .map(|&(i, j)| (j, i as u32 + 1))
        .collect();
    by_target.sort_unstable();
    Ok(by_target.into_iter().map(|(_, m)| m).collect())
}

/// Scripted selector that answers with the marks of the sample's gold targets.
pub fn gold_selector(
    bundle: &DatasetBundle,
    dir: &Path,
    source: &CandidateSource,
    filter: &FilterConfig,
) -> Result<ScriptedClient, SomError> {
    let mut client = ScriptedClient::default();
    for sample in &bundle.samples {
        let candidates = sample_candidates(bundle, sample, source, filter, dir)?;
        let targets = bundle
            .sample_targets(sample)?
            .into_iter()
            .map(|a| a.bitmap())
            .collect::<Result<Vec<_>, _>>()?;
        let marks = gold_marks(&candidates, &targets, sample.category)?;
        client.insert(sample.id.clone(), render_selection(&marks));
    }
    Ok(client)
}

fn sample_candidates(
    bundle: &DatasetBundle,
    sample: &SampleRecord,
    source: &CandidateSource,
    filter: &FilterConfig,
    dir: &Path,
) -> Result<Vec<Candidate>, SomError> {
    match source {
        CandidateSource::Oracle => oracle_candidates(bundle, sample),
        CandidateSource::Proposals(map) => {
            let proposals = map.get(&sample.image_id).cloned().unwrap_or_default();
            let image = bundle.load_image(dir, sample.image_id)?;
            Ok(filter_candidates(&proposals, &image, filter)?.kept)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunNote {
    pub sample_id: String,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct SomRun {
    pub predictions: Vec<PredictionRecord>,
    pub notes: Vec<RunNote>,
    pub responses: Vec<ReplayEntry>,
    /// Marked image per sample id, in sample order.
    pub marked: Vec<(String, RgbImage)>,
}

/// Runs the two-stage pipeline over every sample in a bundle.
pub fn run_bundle(
    bundle: &DatasetBundle,
    dir: &Path,
    source: &CandidateSource,
    filter: &FilterConfig,
    client: &dyn SelectionClient,
    style: &BadgeStyle,
) -> Result<SomRun, SomError> {
    let mut run = SomRun {
        predictions: Vec::new(),
        notes: Vec::new(),
        responses: Vec::new(),
        marked: Vec::new(),
    };
    for sample in &bundle.samples {
        let image = bundle.load_image(dir, sample.image_id)?;
        let candidates = sample_candidates(bundle, sample, source, filter, dir)?;
        let outcome = run_grounding(
            &sample.id,
            &image,
            &sample.expression,
            &candidates,
            client,
            style,
        )?;
        if let Some(note) = outcome.note {
            run.notes.push(RunNote {
                sample_id: sample.id.clone(),
                note,
            });
        }
        if let Some(response) = outcome.response {
            run.responses.push(ReplayEntry {
                sample_id: sample.id.clone(),
                response,
            });
        }
        if let Some(m) = outcome.marked {
            run.marked.push((sample.id.clone(), m.image));
        }
        run.predictions.push(PredictionRecord {
            sample_id: sample.id.clone(),
            prediction: outcome.prediction,
        });
    }
    Ok(run)
}
