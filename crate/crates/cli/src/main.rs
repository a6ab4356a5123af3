mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use chartforge::dataset::{
    bundle_dir, dataset_stats, emit_dataset, load_bundle, load_requests, SceneEntry,
};
use chartforge::eval::{
    evaluate_bundle, gold_instance_predictions, gold_predictions, load_instance_predictions,
    load_predictions, map_bundle, write_jsonl,
};
use chartforge::som::{
    filter_candidates, gold_selector, load_proposals, overlay_marks, run_bundle, CandidateSource,
    HttpClient, ReplayClient, ScriptedClient, SelectionClient,
};
use chartforge::targets::PredictionFormat;
use chartforge::tracer::execute_script;
use chartforge::{Error, RunConfig};

use config::{resolve_run_config, FileConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "chartforge",
    version,
    about = "Chart grounding data synthesis and evaluation"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute scripts and write each traced scene as JSON plus PNG.
    Trace { scripts: Vec<PathBuf> },
    /// Execute scripts and write a dataset bundle.
    Synth {
        scripts: Vec<PathBuf>,
        /// Target requests to resolve into samples.
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Resolve target requests into samples of an existing bundle.
    Resolve { bundle: PathBuf, targets: PathBuf },
    /// Score grounding predictions.
    Eval {
        format: EvalFormat,
        bundle: PathBuf,
        predictions: PathBuf,
    },
    /// COCO-style mask mAP over all bundle annotations.
    Map {
        bundle: PathBuf,
        predictions: PathBuf,
    },
    /// Set-of-Mark candidate pipeline.
    Som {
        #[command(subcommand)]
        command: SomCommand,
    },
    /// Corpus statistics.
    Stats { bundle: PathBuf },
    /// Export gold annotations in a prediction file format.
    Gold { bundle: PathBuf, format: GoldFormat },
}

#[derive(Subcommand)]
enum SomCommand {
    /// Post-filter proposal masks.
    Filter { bundle: PathBuf, proposals: PathBuf },
    /// Draw numbered marks for one image's proposals.
    Overlay {
        bundle: PathBuf,
        proposals: PathBuf,
        #[arg(long)]
        image_id: u64,
        /// Skip post-filtering.
        #[arg(long)]
        raw: bool,
    },
    /// Run selection over every sample and score the result.
    Run(SomRunArgs),
}

#[derive(Args)]
struct SomRunArgs {
    bundle: PathBuf,
    /// Proposal masks (JSONL); ignored with --oracle.
    #[arg(long, required_unless_present = "oracle")]
    proposals: Option<PathBuf>,
    /// Use the gold masks of each sample's category as candidates.
    #[arg(long)]
    oracle: bool,
    /// gold | fixed:<text> | replay:<file.jsonl> | http:<url>
    #[arg(long, default_value = "gold")]
    client: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalFormat {
    Point,
    Bbox,
    Seg,
}

impl From<EvalFormat> for PredictionFormat {
    fn from(f: EvalFormat) -> Self {
        match f {
            EvalFormat::Point => PredictionFormat::Point,
            EvalFormat::Bbox => PredictionFormat::Bbox,
            EvalFormat::Seg => PredictionFormat::Mask,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GoldFormat {
    Point,
    Bbox,
    Mask,
    Instances,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Script { path: PathBuf, source: Error },
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let validation = match self {
            CliError::Usage(_) => true,
            CliError::Script { source, .. } | CliError::Lib(source) => source.is_validation(),
        };
        if validation {
            1
        } else {
            2
        }
    }
}

fn lib<E: Into<Error>>(e: E) -> CliError {
    CliError::Lib(e.into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(lib)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(lib)?;
    text.push('\n');
    fs::write(path, text).map_err(lib)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn emit<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_json(path, value)?;
    let text = serde_json::to_string_pretty(value).map_err(lib)?;
    // a closed stdout (e.g. piped into `head`) is not an error; the file is written
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn trace_all(
    scripts: &[PathBuf],
    overrides: &Overrides,
    file_cfg: &FileConfig,
) -> Result<Vec<(PathBuf, RunConfig, chartforge::TracedScene)>, CliError> {
    if scripts.is_empty() {
        return Err(CliError::Usage("no scripts given".into()));
    }
    let results: Vec<Result<_, CliError>> = scripts
        .par_iter()
        .map(|path| {
            let cfg = resolve_run_config(file_cfg, Some(path), overrides)?;
            let text = fs::read_to_string(path).map_err(|e| CliError::Script {
                path: path.clone(),
                source: e.into(),
            })?;
            let scene = execute_script(&text, &cfg).map_err(|e| CliError::Script {
                path: path.clone(),
                source: e.into(),
            })?;
            info!("traced {} ({} calls)", path.display(), scene.calls.len());
            Ok((path.clone(), cfg, scene))
        })
        .collect();
    results.into_iter().collect()
}

fn make_client(
    spec: &str,
    overrides: &Overrides,
    file_cfg: &FileConfig,
) -> Result<Box<dyn SelectionClient>, CliError> {
    if let Some(text) = spec.strip_prefix("fixed:") {
        return Ok(Box::new(ScriptedClient::fixed(text)));
    }
    if let Some(path) = spec.strip_prefix("replay:") {
        let c = ReplayClient::load(Path::new(path)).map_err(|e| CliError::Usage(e.0))?;
        return Ok(Box::new(c));
    }
    if spec.starts_with("http:") || spec.starts_with("https:") {
        let url = spec
            .strip_prefix("http:")
            .filter(|u| !u.starts_with("//"))
            .unwrap_or(spec);
        let cfg = resolve_run_config(file_cfg, None, overrides)?;
        return Ok(Box::new(HttpClient::new(
            url,
            Duration::from_secs_f64(cfg.timeout_s),
        )));
    }
    Err(CliError::Usage(format!(
        "unknown client {spec:?}; expected gold, fixed:<text>, replay:<file> or http:<url>"
    )))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_cfg = FileConfig::load(cli.overrides.config.as_deref())?;
    let out_dir = resolve_run_config(&file_cfg, None, &cli.overrides)?.out_dir;
    match cli.command {
        Command::Trace { scripts } => {
            for (path, cfg, scene) in trace_all(&scripts, &cli.overrides, &file_cfg)? {
                scene.save(&cfg.out_dir, &stem(&path)).map_err(lib)?;
                println!(
                    "{}",
                    cfg.out_dir.join(format!("{}.json", stem(&path))).display()
                );
            }
        }
        Command::Synth { scripts, targets } => {
            let scenes: Vec<SceneEntry> = trace_all(&scripts, &cli.overrides, &file_cfg)?
                .into_iter()
                .map(|(path, _, scene)| SceneEntry {
                    source_tag: stem(&path),
                    scene,
                })
                .collect();
            let mut bundle = emit_dataset(&scenes, &[], &out_dir).map_err(lib)?;
            if let Some(t) = targets {
                for request in load_requests(&t).map_err(lib)? {
                    bundle.add_sample(&request).map_err(lib)?;
                }
                bundle.write_json(&out_dir).map_err(lib)?;
            }
            println!(
                "{}",
                out_dir.join(chartforge::dataset::DATASET_FILE).display()
            );
        }
        Command::Resolve { bundle, targets } => {
            let dir = bundle_dir(&bundle);
            let mut b = load_bundle(&bundle).map_err(lib)?;
            for request in load_requests(&targets).map_err(lib)? {
                let s = b.add_sample(&request).map_err(lib)?;
                info!("sample {} -> {} targets", s.id, s.targets.len());
            }
            b.write_json(&dir).map_err(lib)?;
            println!("{}", dir.join(chartforge::dataset::DATASET_FILE).display());
        }
        Command::Eval {
            format,
            bundle,
            predictions,
        } => {
            let b = load_bundle(&bundle).map_err(lib)?;
            let records = load_predictions(&predictions).map_err(lib)?;
            let fmt = PredictionFormat::from(format);
            let report = evaluate_bundle(&b, &records, fmt).map_err(lib)?;
            let name = match fmt {
                PredictionFormat::Point => "point",
                PredictionFormat::Bbox => "bbox",
                PredictionFormat::Mask => "seg",
            };
            emit(&out_dir.join(format!("eval_{name}.json")), &report)?;
        }
        Command::Map {
            bundle,
            predictions,
        } => {
            let b = load_bundle(&bundle).map_err(lib)?;
            let preds = load_instance_predictions(&predictions).map_err(lib)?;
            emit(
                &out_dir.join("map.json"),
                &map_bundle(&b, &preds).map_err(lib)?,
            )?;
        }
        Command::Stats { bundle } => {
            let b = load_bundle(&bundle).map_err(lib)?;
            emit(&out_dir.join("stats.json"), &dataset_stats(&b))?;
        }
        Command::Gold { bundle, format } => {
            let b = load_bundle(&bundle).map_err(lib)?;
            fs::create_dir_all(&out_dir).map_err(lib)?;
            let (name, result) = match format {
                GoldFormat::Instances => (
                    "gold_instances.jsonl",
                    write_jsonl(
                        &out_dir.join("gold_instances.jsonl"),
                        &gold_instance_predictions(&b),
                    ),
                ),
                f => {
                    let (fmt, name) = match f {
                        GoldFormat::Point => (PredictionFormat::Point, "gold_point.jsonl"),
                        GoldFormat::Bbox => (PredictionFormat::Bbox, "gold_bbox.jsonl"),
                        _ => (PredictionFormat::Mask, "gold_mask.jsonl"),
                    };
                    let records = gold_predictions(&b, fmt).map_err(lib)?;
                    (name, write_jsonl(&out_dir.join(name), &records))
                }
            };
            result.map_err(lib)?;
            println!("{}", out_dir.join(name).display());
        }
        Command::Som { command } => run_som(command, &cli.overrides, &file_cfg, &out_dir)?,
    }
    Ok(())
}

fn run_som(
    command: SomCommand,
    overrides: &Overrides,
    file_cfg: &FileConfig,
    out_dir: &Path,
) -> Result<(), CliError> {
    match command {
        SomCommand::Filter { bundle, proposals } => {
            let dir = bundle_dir(&bundle);
            let b = load_bundle(&bundle).map_err(lib)?;
            let props = load_proposals(&proposals).map_err(lib)?;
            let mut kept = Vec::new();
            let mut removed = BTreeMap::new();
            for (image_id, cands) in &props {
                let image = b.load_image(&dir, *image_id).map_err(lib)?;
                let outcome = filter_candidates(cands, &image, &file_cfg.filter).map_err(lib)?;
                kept.extend(outcome.kept.into_iter().map(|candidate| {
                    chartforge::som::ProposalRecord {
                        image_id: *image_id,
                        candidate,
                    }
                }));
                removed.insert(*image_id, outcome.removed);
            }
            fs::create_dir_all(out_dir).map_err(lib)?;
            write_jsonl(&out_dir.join("filtered.jsonl"), &kept).map_err(lib)?;
            emit(&out_dir.join("filter_removed.json"), &removed)?;
        }
        SomCommand::Overlay {
            bundle,
            proposals,
            image_id,
            raw,
        } => {
            let dir = bundle_dir(&bundle);
            let b = load_bundle(&bundle).map_err(lib)?;
            let image = b.load_image(&dir, image_id).map_err(lib)?;
            let mut cands = load_proposals(&proposals)
                .map_err(lib)?
                .remove(&image_id)
                .unwrap_or_default();
            if !raw {
                cands = filter_candidates(&cands, &image, &file_cfg.filter)
                    .map_err(lib)?
                    .kept;
            }
            let marked = overlay_marks(&image, &cands, &file_cfg.badge).map_err(lib)?;
            fs::create_dir_all(out_dir).map_err(lib)?;
            let png = out_dir.join(format!("marked_{image_id:06}.png"));
            marked
                .image
                .save(&png)
                .map_err(|e| lib(chartforge::DatasetError::Image(e.to_string())))?;
            emit(
                &out_dir.join(format!("marks_{image_id:06}.json")),
                &marked.id_map,
            )?;
        }
        SomCommand::Run(args) => {
            let dir = bundle_dir(&args.bundle);
            let b = load_bundle(&args.bundle).map_err(lib)?;
            let source = if args.oracle {
                CandidateSource::Oracle
            } else {
                let path = args.proposals.as_ref().expect("required unless --oracle");
                CandidateSource::Proposals(load_proposals(path).map_err(lib)?)
            };
            let client: Box<dyn SelectionClient> = if args.client == "gold" {
                Box::new(gold_selector(&b, &dir, &source, &file_cfg.filter).map_err(lib)?)
            } else {
                make_client(&args.client, overrides, file_cfg)?
            };
            let run = run_bundle(
                &b,
                &dir,
                &source,
                &file_cfg.filter,
                client.as_ref(),
                &file_cfg.badge,
            )
            .map_err(lib)?;
            let marked_dir = out_dir.join("marked");
            fs::create_dir_all(&marked_dir).map_err(lib)?;
            for (sample_id, image) in &run.marked {
                image
                    .save(marked_dir.join(format!("{sample_id}.png")))
                    .map_err(|e| lib(chartforge::DatasetError::Image(e.to_string())))?;
            }
            write_jsonl(&out_dir.join("predictions.jsonl"), &run.predictions).map_err(lib)?;
            write_jsonl(&out_dir.join("responses.jsonl"), &run.responses).map_err(lib)?;
            write_json(&out_dir.join("notes.json"), &run.notes)?;
            let report =
                evaluate_bundle(&b, &run.predictions, PredictionFormat::Mask).map_err(lib)?;
            emit(&out_dir.join("eval_seg.json"), &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
