//! Run settings: defaults < `--config` file < per-script sidecar < flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use chartforge::som::{BadgeStyle, FilterConfig};
use chartforge::{Error, RunConfig, TraceError};

use crate::CliError;

#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// Seed for the script's random generators.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Per-script wall-clock limit in seconds.
    #[arg(long, global = true)]
    pub timeout: Option<f64>,
    /// Render resolution in dots per inch.
    #[arg(long = "render-scale", global = true)]
    pub render_scale: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file with run, filter and badge settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialRun {
    pub seed: Option<u64>,
    pub timeout_s: Option<f64>,
    pub render_scale: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl PartialRun {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.timeout_s {
            cfg.timeout_s = v;
        }
        if let Some(v) = self.render_scale {
            cfg.render_scale = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
    }
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(flatten)]
    pub run: PartialRun,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub badge: BadgeStyle,
}

fn invalid(msg: String) -> CliError {
    CliError::Lib(Error::Trace(TraceError::InvalidConfig(msg)))
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let cfg: FileConfig =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        cfg.filter.validate().map_err(|e| CliError::Lib(e.into()))?;
        Ok(cfg)
    }
}

/// `script.py` → `script.json`, when present.
fn sidecar(script: &Path) -> Result<Option<PartialRun>, CliError> {
    let path = script.with_extension("json");
    if !path.is_file() {
        return Ok(None);
    }
    let text =
        fs::read_to_string(&path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

pub fn resolve_run_config(
    file: &FileConfig,
    script: Option<&Path>,
    flags: &Overrides,
) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    file.run.apply(&mut cfg);
    if let Some(s) = script.map(sidecar).transpose()?.flatten() {
        s.apply(&mut cfg);
    }
    PartialRun {
        seed: flags.seed,
        timeout_s: flags.timeout,
        render_scale: flags.render_scale,
        out_dir: flags.out.clone(),
    }
    .apply(&mut cfg);
    cfg.validate().map_err(|e| CliError::Lib(e.into()))?;
    Ok(cfg)
}
