//! Experiment runner for `hypam-core`: typed configurations, the subcommand table,
//! deterministic parallelism and the CSV/JSON artifacts.

pub mod config;
pub mod experiments;
pub mod output;
pub mod parallel;

use std::path::{Path, PathBuf};

use config::{ExperimentConfig, Params};
use output::{Outcome, Summary};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hypam_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Resolves `config` against its experiment's table and runs it.
pub fn run_config(
    config: &ExperimentConfig,
) -> Result<(ExperimentConfig, Outcome, Summary), RunError> {
    let exp = experiments::find(&config.command)
        .ok_or_else(|| RunError::Usage(format!("unknown command {:?}", config.command)))?;
    let resolved = config.resolve(exp.params)?;
    let workers = resolved
        .workers
        .unwrap_or_else(parallel::default_workers)
        .max(1);
    let outcome = (exp.run)(&Params(&resolved.params), resolved.seed, workers)?;
    let summary = Summary::new(&resolved, &outcome);
    Ok((resolved, outcome, summary))
}

/// Runs `config` and writes its artifacts to `<root>/<command>/`.
pub fn run_to_dir(
    config: &ExperimentConfig,
    root: &Path,
) -> Result<(Outcome, Summary, PathBuf), RunError> {
    let (resolved, outcome, summary) = run_config(config)?;
    let dir = root.join(&resolved.command);
    output::write_artifacts(&dir, &resolved, &outcome, &summary)?;
    Ok((outcome, summary, dir))
}
