//! Configuration, the alternating training loop, evaluation, named
//! experiments and result files.

mod checkpoint;
mod config;
mod experiment;
mod report;
mod train;

use std::fs;
use std::path::Path;

use serde_json::json;

pub use checkpoint::Checkpoint;
pub use config::{MemoryConfig, Mode, TrainConfig};
pub use experiment::{
    build_splits, run_experiment, DataSpec, ExperimentName, ExperimentResult, ExperimentSpec, RunSummary, Splits,
};
pub use report::{
    format_table, histogram, mean_std, render_report, run_records, to_jsonl, weight_histogram, ModeStats,
    WeightHistogram, HISTOGRAM_BIN_WIDTH,
};
pub use train::{evaluate, train, train_observed, BatchEvent, EpochRecord, RunReport, TrainOutput};

use crate::error::Result;

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Saves a single training run into `dir`: `checkpoint.txt`,
/// `results.jsonl` and `timing.jsonl`.
pub fn write_run(out: &TrainOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    out.checkpoint.save(&dir.join("checkpoint.txt"))?;
    let records = run_records(&out.report, &[])?;
    write_atomic(&dir.join("results.jsonl"), to_jsonl(&records).as_bytes())?;
    let timing = json!({
        "kind": "timing",
        "mode": out.report.mode().as_str(),
        "seed": out.report.config.seed,
        "wall_clock_seconds": out.report.wall_clock_seconds,
    });
    write_atomic(&dir.join("timing.jsonl"), to_jsonl(&[timing]).as_bytes())
}
