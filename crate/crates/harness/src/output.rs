//! Output files of a run: `summary.json` and `samples.csv` are a pure
//! function of the config and seed; wall time goes to `timing.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::experiments::{Outcome, RunError, RunResult, Table};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const TIMING_FILE: &str = "timing.json";

pub fn summary_json(config: &ExperimentConfig, outcome: &Outcome) -> Value {
    json!({
        "experiment": config.name(),
        "config": config.echo(),
        "results": outcome.results,
        "checks": outcome.checks,
        "all_passed": outcome.checks.iter().all(|c| c.passed),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_json(path: &Path, value: &Value) -> RunResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// RFC 4180 with LF line endings.
pub fn write_csv(path: &Path, table: &Table) -> RunResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the three output files into `dir`, creating it if needed, and
/// returns their paths.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    outcome: &Outcome,
    wall_seconds: f64,
) -> RunResult<[PathBuf; 3]> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let summary = dir.join(SUMMARY_FILE);
    let samples = dir.join(SAMPLES_FILE);
    let timing = dir.join(TIMING_FILE);
    write_json(&summary, &summary_json(config, outcome))?;
    write_csv(&samples, &outcome.table)?;
    write_json(
        &timing,
        &json!({ "wall_time_seconds": wall_seconds, "workers": config.workers() }),
    )?;
    Ok([summary, samples, timing])
}
