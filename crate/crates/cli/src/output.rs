use std::fs;
use std::path::{Path, PathBuf};

use attnboot::inference::Histogram;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

pub fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// Writes `run.json`: the command, its fully resolved settings and the tool version.
pub fn write_run_record(dir: &Path, command: &str, config: Value) -> CliResult<PathBuf> {
    let path = dir.join("run.json");
    write_json(
        &path,
        &json!({
            "tool": "attnboot",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
        }),
    )?;
    Ok(path)
}

#[derive(Serialize)]
struct HistogramRow {
    bin: usize,
    lo: f64,
    hi: f64,
    count: usize,
    density: f64,
}

/// One row per bin: edges, count and density normalized to unit area.
pub fn write_histogram(path: &Path, hist: &Histogram) -> CliResult<()> {
    let total: usize = hist.counts.iter().sum();
    let width = hist.bin_width();
    let mut out = csv::Writer::from_path(path)?;
    for (bin, &count) in hist.counts.iter().enumerate() {
        let (lo, hi) = hist.bin_edges(bin);
        let density = if total == 0 || width == 0.0 {
            0.0
        } else {
            count as f64 / (total as f64 * width)
        };
        out.serialize(HistogramRow {
            bin,
            lo,
            hi,
            count,
            density,
        })?;
    }
    out.flush()?;
    Ok(())
}
