//! Command-line driver: configuration files, run outputs, plot scripts and
//! parameter sweeps.

use std::path::Path;

use anyhow::{Context, Result};
use fourwell::{run, RunConfig, RunRecord, Termination};

pub mod config;
pub mod output;
pub mod plot;
pub mod sweep;

pub const CSV_FILE: &str = "timeseries.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "resolved.config";
pub const PLOT_FILE: &str = "plot.py";

/// Runs `config` and writes the resolved config, time series and summary
/// into `dir`, creating it if needed.
pub fn run_to_dir(config: &RunConfig, dir: &Path) -> Result<RunRecord> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, CONFIG_FILE, &config::render(config))?;
    let record = run(config);
    write(dir, CSV_FILE, &output::write_csv(&record))?;
    write(dir, SUMMARY_FILE, &output::Summary::of(&record).to_json())?;
    Ok(record)
}

/// Process exit status for a finished run: collapse is an expected outcome.
pub fn exit_code(termination: &Termination) -> i32 {
    match termination {
        Termination::Completed | Termination::Collapsed { .. } => 0,
        Termination::Degenerate { .. } => 2,
        Termination::Failed { .. } => 3,
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
