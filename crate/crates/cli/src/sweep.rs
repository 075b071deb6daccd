//! Parameter sweeps over seed ensembles, run in parallel.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use fourwell::RunConfig;
use rayon::prelude::*;

use crate::config;

/// One row of the aggregate report.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub seed: u64,
    pub status: String,
    pub collapse_time: Option<f64>,
    pub max_residual: Option<f64>,
    pub initial_p4: Option<f64>,
    pub dir: PathBuf,
}

pub const AGGREGATE_FILE: &str = "sweep.csv";

/// Runs every `(value, seed)` pair with seeds `base.seed .. base.seed + seeds`.
/// A failing run becomes a row with status `error`; the sweep continues.
pub fn sweep(base: &RunConfig, param: &str, values: &[String], seeds: u64, out: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        bail!("sweep needs at least one value for `{param}`");
    }
    if seeds == 0 {
        bail!("sweep needs at least one seed");
    }
    if param == "seed" {
        bail!("`seed` is swept through --seeds, not --param");
    }
    // the parameter name itself must be known
    config::set(base, param, values[0].as_str()).map_err(|e| {
        if e.to_string().contains("unknown key") {
            anyhow::anyhow!("unknown sweep parameter `{param}`")
        } else {
            e
        }
    })?;
    let jobs: Vec<(String, u64)> =
        values.iter().flat_map(|v| (0..seeds).map(move |i| (v.clone(), base.seed + i))).collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(value, seed)| {
            let dir = out.join(format!("{param}={value}_seed={seed}"));
            let outcome = config::set(base, param, value)
                .map(|c| RunConfig { seed: *seed, ..c })
                .and_then(|c| crate::run_to_dir(&c, &dir));
            match outcome {
                Ok(record) => SweepRow {
                    value: value.clone(),
                    seed: *seed,
                    status: record.termination.label().to_string(),
                    collapse_time: record.collapse_time(),
                    max_residual: record.initial.as_ref().map(|i| i.residuals.max_abs()),
                    initial_p4: record.initial.as_ref().map(|i| i.purity4),
                    dir,
                },
                Err(e) => {
                    log::warn!("{param} = {value}, seed {seed}: {e:#}");
                    SweepRow {
                        value: value.clone(),
                        seed: *seed,
                        status: "error".into(),
                        collapse_time: None,
                        max_residual: None,
                        initial_p4: None,
                        dir,
                    }
                }
            }
        })
        .collect();
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(AGGREGATE_FILE), aggregate_csv(param, &rows))?;
    Ok(rows)
}

/// `param,value,seed,status,t_c,max_residual,initial_P4`; missing values are
/// empty fields.
pub fn aggregate_csv(param: &str, rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
    let mut out = String::from("param,value,seed,status,t_c,max_residual,initial_P4\n");
    for r in rows {
        out.push_str(&format!(
            "{param},{},{},{},{},{},{}\n",
            r.value,
            r.seed,
            r.status,
            opt(r.collapse_time),
            opt(r.max_residual),
            opt(r.initial_p4)
        ));
    }
    out
}
