//! Time-series CSV and run summary.

use anyhow::{bail, Context, Result};
use fourwell::dynamics::{FinalControls, RunStats};
use fourwell::{RunRecord, Sample};
use serde::{Deserialize, Serialize};

pub const COLUMNS: [&str; 16] =
    ["t", "n1", "n2", "n3", "n4", "jt12", "jt23", "jt34", "c23", "J12", "J34", "eps1", "eps4", "P2", "P4", "norm"];

/// One CSV row of a sample.
pub fn row(s: &Sample) -> [f64; 16] {
    let f = &s.first_order;
    let c = &s.controls;
    [
        s.t,
        f.occupations[0],
        f.occupations[1],
        f.occupations[2],
        f.occupations[3],
        f.currents[0][1],
        f.currents[1][2],
        f.currents[2][3],
        f.correlations[1][2],
        c.j12,
        c.j34,
        c.eps1,
        c.eps4,
        f.purity2,
        f.purity4,
        s.norm,
    ]
}

/// Comma-separated, LF-terminated, 17 significant digits.
pub fn write_csv(record: &RunRecord) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for s in &record.samples {
        let fields: Vec<String> = row(s).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses a CSV written by [`write_csv`]. Fails on a wrong header, ragged
/// rows, unparsable numbers, or no data.
pub fn read_csv(text: &str) -> Result<Vec<[f64; 16]>> {
    let mut lines = text.lines();
    let Some(head) = lines.next() else { bail!("CSV is empty") };
    if head.split(',').collect::<Vec<_>>() != COLUMNS {
        bail!("unexpected CSV header `{head}`");
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 16 {
            bail!("row {} has {} fields, expected 16", i + 1, fields.len());
        }
        let mut r = [0.0; 16];
        for (slot, f) in r.iter_mut().zip(&fields) {
            *slot = f.parse().with_context(|| format!("row {}: bad number `{f}`", i + 1))?;
        }
        rows.push(r);
    }
    if rows.is_empty() {
        bail!("CSV has no data rows");
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub termination: String,
    /// Time of the terminating event, if any.
    pub termination_time: Option<f64>,
    pub termination_reason: Option<String>,
    pub collapse_time: Option<f64>,
    pub samples: usize,
    pub initial: Option<InitialSummary>,
    pub final_controls: Option<FinalSummary>,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSummary {
    /// The five constraint residuals of the prepared state.
    pub constraint_residuals: [f64; 5],
    pub max_residual: f64,
    pub purity2: f64,
    pub purity4: f64,
    pub solver_iterations: usize,
    pub remainder_weight: f64,
    pub projection_distance: f64,
    pub det: Option<f64>,
    pub det_scale: Option<f64>,
}

/// Controls at the stopping point; non-finite values become `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub t: f64,
    pub j12: Option<f64>,
    pub j34: Option<f64>,
    pub eps1: Option<f64>,
    pub eps4: Option<f64>,
    pub jt12: Option<f64>,
    pub jt34: Option<f64>,
}

impl From<FinalControls> for FinalSummary {
    fn from(f: FinalControls) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            t: f.t,
            j12: finite(f.j12),
            j34: finite(f.j34),
            eps1: finite(f.eps1),
            eps4: finite(f.eps4),
            jt12: finite(f.jt12),
            jt34: finite(f.jt34),
        }
    }
}

impl Summary {
    pub fn of(record: &RunRecord) -> Self {
        use fourwell::Termination::*;
        let reason = match &record.termination {
            Collapsed { reason, .. } | Failed { reason, .. } => Some(reason.clone()),
            _ => None,
        };
        Self {
            version: record.version.clone(),
            termination: record.termination.label().to_string(),
            termination_time: record.termination.time(),
            termination_reason: reason,
            collapse_time: record.collapse_time(),
            samples: record.samples.len(),
            initial: record.initial.as_ref().map(|i| InitialSummary {
                constraint_residuals: i.residuals.r,
                max_residual: i.residuals.max_abs(),
                purity2: i.purity2,
                purity4: i.purity4,
                solver_iterations: i.solver_iterations,
                remainder_weight: i.remainder_weight,
                projection_distance: i.projection_distance,
                det: i.coefficients.map(|c| c.det),
                det_scale: i.coefficients.map(|c| c.det_scale()),
            }),
            final_controls: record.final_controls.map(FinalSummary::from),
            stats: record.stats.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}
