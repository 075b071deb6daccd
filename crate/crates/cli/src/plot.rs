//! Emits a matplotlib script drawing the six standard panels of a run.

use std::path::Path;

use anyhow::{Context, Result};

use crate::output::{read_csv, Summary};
use crate::{config, CONFIG_FILE, CSV_FILE, PLOT_FILE, SUMMARY_FILE};

/// Builds the script text for the run stored in `dir`. The CSV is read and
/// checked; the two-mode reference values come from the resolved config.
pub fn script(dir: &Path) -> Result<String> {
    let csv_path = dir.join(CSV_FILE);
    let text = std::fs::read_to_string(&csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    read_csv(&text).with_context(|| format!("in {}", csv_path.display()))?;
    let config = config::load(&dir.join(CONFIG_FILE))?;
    let target = config.target()?;
    let summary_path = dir.join(SUMMARY_FILE);
    let t_c = match std::fs::read_to_string(&summary_path) {
        Ok(s) => serde_json::from_str::<Summary>(&s)
            .with_context(|| format!("parsing {}", summary_path.display()))?
            .collapse_time,
        Err(_) => None,
    };
    let t_c = t_c.map_or("None".to_string(), |t| format!("{t:e}"));
    Ok(format!(
        r#"#!/usr/bin/env python3
# Six-panel overview of a controlled four-well run.
import csv
import os
import sys

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
JT23_TARGET = {jt:e}
C23_TARGET = {c:e}
N_TARGET = {n:e}
T_COLLAPSE = {t_c}

with open(os.path.join(HERE, "{csv}")) as f:
    rows = list(csv.DictReader(f))
if not rows:
    sys.exit("no samples in {csv}")
col = {{k: [float(r[k]) for r in rows] for k in rows[0]}}
t = col["t"]

fig, ax = plt.subplots(3, 2, figsize=(10, 10), sharex=True)
panels = [
    (ax[0, 0], "(a) occupations", [("n1", "$n_1$"), ("n2", "$n_2$"), ("n3", "$n_3$"), ("n4", "$n_4$")], [N_TARGET]),
    (ax[0, 1], "(b) inner current and correlation", [("jt23", r"$\tilde{{j}}_{{23}}$"), ("c23", "$c_{{23}}$")], [JT23_TARGET, C23_TARGET]),
    (ax[1, 0], "(c) tunnelling rates", [("J12", "$J_{{12}}$"), ("J34", "$J_{{34}}$")], []),
    (ax[1, 1], "(d) reservoir currents", [("jt12", r"$\tilde{{j}}_{{12}}$"), ("jt34", r"$\tilde{{j}}_{{34}}$")], []),
    (ax[2, 0], "(e) onsite energies", [("eps1", r"$\epsilon_1$"), ("eps4", r"$\epsilon_4$")], []),
    (ax[2, 1], "(f) purity", [("P2", "$P_2$"), ("P4", "$P_4$")], []),
]
for a, title, series, targets in panels:
    for key, label in series:
        a.plot(t, col[key], label=label)
    for y in targets:
        a.axhline(y, color="k", linestyle="--", linewidth=0.8)
    if T_COLLAPSE is not None:
        a.axvline(T_COLLAPSE, color="r", linewidth=0.8)
    a.set_title(title)
    a.legend(loc="best", fontsize="small")
for a in ax[2]:
    a.set_xlabel("t")
fig.tight_layout()
out = os.path.join(HERE, "panels.pdf")
fig.savefig(out)
print(out)
"#,
        jt = target.current,
        c = target.correlation,
        n = target.n,
        csv = CSV_FILE,
    ))
}

/// Writes the script next to the run outputs and returns its path.
pub fn write(dir: &Path) -> Result<std::path::PathBuf> {
    let text = script(dir)?;
    let path = dir.join(PLOT_FILE);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
