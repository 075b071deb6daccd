use std::path::Path;
use std::process::{Command, Output};

use fourwell_cli::output::{read_csv, Summary};
use fourwell_cli::{config, CONFIG_FILE, CSV_FILE, PLOT_FILE, SUMMARY_FILE};

const SMALL: &str = "n_total = 6\nn = 1\nn1_0 = 2\nn4_0 = 2\nsolver_tolerance = 0.1\nt_max = 0.05\nsample_interval = 0.01\n";

fn fourwell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fourwell")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.config");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> Summary {
    serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap()
}

#[test]
fn run_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let status = fourwell(&["run", &cfg, "-o", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let rows = read_csv(&std::fs::read_to_string(out.join(CSV_FILE)).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    let s = summary(&out);
    assert_eq!(s.termination, "completed");
    assert_eq!(s.initial.unwrap().constraint_residuals.len(), 5);
    let resolved = config::load(&out.join(CONFIG_FILE)).unwrap();
    assert_eq!(resolved, config::parse(SMALL).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    assert!(fourwell(&["run", &cfg, "-o", out.to_str().unwrap(), "--seed", "42"]).status.success());
    assert_eq!(config::load(&out.join(CONFIG_FILE)).unwrap().seed, 42);
}

#[test]
fn invalid_config_lists_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "gamma = 1.5\nj = 1\nbogus = 3\n");
    let status = fourwell(&["run", &cfg, "-o", tmp.path().join("out").to_str().unwrap()]);
    assert!(!status.status.success());
    let err = String::from_utf8_lossy(&status.stderr);
    assert!(err.contains("unknown key `bogus`"), "{err}");
    let cfg = write_config(tmp.path(), "gamma = 1.5\nj = 1\n");
    let err = String::from_utf8_lossy(&fourwell(&["run", &cfg]).stderr).to_string();
    assert!(err.contains("gamma exceeds j"), "{err}");
}

#[test]
fn pure_state_is_degenerate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}d = 0\n"));
    let out = tmp.path().join("out");
    let status = fourwell(&["run", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s.termination, "degenerate");
    assert_eq!(s.termination_time, Some(0.0));
}

#[test]
fn plot_script_overlays_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    assert!(fourwell(&["run", &cfg, "-o", out.to_str().unwrap()]).status.success());
    assert!(fourwell(&["plot", out.to_str().unwrap()]).status.success());
    let script = std::fs::read_to_string(out.join(PLOT_FILE)).unwrap();
    // n = 1, γ = 0.5, J = 1
    assert!(script.contains("JT23_TARGET = 1e0"), "{script}");
    assert!(script.contains(&format!("C23_TARGET = {:e}", 3f64.sqrt())));
    assert!(script.contains("T_COLLAPSE = None"));
    for panel in ["(a)", "(b)", "(c)", "(d)", "(e)", "(f)"] {
        assert!(script.contains(panel));
    }
}

#[test]
fn plot_rejects_missing_or_empty_csv() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!fourwell(&["plot", tmp.path().to_str().unwrap()]).status.success());
    std::fs::write(tmp.path().join(CSV_FILE), "").unwrap();
    let status = fourwell(&["plot", tmp.path().to_str().unwrap()]);
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("empty"));
}

#[test]
fn sweep_covers_values_and_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("sweep");
    let status = fourwell(&[
        "sweep", &cfg, "--param", "d", "--values", "0.002,0.008,0.032", "--seeds", "10", "-o", out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "param,value,seed,status,t_c,max_residual,initial_P4");
    assert_eq!(lines.len(), 31);
}

#[test]
fn sweep_over_gamma_changes_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("sweep");
    assert!(fourwell(&["sweep", &cfg, "--param", "gamma", "--values", "0.1,0.5,1.5", "-o", out.to_str().unwrap()])
        .status
        .success());
    let target = |v: &str| {
        let c = config::load(&out.join(format!("gamma={v}_seed=1")).join(CONFIG_FILE)).unwrap();
        c.target().unwrap().current
    };
    assert!((target("0.1") - 0.2).abs() < 1e-12);
    assert!((target("0.5") - 1.0).abs() < 1e-12);
    let report = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("gamma,1.5,1,error")));
}

#[test]
fn sweep_needs_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let status = fourwell(&["sweep", &cfg, "--param", "d", "--values", "-o", tmp.path().to_str().unwrap()]);
    assert!(!status.status.success());
    let status = fourwell(&["sweep", &cfg, "--param", "d"]);
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("at least one value"));
}
