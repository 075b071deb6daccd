//! Controlled runs on small chains.

use fourwell::dynamics::prepare_initial_state;
use fourwell::{collapse_time, run, Complex64, RunConfig, RunRecord, Sample, Termination};

fn small(gamma: f64, solver_tolerance: f64) -> RunConfig {
    RunConfig {
        n_total: 8,
        n: 2.0,
        n1_0: 2.0,
        n4_0: 2.0,
        gamma,
        solver_tolerance,
        t_max: 1.0,
        sample_interval: 0.01,
        ..Default::default()
    }
}

fn sigma(s: &Sample, k: usize, l: usize) -> Complex64 {
    let f = &s.first_order;
    Complex64::new(0.5 * f.correlations[k][l], 0.5 * f.currents[k][l])
}

fn requirement(s: &Sample) -> Complex64 {
    -sigma(s, 0, 2) * s.controls.j12 + sigma(s, 1, 3) * s.controls.j34
}

fn check_conservation(record: &RunRecord) {
    let n = record.config.n_total as f64;
    for pair in record.samples.windows(2) {
        assert!(pair[1].t > pair[0].t);
    }
    for s in &record.samples {
        assert!((s.norm - 1.0).abs() < 1e-9, "norm {} at t = {}", s.norm, s.t);
        assert!((s.particles - n).abs() < 1e-9 * n);
        let occ: f64 = s.first_order.occupations.iter().sum();
        assert!((occ - n).abs() < 1e-9 * n);
    }
}

#[test]
fn hermitian_limit_never_collapses() {
    let record = run(&small(0.0, 1e-8));
    assert_eq!(record.termination, Termination::Completed);
    assert_eq!(collapse_time(&record), None);
    assert_eq!(record.samples.len(), 101);
    check_conservation(&record);
    for s in &record.samples {
        assert_eq!((s.controls.j12, s.controls.j34, s.controls.eps1, s.controls.eps4), (0.0, 0.0, 0.0, 0.0));
    }
}

#[test]
fn loosely_constrained_run_collapses_with_vanishing_currents() {
    let record = run(&small(0.5, 0.1));
    let t_c = collapse_time(&record).expect("collapse");
    assert!(t_c > 0.1 && t_c < 1.0, "t_c = {t_c}");
    check_conservation(&record);
    let first = &record.samples[0];
    let last = record.samples.last().unwrap();
    let jt = |s: &Sample| s.first_order.currents[0][1].abs().min(s.first_order.currents[2][3].abs());
    assert!(jt(last) < 0.2 * jt(first));
    let fc = record.final_controls.expect("final controls");
    assert!(fc.jt12.abs().min(fc.jt34.abs()) < 1e-2 * jt(first));
    assert!(fc.j12.min(fc.j34) > 100.0 * first.controls.j12.max(first.controls.j34));
    let eps = |a: f64, b: f64| a.abs().max(b.abs());
    assert!(eps(fc.eps1, fc.eps4) > 100.0 * eps(first.controls.eps1, first.controls.eps4));
}

#[test]
fn controls_hold_the_requirement_residual_fixed() {
    let record = run(&small(0.5, 0.1));
    let t_c = collapse_time(&record).unwrap();
    let r0 = requirement(&record.samples[0]);
    for s in record.samples.iter().filter(|s| s.t <= 0.5 * t_c) {
        assert!((requirement(s) - r0).norm() < 1e-6 * 8.0, "t = {}: {}", s.t, (requirement(s) - r0).norm());
    }
}

#[test]
fn halving_the_tolerance_changes_little() {
    let coarse = RunConfig { tolerance: 1e-8, t_max: 0.3, ..small(0.5, 0.1) };
    let fine = RunConfig { tolerance: 5e-9, ..coarse.clone() };
    let (a, b) = (run(&coarse), run(&fine));
    assert_eq!(a.samples.len(), b.samples.len());
    for (x, y) in a.samples.iter().zip(&b.samples) {
        for k in 0..4 {
            for l in 0..4 {
                assert!((sigma(x, k, l) - sigma(y, k, l)).norm() < 1e-8, "t = {}", x.t);
            }
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let config = RunConfig { t_max: 0.2, ..small(0.5, 0.1) };
    assert_eq!(run(&config), run(&config));
}

#[test]
fn real_multipliers_leave_the_onsite_system_singular() {
    let record = run(&RunConfig { complex_perturbation: false, ..small(0.5, 0.1) });
    assert_eq!(record.termination, Termination::Degenerate { time: 0.0 });
    assert_eq!(collapse_time(&record), None);
}

#[test]
fn tight_constraints_condense_the_inner_wells() {
    let prepared = prepare_initial_state(&small(0.5, 1e-8)).unwrap();
    let report = prepared.report;
    assert!(report.residuals.max_abs() < 1e-8);
    assert!(report.purity2 > 1.0 - 1e-3, "P2 = {}", report.purity2);
    let coeffs = report.coefficients.unwrap();
    assert!(coeffs.det.abs() < 1e-2 * coeffs.det_scale());
}
