//! Feedback-controlled Schrödinger evolution `i d|ψ>/dt = H(t)|ψ>`.
//!
//! The controls are recomputed from the state at every right-hand-side
//! evaluation, so the controlled flow is autonomous in the state. Samples are
//! taken on a fixed grid through the integrator's dense output.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{FockBasis, ManyBodyState};
use crate::control::{coefficient_assembly, tunnelling_controls, ControlLaw, LinearSystemCoeffs, Thresholds};
use crate::error::{Error, Result};
use crate::hamiltonian::{ControlParams, HamiltonianTerms};
use crate::observables::{inner_two_particle_indices, DensityMoments, DerivedFirstOrder, MomentEvaluator};
use crate::ode::{DormandPrince, OdeSystem, StepperOptions};
use crate::prep::{self, ConstraintResiduals, MeanFieldSeed, PerturbationSpec, SolverOptions};
use crate::twomode::TwoModeTarget;

/// Complete description of one controlled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_total: usize,
    pub gamma: f64,
    /// Inner tunnelling rate `J = J23`.
    pub j: f64,
    /// Microscopic interaction `U = g / (N_tot - 1)`.
    pub u: f64,
    /// Variance of the normal deflection.
    pub d: f64,
    pub seed: u64,
    /// Initial occupation of each inner well.
    pub n: f64,
    pub n1_0: f64,
    pub n4_0: f64,
    pub dt_initial: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    /// Collapse when `|j̃12|` or `|j̃34|` < this times `N_tot`.
    pub collapse_threshold: f64,
    /// Collapse when a control magnitude exceeds this times `J`.
    pub control_limit: f64,
    /// Relative determinant cutoff of the onsite-energy system.
    pub degeneracy_threshold: f64,
    /// Local error bound per integrator step (state 2-norm).
    pub tolerance: f64,
    /// Allowed norm drift per unit time before renormalization.
    pub norm_drift_rate: f64,
    pub complex_perturbation: bool,
    pub solver_iterations: usize,
    pub solver_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_total: 22,
            gamma: 0.5,
            j: 1.0,
            u: 0.1,
            d: 0.008,
            seed: 1,
            n: 5.0,
            n1_0: 7.0,
            n4_0: 5.0,
            dt_initial: 1e-3,
            t_max: 5.0,
            sample_interval: 1e-3,
            collapse_threshold: 1e-6,
            control_limit: 1e3,
            degeneracy_threshold: 1e-10,
            tolerance: 1e-10,
            norm_drift_rate: 1e-9,
            complex_perturbation: true,
            solver_iterations: 500,
            solver_tolerance: 1e-8,
        }
    }
}

impl RunConfig {
    /// Every violated invariant, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("{name} must be positive and finite (got {v})"));
            }
        };
        positive("j", self.j);
        positive("n", self.n);
        positive("dt_initial", self.dt_initial);
        positive("sample_interval", self.sample_interval);
        positive("collapse_threshold", self.collapse_threshold);
        positive("control_limit", self.control_limit);
        positive("degeneracy_threshold", self.degeneracy_threshold);
        positive("tolerance", self.tolerance);
        positive("norm_drift_rate", self.norm_drift_rate);
        positive("solver_tolerance", self.solver_tolerance);
        let mut non_negative = |name: &str, v: f64| {
            if !(v >= 0.0 && v.is_finite()) {
                errors.push(format!("{name} must be non-negative and finite (got {v})"));
            }
        };
        non_negative("gamma", self.gamma);
        non_negative("u", self.u);
        non_negative("d", self.d);
        non_negative("n1_0", self.n1_0);
        non_negative("n4_0", self.n4_0);
        non_negative("t_max", self.t_max);
        if self.n_total < 1 {
            errors.push("n_total must be at least 1".into());
        }
        if self.gamma > self.j {
            errors.push(format!("gamma exceeds j ({} > {}): PT symmetry is broken", self.gamma, self.j));
        }
        let split = self.n1_0 + self.n4_0 + 2.0 * self.n;
        if (split - self.n_total as f64).abs() > 1e-9 * (self.n_total as f64).max(1.0) {
            errors.push(format!("n1_0 + n4_0 + 2 n = {split} does not equal n_total = {}", self.n_total));
        }
        if self.solver_iterations == 0 {
            errors.push("solver_iterations must be at least 1".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errors))
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            collapse_current: self.collapse_threshold,
            control_limit: self.control_limit,
            degeneracy: self.degeneracy_threshold,
        }
    }

    pub fn control_law(&self) -> ControlLaw {
        ControlLaw { gamma: self.gamma, j23: self.j, u: self.u, thresholds: self.thresholds() }
    }

    pub fn target(&self) -> Result<TwoModeTarget> {
        TwoModeTarget::new(self.gamma, self.j, self.n)
    }

    /// Absolute current floor that signals collapse.
    pub fn collapse_current(&self) -> f64 {
        self.collapse_threshold * self.n_total as f64
    }
}

/// One recorded time sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub controls: ControlParams,
    pub first_order: DerivedFirstOrder,
    /// The nine inner-well two-particle elements, as `[re, im]`, in the order
    /// of [`inner_two_particle_indices`].
    pub sigma2_inner: [[f64; 2]; 9],
    /// Norm of the interpolated state before renormalization.
    pub norm: f64,
    /// `<Σ n_k>` of the interpolated state before renormalization.
    pub particles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Termination {
    Completed,
    Collapsed { time: f64, reason: String },
    Degenerate { time: f64 },
    Failed { time: f64, reason: String },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::Collapsed { .. } => "collapsed",
            Termination::Degenerate { .. } => "degenerate",
            Termination::Failed { .. } => "failed",
        }
    }

    pub fn time(&self) -> Option<f64> {
        match self {
            Termination::Completed => None,
            Termination::Collapsed { time, .. } | Termination::Degenerate { time } | Termination::Failed { time, .. } => {
                Some(*time)
            }
        }
    }
}

/// Properties of the prepared initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialReport {
    pub residuals: ConstraintResiduals,
    pub purity2: f64,
    pub purity4: f64,
    pub solver_iterations: usize,
    /// Fraction of the off-structure remainder kept by the projection.
    pub remainder_weight: f64,
    /// `‖ψ_projected - ψ_perturbed‖`
    pub projection_distance: f64,
    pub coefficients: Option<LinearSystemCoeffs>,
}

/// Control values evaluated without thresholds at the state where the run
/// stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalControls {
    pub t: f64,
    pub j12: f64,
    pub j34: f64,
    pub eps1: f64,
    pub eps4: f64,
    pub jt12: f64,
    pub jt34: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest `|‖ψ‖ - 1|` of an accepted step before renormalization.
    pub max_step_norm_drift: f64,
    /// Sum of `|‖ψ‖ - 1|` over accepted steps.
    pub total_norm_drift: f64,
    pub renormalizations_logged: usize,
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub version: String,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub initial: Option<InitialReport>,
    pub final_controls: Option<FinalControls>,
    pub stats: RunStats,
}

impl RunRecord {
    pub fn collapse_time(&self) -> Option<f64> {
        collapse_time(self)
    }
}

/// `t_c` of a collapsed run, `None` otherwise.
pub fn collapse_time(record: &RunRecord) -> Option<f64> {
    match record.termination {
        Termination::Collapsed { time, .. } => Some(time),
        _ => None,
    }
}

/// Right-hand side `-i H(controls(ψ)) ψ`.
pub struct ControlledSystem {
    hamiltonian: HamiltonianTerms,
    evaluator: MomentEvaluator,
    law: ControlLaw,
}

impl ControlledSystem {
    pub fn new(basis: Arc<FockBasis>, law: ControlLaw) -> Self {
        Self { hamiltonian: HamiltonianTerms::new(basis.clone()), evaluator: MomentEvaluator::new(basis), law }
    }

    pub fn law(&self) -> &ControlLaw {
        &self.law
    }

    pub fn evaluator(&self) -> &MomentEvaluator {
        &self.evaluator
    }

    pub fn hamiltonian(&self) -> &HamiltonianTerms {
        &self.hamiltonian
    }

    /// Controls for the state `psi` (need not be normalized).
    pub fn controls(&self, psi: &[Complex64]) -> Result<ControlParams> {
        self.law.evaluate(&self.evaluator.moments(psi))
    }
}

impl OdeSystem for ControlledSystem {
    fn rhs(&mut self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        let params = self.controls(y)?;
        self.hamiltonian.apply_into(&params, y, dy);
        for v in dy.iter_mut() {
            *v = Complex64::new(v.im, -v.re);
        }
        Ok(())
    }
}

/// One controlled integrator step of at most `dt`; returns the new state and
/// the controls at its start. Used for inspection and testing; [`run`] drives
/// the stepper directly.
pub fn step_controlled(
    state: &ManyBodyState,
    law: &ControlLaw,
    dt: f64,
    tolerance: f64,
) -> Result<(ManyBodyState, ControlParams)> {
    let system = ControlledSystem::new(state.basis().clone(), *law);
    let params = system.controls(state.amplitudes())?;
    let options = StepperOptions { tolerance, h_max: dt, ..Default::default() };
    let mut stepper = DormandPrince::new(system, 0.0, state.amplitudes().to_vec(), dt, options)?;
    while stepper.t() < dt {
        stepper.step(dt)?;
    }
    let mut out = ManyBodyState::new(state.basis().clone(), stepper.y().to_vec());
    out.normalize();
    Ok((out, params))
}

/// Prepared initial state together with its diagnostics.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub state: ManyBodyState,
    pub report: InitialReport,
}

/// Product state -> perturbation -> constraint projection.
pub fn prepare_initial_state(config: &RunConfig) -> Result<PreparedState> {
    config.validate()?;
    let target = config.target()?;
    let basis = Arc::new(FockBasis::new(config.n_total, crate::hamiltonian::WELLS)?);
    let seed = MeanFieldSeed::new(&target, config.n1_0, config.n4_0);
    let pure = prep::product_state(&seed, basis.clone())?;
    let spec = PerturbationSpec { complex: config.complex_perturbation, ..PerturbationSpec::new(config.d, config.seed) };
    let perturbed = prep::perturb(&pure, &spec);
    let options = SolverOptions { max_iterations: config.solver_iterations, tolerance: config.solver_tolerance };
    let projection = prep::project_constraints_with(&perturbed, &target, &options)?;

    let evaluator = MomentEvaluator::new(basis);
    let moments = evaluator.moments(projection.state.amplitudes());
    let derived = DerivedFirstOrder::from_moments(&moments)?;
    let distance = projection
        .state
        .amplitudes()
        .iter()
        .zip(perturbed.amplitudes())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let coefficients = tunnelling_controls(&moments, config.gamma, 0.0)
        .ok()
        .and_then(|(j12, j34)| coefficient_assembly(&moments, j12, config.j, j34, config.u).ok());
    Ok(PreparedState {
        state: projection.state,
        report: InitialReport {
            residuals: projection.residuals,
            purity2: derived.purity2,
            purity4: derived.purity4,
            solver_iterations: projection.iterations,
            remainder_weight: projection.remainder_weight,
            projection_distance: distance,
            coefficients,
        },
    })
}

fn sample_state(system: &ControlledSystem, t: f64, raw: &[Complex64], scratch: &mut [Vec<Complex64>; 2]) -> Result<Sample> {
    let evaluator = system.evaluator();
    let raw_moments = evaluator.moments(raw);
    let norm = raw_moments.norm_sqr.sqrt();
    let particles = raw_moments.n_total();
    let inv = 1.0 / norm;
    let psi: Vec<Complex64> = raw.iter().map(|c| c * inv).collect();
    let moments = evaluator.moments(&psi);
    let controls = system.law().evaluate(&moments)?;
    let first_order = DerivedFirstOrder::from_moments(&moments)?;
    let mut sigma2_inner = [[0.0; 2]; 9];
    for (slot, [k, l, m, n]) in sigma2_inner.iter_mut().zip(inner_two_particle_indices()) {
        let [left, right] = scratch;
        evaluator.apply_ladder(l, k, &psi, left);
        evaluator.apply_ladder(m, n, &psi, right);
        let v: Complex64 = left.iter().zip(right.iter()).map(|(a, b)| a.conj() * b).sum();
        *slot = [v.re, v.im];
    }
    Ok(Sample { t, controls, first_order, sigma2_inner, norm, particles })
}

fn final_controls(moments: &DensityMoments, law: &ControlLaw, t: f64) -> FinalControls {
    let jt12 = moments.current(0, 1);
    let jt34 = moments.current(2, 3);
    let (j12, j34) = tunnelling_controls(moments, law.gamma, 0.0).unwrap_or((f64::INFINITY, f64::INFINITY));
    let (eps1, eps4) = coefficient_assembly(moments, j12, law.j23, j34, law.u)
        .map(|c| c.solve(0.0).unwrap_or((f64::NAN, f64::NAN)))
        .unwrap_or((f64::NAN, f64::NAN));
    FinalControls { t, j12, j34, eps1, eps4, jt12, jt34 }
}

fn classify(err: Error, time: f64) -> Termination {
    match err {
        Error::CollapseDetected { reason } => Termination::Collapsed { time, reason },
        Error::StepUnderflow { .. } => Termination::Collapsed { time, reason: err.to_string() },
        Error::ControlDiverged { .. } => Termination::Collapsed { time, reason: err.to_string() },
        Error::PureStateDegeneracy { .. } => Termination::Degenerate { time },
        other => Termination::Failed { time, reason: other.to_string() },
    }
}

/// Prepares the initial state and integrates the controlled flow until
/// `t_max` or a termination event. Deterministic in the configuration.
pub fn run(config: &RunConfig) -> RunRecord {
    let mut record = run_record_shell(config);
    let prepared = match prepare_initial_state(config) {
        Ok(p) => p,
        Err(e) => {
            record.termination = classify(e, 0.0);
            return record;
        }
    };
    record.initial = Some(prepared.report.clone());
    integrate(config, prepared.state, &mut record);
    record
}

/// Integrates from a given initial state, appending samples to `record`.
pub fn run_from_state(config: &RunConfig, initial: ManyBodyState) -> RunRecord {
    let mut record = run_record_shell(config);
    integrate(config, initial, &mut record);
    record
}

fn run_record_shell(config: &RunConfig) -> RunRecord {
    RunRecord {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        samples: Vec::new(),
        termination: Termination::Completed,
        initial: None,
        final_controls: None,
        stats: RunStats {
            accepted_steps: 0,
            rejected_steps: 0,
            max_step_norm_drift: 0.0,
            total_norm_drift: 0.0,
            renormalizations_logged: 0,
        },
    }
}

fn integrate(config: &RunConfig, initial: ManyBodyState, record: &mut RunRecord) {
    let basis = initial.basis().clone();
    let dim = basis.dim();
    let system = ControlledSystem::new(basis, config.control_law());
    let law = *system.law();
    let mut scratch = [vec![Complex64::new(0.0, 0.0); dim], vec![Complex64::new(0.0, 0.0); dim]];

    let stop = |record: &mut RunRecord, err: Error, t: f64, psi: &[Complex64], system: &ControlledSystem| {
        let moments = system.evaluator().moments(psi);
        record.final_controls = Some(final_controls(&moments, &law, t));
        record.termination = classify(err, t);
    };

    match sample_state(&system, 0.0, initial.amplitudes(), &mut scratch) {
        Ok(s) => record.samples.push(s),
        Err(e) => {
            stop(record, e, 0.0, initial.amplitudes(), &system);
            return;
        }
    }
    if config.t_max <= 0.0 {
        return;
    }

    let options = StepperOptions { tolerance: config.tolerance, h_max: config.sample_interval.max(config.dt_initial), ..Default::default() };
    let mut stepper = match DormandPrince::new(system, 0.0, initial.into_amplitudes(), config.dt_initial, options) {
        Ok(s) => s,
        Err(e) => {
            record.termination = classify(e, 0.0);
            return;
        }
    };
    let mut interp = vec![Complex64::new(0.0, 0.0); dim];
    let mut next_index: u64 = 1;

    while stepper.t() < config.t_max {
        let info = match stepper.step(config.t_max) {
            Ok(info) => info,
            Err(e) => {
                let t = stepper.t();
                let psi = stepper.y().to_vec();
                stop(record, e, t, &psi, stepper.system());
                return;
            }
        };
        record.stats.accepted_steps += 1;
        record.stats.rejected_steps += info.rejected;

        // samples inside (t_start, t_end], before renormalizing the endpoint
        loop {
            let ts = next_index as f64 * config.sample_interval;
            if ts > stepper.t() * (1.0 + 1e-15) || ts > config.t_max * (1.0 + 1e-12) {
                break;
            }
            let ts = ts.min(stepper.t());
            stepper.interpolate(ts, &mut interp);
            match sample_state(stepper.system(), ts, &interp, &mut scratch) {
                Ok(s) => record.samples.push(s),
                Err(e) => {
                    stop(record, e, ts, &interp, stepper.system());
                    return;
                }
            }
            next_index += 1;
        }

        let norm = stepper.y().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let drift = (norm - 1.0).abs();
        record.stats.max_step_norm_drift = record.stats.max_step_norm_drift.max(drift);
        record.stats.total_norm_drift += drift;
        if drift > 1e-12 {
            record.stats.renormalizations_logged += 1;
            log::debug!("renormalizing at t = {}: norm drift {drift:e}", stepper.t());
        }
        stepper.rescale(1.0 / norm);
        let budget = config.norm_drift_rate * stepper.t().max(1.0);
        if record.stats.total_norm_drift > budget {
            let t = stepper.t();
            record.termination = Termination::Failed {
                time: t,
                reason: Error::NormDrift { time: t, drift: record.stats.total_norm_drift }.to_string(),
            };
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_lists_every_violation() {
        let config = RunConfig { gamma: 1.5, j: 1.0, n1_0: 0.0, ..Default::default() };
        let Err(Error::InvalidConfig(errors)) = config.validate() else { panic!("expected invalid config") };
        assert!(errors.iter().any(|e| e.contains("gamma exceeds j")));
        assert!(errors.iter().any(|e| e.contains("does not equal n_total")));
        assert_eq!(errors.len(), 2);
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_duration_run_has_one_sample() {
        let config = RunConfig { n_total: 6, n: 1.0, n1_0: 2.0, n4_0: 2.0, t_max: 0.0, solver_tolerance: 0.1, ..Default::default() };
        let record = run(&config);
        assert_eq!(record.termination, Termination::Completed, "{:?}", record.initial);
        assert_eq!(record.samples.len(), 1);
        assert_eq!(record.samples[0].t, 0.0);
    }

    #[test]
    fn pure_state_is_degenerate_at_start() {
        let config = RunConfig { n_total: 6, n: 1.0, n1_0: 2.0, n4_0: 2.0, d: 0.0, ..Default::default() };
        let record = run(&config);
        assert_eq!(record.termination, Termination::Degenerate { time: 0.0 });
        assert!(record.samples.is_empty());
        assert_eq!(collapse_time(&record), None);
    }
}

