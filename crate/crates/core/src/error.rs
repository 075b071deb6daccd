use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Hilbert-space dimension for {n_total} bosons in {wells} wells exceeds the cap of {cap}")]
    Capacity { n_total: usize, wells: usize, cap: usize },

    #[error("invalid basis request: {0}")]
    InvalidBasis(String),

    #[error("non-finite control parameter `{name}` = {value}")]
    ControlDiverged { name: &'static str, value: f64 },

    #[error("well subset has zero occupation; purity undefined")]
    EmptySubset,

    #[error("collapse detected: {reason}")]
    CollapseDetected { reason: String },

    #[error("onsite-energy system is degenerate (|det| = {det:e}, scale = {scale:e})")]
    PureStateDegeneracy { det: f64, scale: f64 },

    #[error("gain/loss rate {gamma} exceeds tunnelling rate {j}: PT symmetry is broken")]
    BrokenPtRegime { gamma: f64, j: f64 },

    #[error("mean-field seed carries {found} particles, expected {expected}")]
    SeedNorm { expected: f64, found: f64 },

    #[error("constraint solver stopped after {iterations} iterations with max residual {max_residual:e}")]
    ConstraintSolve {
        iterations: usize,
        max_residual: f64,
        residuals: [f64; 5],
    },

    #[error("norm drift {drift:e} exceeds the allowed budget at t = {time}")]
    NormDrift { time: f64, drift: f64 },

    #[error("integrator step size underflow at t = {time} (dt = {dt:e})")]
    StepUnderflow { time: f64, dt: f64 },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
