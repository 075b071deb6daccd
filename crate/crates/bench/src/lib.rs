//! Shared inputs for the kernel benchmarks.

use fourwell::dynamics::{prepare_initial_state, ControlledSystem};
use fourwell::{ManyBodyState, RunConfig};

/// Reference-size state (N_tot = 22, D = 2300) whose controls are finite.
pub fn reference_state() -> (RunConfig, ManyBodyState) {
    let config = RunConfig { solver_tolerance: 0.1, ..RunConfig::default() };
    let prepared = prepare_initial_state(&config).expect("reference state prepares");
    (config, prepared.state)
}

pub fn controlled_system(config: &RunConfig, state: &ManyBodyState) -> ControlledSystem {
    ControlledSystem::new(state.basis().clone(), config.control_law())
}
