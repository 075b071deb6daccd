//! Time-dependent Bose-Hubbard Hamiltonian of the four-well chain,
//!
//! `H = -Σ_<m,m'> J_mm' a†_m a_m' + U/2 Σ_m n_m (n_m - 1) + Σ_m ε_m n_m`,
//!
//! with nearest-neighbour bonds (1,2), (2,3), (3,4). Wells are indexed from 0
//! in code. The sparsity pattern is built once; the controls are substituted
//! on every application.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{FockBasis, ManyBodyState};
use crate::error::{Error, Result};

pub const WELLS: usize = 4;

/// Bonds of the chain as 0-based well pairs.
pub const BONDS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 3)];

/// Controlled and fixed parameters of the four-well Hamiltonian. The inner
/// onsite energies are fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub j12: f64,
    pub j23: f64,
    pub j34: f64,
    pub eps1: f64,
    pub eps4: f64,
    pub u: f64,
}

impl ControlParams {
    /// Fixed part only: inner tunnelling `j23` and interaction `u`; every
    /// control zero.
    pub fn fixed(j23: f64, u: f64) -> Self {
        Self { j12: 0.0, j23, j34: 0.0, eps1: 0.0, eps4: 0.0, u }
    }

    /// Tunnelling rate between 0-based wells `k` and `l`; zero for
    /// non-neighbours and for the absent boundary wells.
    pub fn tunnelling(&self, k: usize, l: usize) -> f64 {
        match (k.min(l), k.max(l)) {
            (0, 1) => self.j12,
            (1, 2) => self.j23,
            (2, 3) => self.j34,
            _ => 0.0,
        }
    }

    /// Onsite energy of 0-based well `k`.
    pub fn onsite(&self, k: usize) -> f64 {
        match k {
            0 => self.eps1,
            3 => self.eps4,
            _ => 0.0,
        }
    }

    /// Rejects non-finite values.
    pub fn check_finite(&self) -> Result<()> {
        let fields = [
            ("j12", self.j12),
            ("j23", self.j23),
            ("j34", self.j34),
            ("eps1", self.eps1),
            ("eps4", self.eps4),
            ("u", self.u),
        ];
        match fields.into_iter().find(|(_, v)| !v.is_finite()) {
            Some((name, value)) => Err(Error::ControlDiverged { name, value }),
            None => Ok(()),
        }
    }
}

/// `(target, source, coefficient)` triples of one ladder operator.
type HopEntries = Vec<(usize, usize, f64)>;

/// Cached structure of the four-well Hamiltonian over a fixed basis.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    basis: Arc<FockBasis>,
    /// For each bond, the entries of `a†_k a_l` and of `a†_l a_k`.
    hops: Vec<((usize, usize), HopEntries)>,
    /// Per basis state: occupations as floats, row-major `dim x 4`.
    occupations: Vec<f64>,
    /// Per basis state: `Σ_m n_m (n_m - 1) / 2`.
    pair_counts: Vec<f64>,
}

impl HamiltonianTerms {
    pub fn new(basis: Arc<FockBasis>) -> Self {
        assert_eq!(basis.wells(), WELLS, "the four-well Hamiltonian needs a four-well basis");
        let hops = BONDS
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .map(|(k, l)| ((k, l), basis.hop_entries(k, l)))
            .collect();
        let occupations = basis.states().flat_map(|s| s.iter().map(|&n| f64::from(n))).collect();
        let pair_counts = basis
            .states()
            .map(|s| s.iter().map(|&n| f64::from(n) * (f64::from(n) - 1.0) / 2.0).sum())
            .collect();
        Self { basis, hops, occupations, pair_counts }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Entries of `a†_k a_l` for a bond direction, if `(k, l)` is a bond.
    pub fn hop(&self, k: usize, l: usize) -> Option<&[(usize, usize, f64)]> {
        self.hops.iter().find(|(kl, _)| *kl == (k, l)).map(|(_, e)| e.as_slice())
    }

    /// Occupation of well `k` in basis state `index`.
    pub fn occupation(&self, index: usize, k: usize) -> f64 {
        self.occupations[index * WELLS + k]
    }

    /// Writes `H psi` into `out`. Summation order is fixed.
    pub fn apply_into(&self, params: &ControlParams, psi: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(psi.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        let onsite = [params.onsite(0), params.onsite(1), params.onsite(2), params.onsite(3)];
        for (i, (o, p)) in out.iter_mut().zip(psi).enumerate() {
            let occ = &self.occupations[i * WELLS..(i + 1) * WELLS];
            let diag = params.u * self.pair_counts[i]
                + onsite[0] * occ[0]
                + onsite[1] * occ[1]
                + onsite[2] * occ[2]
                + onsite[3] * occ[3];
            *o = p * diag;
        }
        for ((k, l), entries) in &self.hops {
            let j = params.tunnelling(*k, *l);
            if j == 0.0 {
                continue;
            }
            for &(source, target, factor) in entries {
                out[target] -= psi[source] * (j * factor);
            }
        }
    }

    /// `H(params) |state>`.
    pub fn apply(&self, state: &ManyBodyState, params: &ControlParams) -> Result<ManyBodyState> {
        params.check_finite()?;
        let mut out = ManyBodyState::zeros(self.basis.clone());
        self.apply_into(params, state.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// `<state|H|state>`; the imaginary part is checked to vanish.
    pub fn expectation(&self, state: &ManyBodyState, params: &ControlParams) -> Result<f64> {
        let h_psi = self.apply(state, params)?;
        let value = state.inner(&h_psi);
        let scale = value.re.abs().max(1.0);
        debug_assert!(value.im.abs() < 1e-10 * scale, "non-real energy {value}");
        Ok(value.re)
    }
}

/// One-shot `H(params) |state>` building the structure on the fly.
pub fn apply_hamiltonian(state: &ManyBodyState, params: &ControlParams) -> Result<ManyBodyState> {
    HamiltonianTerms::new(state.basis().clone()).apply(state, params)
}

/// One-shot `<state|H|state>`.
pub fn expectation(state: &ManyBodyState, params: &ControlParams) -> Result<f64> {
    HamiltonianTerms::new(state.basis().clone()).expectation(state, params)
}
