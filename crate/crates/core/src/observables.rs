//! Single- and two-particle density-matrix elements, derived first-order
//! quantities, purity, and the first order of the BBGKY hierarchy.
//!
//! Conventions: `σ_kl = <a†_k a_l>`, `σ_klmn = <a†_k a_l a†_m a_n>`,
//! reduced current `j̃_kl = 2 Im σ_kl`, correlation `c_kl = 2 Re σ_kl`.
//! Wells are 0-based.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{FockBasis, ManyBodyState};
use crate::error::{Error, Result};
use crate::hamiltonian::{ControlParams, WELLS};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Moments of one state: the full single-particle matrix and the two-particle
/// elements `σ_kkkl` and `σ_klll` that enter the first-order equation of
/// motion.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMoments {
    pub sigma1: Matrix4<Complex64>,
    kkkl: Matrix4<Complex64>,
    klll: Matrix4<Complex64>,
    /// `<ψ|ψ>` of the state the moments were taken from. All moments scale
    /// with it.
    pub norm_sqr: f64,
}

impl DensityMoments {
    /// Builds moments directly from matrices; used for hand-built inputs.
    pub fn from_parts(sigma1: Matrix4<Complex64>, kkkl: Matrix4<Complex64>, klll: Matrix4<Complex64>) -> Self {
        Self { sigma1, kkkl, klll, norm_sqr: 1.0 }
    }

    /// Moments of a pure single-particle state `ψ` (`Σ|ψ|² = N`) condensed
    /// into a product state, using the closed forms
    /// `σ_kl = ψ*_k ψ_l` and
    /// `σ_klmn = (N-1)/N ψ*_k ψ_l ψ*_m ψ_n + δ_lm ψ*_k ψ_n`.
    pub fn product_state(psi: &[Complex64; WELLS]) -> Self {
        let n: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        let f = (n - 1.0) / n;
        let sigma1 = Matrix4::from_fn(|k, l| psi[k].conj() * psi[l]);
        let kkkl = Matrix4::from_fn(|k, l| f * sigma1[(k, k)] * sigma1[(k, l)] + sigma1[(k, l)]);
        let klll = Matrix4::from_fn(|k, l| f * sigma1[(k, l)] * sigma1[(l, l)] + sigma1[(k, l)]);
        Self { sigma1, kkkl, klll, norm_sqr: 1.0 }
    }

    pub fn n_total(&self) -> f64 {
        self.sigma1.trace().re
    }

    pub fn sigma(&self, k: usize, l: usize) -> Complex64 {
        self.sigma1[(k, l)]
    }

    /// Occupation `σ_kk`.
    pub fn occupation(&self, k: usize) -> f64 {
        self.sigma1[(k, k)].re
    }

    /// `j̃_kl = 2 Im σ_kl`
    pub fn current(&self, k: usize, l: usize) -> f64 {
        2.0 * self.sigma1[(k, l)].im
    }

    /// `c_kl = 2 Re σ_kl`
    pub fn correlation(&self, k: usize, l: usize) -> f64 {
        2.0 * self.sigma1[(k, l)].re
    }

    /// `σ_kkkl = <n_k a†_k a_l>`
    pub fn sigma_kkkl(&self, k: usize, l: usize) -> Complex64 {
        self.kkkl[(k, l)]
    }

    /// `σ_klll = <a†_k a_l n_l>`
    pub fn sigma_klll(&self, k: usize, l: usize) -> Complex64 {
        self.klll[(k, l)]
    }

    /// Two-particle element if it belongs to the stored index set.
    pub fn sigma2(&self, k: usize, l: usize, m: usize, n: usize) -> Option<Complex64> {
        if k == l && l == m {
            Some(self.kkkl[(k, n)])
        } else if l == m && m == n {
            Some(self.klll[(k, l)])
        } else {
            None
        }
    }
}

/// The `(k, l, m, n)` index set used by the first-order equation of motion.
pub fn first_order_index_set() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for k in 0..WELLS {
        for l in 0..WELLS {
            out.push([k, k, k, l]);
            if k != l {
                out.push([k, l, l, l]);
            }
        }
    }
    out
}

/// `(target, source, coefficient)` triples of one ladder operator.
type HopEntries = Vec<(usize, usize, f64)>;

/// Precomputed ladder tables for evaluating moments over a fixed basis.
#[derive(Debug, Clone)]
pub struct MomentEvaluator {
    basis: Arc<FockBasis>,
    /// Entries of `a†_k a_l` for every `k < l`.
    pairs: Vec<((usize, usize), HopEntries)>,
    occupations: Vec<f64>,
}

impl MomentEvaluator {
    pub fn new(basis: Arc<FockBasis>) -> Self {
        assert_eq!(basis.wells(), WELLS, "moment evaluation is specialised to four wells");
        let mut pairs = Vec::new();
        for k in 0..WELLS {
            for l in k + 1..WELLS {
                pairs.push(((k, l), basis.hop_entries(k, l)));
            }
        }
        let occupations = basis.states().flat_map(|s| s.iter().map(|&n| f64::from(n))).collect();
        Self { basis, pairs, occupations }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn occupation(&self, index: usize, k: usize) -> f64 {
        self.occupations[index * WELLS + k]
    }

    /// Entries of `a†_k a_l` for `k < l`.
    pub fn pair_entries(&self, k: usize, l: usize) -> &[(usize, usize, f64)] {
        assert!(k < l);
        self.pairs.iter().find(|(kl, _)| *kl == (k, l)).map(|(_, e)| e.as_slice()).expect("valid pair")
    }

    /// `A |psi>` for `A = a†_k a_l` (any `k`, `l`), written into `out`.
    pub fn apply_ladder(&self, k: usize, l: usize, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = ZERO);
        if k == l {
            for (i, (o, p)) in out.iter_mut().zip(psi).enumerate() {
                *o = p * self.occupation(i, k);
            }
        } else if k < l {
            for &(s, t, f) in self.pair_entries(k, l) {
                out[t] += psi[s] * f;
            }
        } else {
            // a†_k a_l = (a†_l a_k)†: entries with source and target swapped
            for &(s, t, f) in self.pair_entries(l, k) {
                out[s] += psi[t] * f;
            }
        }
    }

    /// Moments of an amplitude vector. The vector need not be normalized;
    /// every moment then carries the factor `<ψ|ψ>`.
    pub fn moments(&self, psi: &[Complex64]) -> DensityMoments {
        debug_assert_eq!(psi.len(), self.basis.dim());
        let mut sigma1 = Matrix4::from_element(ZERO);
        let mut kkkl = Matrix4::from_element(ZERO);
        let mut klll = Matrix4::from_element(ZERO);

        let mut diag = [0.0f64; WELLS];
        let mut diag_sq = [0.0f64; WELLS];
        let mut norm_sqr = 0.0;
        for (i, p) in psi.iter().enumerate() {
            let w = p.norm_sqr();
            norm_sqr += w;
            for k in 0..WELLS {
                let n = self.occupation(i, k);
                diag[k] += w * n;
                diag_sq[k] += w * n * n;
            }
        }
        for k in 0..WELLS {
            sigma1[(k, k)] = Complex64::new(diag[k], 0.0);
            kkkl[(k, k)] = Complex64::new(diag_sq[k], 0.0);
            klll[(k, k)] = Complex64::new(diag_sq[k], 0.0);
        }

        for ((k, l), entries) in &self.pairs {
            let (k, l) = (*k, *l);
            let mut s_kl = ZERO;
            let mut s_kkkl = ZERO;
            let mut s_klll = ZERO;
            for &(s, t, f) in entries {
                // <t| a†_k a_l |s> = f
                let bilinear = psi[t].conj() * psi[s] * f;
                s_kl += bilinear;
                s_kkkl += bilinear * self.occupation(t, k);
                s_klll += bilinear * self.occupation(s, l);
            }
            sigma1[(k, l)] = s_kl;
            sigma1[(l, k)] = s_kl.conj();
            kkkl[(k, l)] = s_kkkl;
            klll[(k, l)] = s_klll;
            // reversed pair: <n_l a†_l a_k> = conj(<a†_k a_l n_l>)
            kkkl[(l, k)] = s_klll.conj();
            klll[(l, k)] = s_kkkl.conj();
        }

        DensityMoments { sigma1, kkkl, klll, norm_sqr }
    }
}

/// Single-particle density matrix of a state.
pub fn single_particle_matrix(state: &ManyBodyState) -> Matrix4<Complex64> {
    MomentEvaluator::new(state.basis().clone()).moments(state.amplitudes()).sigma1
}

/// `σ_klmn = <ψ| a†_k a_l a†_m a_n |ψ>` for each requested index tuple,
/// evaluated as `<(a†_l a_k) ψ | (a†_m a_n) ψ>`. Works for any well count.
pub fn two_particle_elements(state: &ManyBodyState, index_set: &[[usize; 4]]) -> Vec<Complex64> {
    let ladder = |k: usize, l: usize| {
        if k == l {
            state.apply_number(k)
        } else {
            state.apply_hop(k, l)
        }
    };
    index_set
        .iter()
        .map(|&[k, l, m, n]| ladder(l, k).inner(&ladder(m, n)))
        .collect()
}

/// Every `σ_klmn`, row-major over `(k, l, m, n)`; for diagnostics.
pub fn full_two_particle_tensor(state: &ManyBodyState) -> Vec<Complex64> {
    let m = state.basis().wells();
    let mut index_set = Vec::with_capacity(m.pow(4));
    for k in 0..m {
        for l in 0..m {
            for p in 0..m {
                for q in 0..m {
                    index_set.push([k, l, p, q]);
                }
            }
        }
    }
    two_particle_elements(state, &index_set)
}

/// The nine inner-well two-particle elements reported alongside runs:
/// `σ_klmn` with `(k, m)` and `(l, n)` each ranging over the ordered inner
/// pairs (2,2), (2,3), (3,3) (1-based). Other inner-well elements follow from
/// the bosonic commutator and Hermitian conjugation.
pub fn inner_two_particle_indices() -> [[usize; 4]; 9] {
    let pairs = [(1, 1), (1, 2), (2, 2)];
    let mut out = [[0; 4]; 9];
    let mut i = 0;
    for &(k, m) in &pairs {
        for &(l, n) in &pairs {
            out[i] = [k, l, m, n];
            i += 1;
        }
    }
    out
}

/// Scaled purity `P = (M tr(ρ²) - 1) / (M - 1)` of the single-particle matrix
/// restricted to `wells` and normalized to unit trace.
pub fn purity(sigma1: &Matrix4<Complex64>, wells: &[usize]) -> Result<f64> {
    let block = DMatrix::from_fn(wells.len(), wells.len(), |a, b| sigma1[(wells[a], wells[b])]);
    purity_of(&block)
}

/// Scaled purity of an arbitrary square single-particle block.
pub fn purity_of(block: &DMatrix<Complex64>) -> Result<f64> {
    let m = block.nrows();
    assert!(m >= 2 && block.is_square(), "purity needs a square block of at least two wells");
    let trace = block.trace().re;
    if !(trace.abs() > f64::MIN_POSITIVE) {
        return Err(Error::EmptySubset);
    }
    // tr(ρ²) = Σ_ab ρ_ab ρ_ba = Σ_ab |ρ_ab|² for Hermitian ρ
    let tr_sq: f64 = block.iter().map(|c| c.norm_sqr()).sum::<f64>() / (trace * trace);
    let m = m as f64;
    Ok((m * tr_sq - 1.0) / (m - 1.0))
}

/// Abbreviation `Z_kl` of the first-order equation of motion,
///
/// `Z_kl = J_{k-1,k} σ_{k-1,l} + J_{k+1,k} σ_{k+1,l} - J_{l,l-1} σ_{k,l-1}
///        - J_{l,l+1} σ_{k,l+1} - U (σ_kkkl - σ_kl) + U (σ_klll - σ_kl)`,
///
/// with rates to the absent wells 0 and 5 equal to zero.
pub fn z_matrix(moments: &DensityMoments, params: &ControlParams) -> Matrix4<Complex64> {
    let s = &moments.sigma1;
    let u = params.u;
    Matrix4::from_fn(|k, l| {
        let mut z = ZERO;
        if k > 0 {
            z += s[(k - 1, l)] * params.tunnelling(k - 1, k);
        }
        if k + 1 < WELLS {
            z += s[(k + 1, l)] * params.tunnelling(k + 1, k);
        }
        if l > 0 {
            z -= s[(k, l - 1)] * params.tunnelling(l, l - 1);
        }
        if l + 1 < WELLS {
            z -= s[(k, l + 1)] * params.tunnelling(l, l + 1);
        }
        z - (moments.kkkl[(k, l)] - s[(k, l)]) * u + (moments.klll[(k, l)] - s[(k, l)]) * u
    })
}

/// Time derivative of the single-particle matrix from
/// `i ∂_t σ_kl = Z_kl - (ε_k - ε_l) σ_kl`.
pub fn bbgky_first_order_rhs(moments: &DensityMoments, params: &ControlParams) -> Matrix4<Complex64> {
    let z = z_matrix(moments, params);
    let i = Complex64::new(0.0, 1.0);
    Matrix4::from_fn(|k, l| {
        let rhs = z[(k, l)] - moments.sigma1[(k, l)] * (params.onsite(k) - params.onsite(l));
        -i * rhs
    })
}

/// Real first-order quantities reported per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedFirstOrder {
    pub occupations: [f64; WELLS],
    /// `j̃_kl` for every ordered pair.
    pub currents: [[f64; WELLS]; WELLS],
    /// `c_kl` for every ordered pair.
    pub correlations: [[f64; WELLS]; WELLS],
    /// Purity over the inner wells 2 and 3.
    pub purity2: f64,
    /// Purity over all four wells.
    pub purity4: f64,
}

impl DerivedFirstOrder {
    pub fn from_moments(moments: &DensityMoments) -> Result<Self> {
        let s = &moments.sigma1;
        let mut currents = [[0.0; WELLS]; WELLS];
        let mut correlations = [[0.0; WELLS]; WELLS];
        for k in 0..WELLS {
            for l in 0..WELLS {
                currents[k][l] = 2.0 * s[(k, l)].im;
                correlations[k][l] = 2.0 * s[(k, l)].re;
            }
        }
        Ok(Self {
            occupations: std::array::from_fn(|k| s[(k, k)].re),
            currents,
            correlations,
            purity2: purity(s, &[1, 2])?,
            purity4: purity(s, &[0, 1, 2, 3])?,
        })
    }
}
