//! Occupation-number basis for `N` bosons in `M` wells and the ladder-operator
//! monomials acting on amplitude vectors over it.
//!
//! States are ordered lexicographically descending: `(N,0,..,0)` is index 0 and
//! `(0,..,0,N)` is the last index. Indices are computed by combinatorial ranking
//! so no hashing is needed for the index map.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `ways[r][m]`: number of ways to place `r` bosons in `m` wells.
fn ways_table(n_total: usize, wells: usize) -> Vec<Vec<usize>> {
    let mut ways = vec![vec![0usize; wells + 2]; n_total + 1];
    for (r, row) in ways.iter_mut().enumerate() {
        row[0] = usize::from(r == 0);
    }
    for m in 1..wells + 2 {
        for r in 0..=n_total {
            // ways(r, m) = sum_{v=0..r} ways(r - v, m - 1)
            let mut acc = 0usize;
            for v in 0..=r {
                acc = acc.saturating_add(ways[r - v][m - 1]);
            }
            ways[r][m] = acc;
        }
    }
    ways
}

/// Hilbert-space dimension `binomial(n_total + wells - 1, n_total)`, or `None`
/// on overflow.
pub fn dimension(n_total: usize, wells: usize) -> Option<usize> {
    if wells == 0 {
        return Some(usize::from(n_total == 0));
    }
    // binomial(n + m - 1, m - 1) evaluated incrementally; exact at every step.
    let mut acc: u128 = 1;
    for i in 1..wells as u128 {
        acc = acc.checked_mul(n_total as u128 + i)? / i;
    }
    usize::try_from(acc).ok()
}

/// Immutable Fock basis with a bijective index map.
#[derive(Clone, PartialEq, Eq)]
pub struct FockBasis {
    n_total: usize,
    wells: usize,
    occupations: Vec<u32>,
    ways: Vec<Vec<usize>>,
}

impl FockBasis {
    pub const DEFAULT_MAX_DIM: usize = 5_000_000;

    pub fn new(n_total: usize, wells: usize) -> Result<Self> {
        Self::with_max_dim(n_total, wells, Self::DEFAULT_MAX_DIM)
    }

    pub fn with_max_dim(n_total: usize, wells: usize, max_dim: usize) -> Result<Self> {
        if n_total < 1 {
            return Err(Error::InvalidBasis("need at least one particle".into()));
        }
        if wells < 2 {
            return Err(Error::InvalidBasis("need at least two wells".into()));
        }
        let cap_err = Error::Capacity { n_total, wells, cap: max_dim };
        let dim = dimension(n_total, wells).ok_or_else(|| cap_err.clone())?;
        if dim > max_dim {
            return Err(cap_err);
        }

        let mut occupations = Vec::with_capacity(dim * wells);
        let mut current = vec![0u32; wells];
        enumerate(&mut current, 0, n_total, &mut occupations);
        debug_assert_eq!(occupations.len(), dim * wells);

        Ok(Self { n_total, wells, occupations, ways: ways_table(n_total, wells) })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn wells(&self) -> usize {
        self.wells
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.wells
    }

    /// Occupation tuple of basis vector `index`.
    pub fn state(&self, index: usize) -> &[u32] {
        &self.occupations[index * self.wells..(index + 1) * self.wells]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.occupations.chunks_exact(self.wells)
    }

    /// Dense index of an occupation tuple, or `None` if it does not belong to
    /// this basis.
    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        if occupation.len() != self.wells {
            return None;
        }
        let total: usize = occupation.iter().map(|&n| n as usize).sum();
        if total != self.n_total {
            return None;
        }
        Some(self.rank(occupation))
    }

    fn rank(&self, occupation: &[u32]) -> usize {
        let m = self.wells;
        let mut remaining = self.n_total;
        let mut rank = 0;
        for (i, &n) in occupation[..m - 1].iter().enumerate() {
            let n = n as usize;
            if n < remaining {
                // tuples with a larger value at position i come first
                rank += self.ways[remaining - n - 1][m - i];
            }
            remaining -= n;
        }
        rank
    }

    /// Sparse entries `(source, target, factor)` of `a†_k a_l` with `k != l`:
    /// `a†_k a_l |s> = factor |t>`.
    pub fn hop_entries(&self, k: usize, l: usize) -> Vec<(usize, usize, f64)> {
        assert!(k < self.wells && l < self.wells, "well index out of range");
        assert_ne!(k, l, "hop requires distinct wells");
        let mut scratch = vec![0u32; self.wells];
        let mut out = Vec::new();
        for (source, occ) in self.states().enumerate() {
            let n_l = occ[l];
            if n_l == 0 {
                continue;
            }
            let n_k = occ[k];
            scratch.copy_from_slice(occ);
            scratch[k] += 1;
            scratch[l] -= 1;
            let target = self.rank(&scratch);
            out.push((source, target, (f64::from(n_k + 1) * f64::from(n_l)).sqrt()));
        }
        out
    }
}

fn enumerate(current: &mut [u32], pos: usize, remaining: usize, out: &mut Vec<u32>) {
    let m = current.len();
    if pos == m - 1 {
        current[pos] = remaining as u32;
        out.extend_from_slice(current);
        return;
    }
    for n in (0..=remaining).rev() {
        current[pos] = n as u32;
        enumerate(current, pos + 1, remaining - n, out);
    }
}

impl fmt::Debug for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockBasis")
            .field("n_total", &self.n_total)
            .field("wells", &self.wells)
            .field("dim", &self.dim())
            .finish()
    }
}

/// Complex amplitude vector over a shared Fock basis.
///
/// Operator applications return raw (unnormalized) vectors; callers normalize
/// where a physical state is required.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyState {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex64>,
}

impl ManyBodyState {
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Self {
        assert_eq!(amplitudes.len(), basis.dim(), "amplitude vector length must equal basis dimension");
        Self { basis, amplitudes }
    }

    pub fn zeros(basis: Arc<FockBasis>) -> Self {
        let dim = basis.dim();
        Self::new(basis, vec![Complex64::new(0.0, 0.0); dim])
    }

    /// Single Fock vector `|n_1, .., n_M>`.
    pub fn fock(basis: Arc<FockBasis>, occupation: &[u32]) -> Option<Self> {
        let idx = basis.index_of(occupation)?;
        let mut state = Self::zeros(basis);
        state.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Some(state)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Scales to unit norm and returns the norm before scaling.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            self.amplitudes.iter_mut().for_each(|c| *c *= inv);
        }
        norm
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Self) -> Complex64 {
        debug_assert!(Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis);
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// `a†_k a_l |self>` for `k != l`.
    pub fn apply_hop(&self, k: usize, l: usize) -> Self {
        let wells = self.basis.wells();
        assert!(k < wells && l < wells, "well index out of range");
        assert_ne!(k, l, "hop requires distinct wells; use apply_number for k == l");
        let mut out = Self::zeros(self.basis.clone());
        let mut scratch = vec![0u32; wells];
        for (source, occ) in self.basis.states().enumerate() {
            let amp = self.amplitudes[source];
            let n_l = occ[l];
            if n_l == 0 || amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            scratch.copy_from_slice(occ);
            scratch[k] += 1;
            scratch[l] -= 1;
            let target = self.basis.rank(&scratch);
            out.amplitudes[target] += amp * (f64::from(occ[k] + 1) * f64::from(n_l)).sqrt();
        }
        out
    }

    /// `n_k |self>`.
    pub fn apply_number(&self, k: usize) -> Self {
        assert!(k < self.basis.wells(), "well index out of range");
        let amplitudes = self
            .basis
            .states()
            .zip(&self.amplitudes)
            .map(|(occ, a)| a * f64::from(occ[k]))
            .collect();
        Self { basis: self.basis.clone(), amplitudes }
    }
}
