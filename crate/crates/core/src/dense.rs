//! Dense reference operators for small bases.
//!
//! Built from occupation tuples alone, independently of the matrix-free
//! kernels, and used to cross-check them. Memory grows as `D²`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::FockBasis;
use crate::hamiltonian::{ControlParams, BONDS, WELLS};

/// `a†_k a_l` as a dense matrix.
pub fn ladder(basis: &FockBasis, k: usize, l: usize) -> DMatrix<Complex64> {
    let d = basis.dim();
    let mut m = DMatrix::zeros(d, d);
    for col in 0..d {
        let mut occ = basis.state(col).to_vec();
        if occ[l] == 0 {
            continue;
        }
        let mut amp = (occ[l] as f64).sqrt();
        occ[l] -= 1;
        amp *= (occ[k] as f64 + 1.0).sqrt();
        occ[k] += 1;
        let row = basis.index_of(&occ).expect("particle number is conserved");
        m[(row, col)] += Complex64::new(amp, 0.0);
    }
    m
}

/// The four-well Hamiltonian as a dense matrix.
pub fn hamiltonian(basis: &FockBasis, p: &ControlParams) -> DMatrix<Complex64> {
    let d = basis.dim();
    let mut h = DMatrix::zeros(d, d);
    for &(a, b) in &BONDS {
        h -= (ladder(basis, a, b) + ladder(basis, b, a)) * Complex64::new(p.tunnelling(a, b), 0.0);
    }
    let id = DMatrix::<Complex64>::identity(d, d);
    for k in 0..WELLS {
        let n = ladder(basis, k, k);
        h += &n * (&n - &id) * Complex64::new(0.5 * p.u, 0.0) + n * Complex64::new(p.onsite(k), 0.0);
    }
    h
}

/// `exp(-i H t) ψ`
pub fn propagate(h: &DMatrix<Complex64>, psi: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
    (h * Complex64::new(0.0, -t)).exp() * psi
}

/// `<ψ|A|ψ>`
pub fn expectation(op: &DMatrix<Complex64>, psi: &DVector<Complex64>) -> Complex64 {
    psi.dotc(&(op * psi))
}
