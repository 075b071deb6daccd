//! Feedback law for the four controls `J12, J34, ε1, ε4`.
//!
//! The tunnelling rates keep the inner occupations on the two-mode flow:
//! `J12 = 2γ n2 / j̃12`, `J34 = 2γ n3 / j̃34`. The onsite energies keep the
//! reservoir coupling `-J12 σ13 + J34 σ24` at zero for all times; its time
//! derivative is linear in `(ε1, ε4)` and splits into the real system
//!
//! ```text
//! α_r ε1 + β_r ε4 = Ω_r
//! α_i ε1 + β_i ε4 = Ω_i
//! ```
//!
//! whose coefficients are assembled below. For product states the system is
//! rank deficient and no unique onsite energies exist.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ControlParams;
use crate::observables::{z_matrix, DensityMoments};

// 0-based wells
const W1: usize = 0;
const W2: usize = 1;
const W3: usize = 2;
const W4: usize = 3;

/// Numerical cutoffs of the feedback loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Collapse when `|j̃12|` or `|j̃34|` drops below this times `N_tot`.
    pub collapse_current: f64,
    /// Collapse when any control magnitude exceeds this times the inner
    /// tunnelling rate.
    pub control_limit: f64,
    /// Degeneracy when `|det|` is below this times the coefficient scale.
    pub degeneracy: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { collapse_current: 1e-6, control_limit: 1e3, degeneracy: 1e-10 }
    }
}

/// Real coefficients of the onsite-energy system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSystemCoeffs {
    pub alpha_r: f64,
    pub beta_r: f64,
    pub omega_r: f64,
    pub alpha_i: f64,
    pub beta_i: f64,
    pub omega_i: f64,
    pub det: f64,
}

impl LinearSystemCoeffs {
    pub fn new(alpha_r: f64, beta_r: f64, omega_r: f64, alpha_i: f64, beta_i: f64, omega_i: f64) -> Self {
        Self { alpha_r, beta_r, omega_r, alpha_i, beta_i, omega_i, det: alpha_r * beta_i - beta_r * alpha_i }
    }

    /// Scale the determinant is compared against.
    pub fn det_scale(&self) -> f64 {
        (self.alpha_r * self.beta_i).abs() + (self.beta_r * self.alpha_i).abs() + 1e-300
    }

    /// Largest coefficient magnitude.
    pub fn magnitude(&self) -> f64 {
        [self.alpha_r, self.beta_r, self.omega_r, self.alpha_i, self.beta_i, self.omega_i]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Residuals `(α_r ε1 + β_r ε4 - Ω_r, α_i ε1 + β_i ε4 - Ω_i)`.
    pub fn residual(&self, eps1: f64, eps4: f64) -> (f64, f64) {
        (
            self.alpha_r * eps1 + self.beta_r * eps4 - self.omega_r,
            self.alpha_i * eps1 + self.beta_i * eps4 - self.omega_i,
        )
    }

    /// Unique solution by Cramer's rule, or `PureStateDegeneracy` when the
    /// determinant is negligible relative to `threshold * det_scale()`.
    pub fn solve(&self, threshold: f64) -> Result<(f64, f64)> {
        let scale = self.det_scale();
        if !(self.det.abs() >= threshold * scale) {
            return Err(Error::PureStateDegeneracy { det: self.det, scale });
        }
        let eps1 = (self.beta_i * self.omega_r - self.beta_r * self.omega_i) / self.det;
        let eps4 = -(self.alpha_i * self.omega_r - self.alpha_r * self.omega_i) / self.det;
        Ok((eps1, eps4))
    }
}

fn collapse(reason: impl Into<String>) -> Error {
    Error::CollapseDetected { reason: reason.into() }
}

/// `J12 = 2γ n2 / j̃12` and `J34 = 2γ n3 / j̃34`. `min_current` is the absolute
/// floor below which either current counts as collapsed.
pub fn tunnelling_controls(moments: &DensityMoments, gamma: f64, min_current: f64) -> Result<(f64, f64)> {
    let jt12 = moments.current(W1, W2);
    let jt34 = moments.current(W3, W4);
    if !(jt12.abs() >= min_current) {
        return Err(collapse(format!("|j̃12| = {:e} below {min_current:e}", jt12.abs())));
    }
    if !(jt34.abs() >= min_current) {
        return Err(collapse(format!("|j̃34| = {:e} below {min_current:e}", jt34.abs())));
    }
    let j12 = 2.0 * gamma * moments.occupation(W2) / jt12;
    let j34 = 2.0 * gamma * moments.occupation(W3) / jt34;
    Ok((j12, j34))
}

/// Coefficients `α_r, β_r, Ω_r, α_i, β_i, Ω_i` with `X_kl = 2 Re Z_kl`,
/// `Y_kl = 2 Im Z_kl` evaluated at the given tunnelling rates.
pub fn coefficient_assembly(moments: &DensityMoments, j12: f64, j23: f64, j34: f64, u: f64) -> Result<LinearSystemCoeffs> {
    let n2 = moments.occupation(W2);
    let n3 = moments.occupation(W3);
    let jt12 = moments.current(W1, W2);
    let jt34 = moments.current(W3, W4);
    for (name, v) in [("n2", n2), ("n3", n3), ("j̃12", jt12), ("j̃34", jt34)] {
        if v == 0.0 || !v.is_finite() {
            return Err(collapse(format!("{name} = {v} in a coefficient denominator")));
        }
    }
    let c12 = moments.correlation(W1, W2);
    let c34 = moments.correlation(W3, W4);
    let c13 = moments.correlation(W1, W3);
    let jt13 = moments.current(W1, W3);
    let c24 = moments.correlation(W2, W4);
    let jt24 = moments.current(W2, W4);

    let params = ControlParams { j12, j23, j34, eps1: 0.0, eps4: 0.0, u };
    let z = z_matrix(moments, &params);
    let x = |k: usize, l: usize| 2.0 * z[(k, l)].re;
    let y = |k: usize, l: usize| 2.0 * z[(k, l)].im;
    let (x12, x13, x22, x24, x33, x34) = (x(W1, W2), x(W1, W3), x(W2, W2), x(W2, W4), x(W3, W3), x(W3, W4));
    let (y13, y22, y24, y33) = (y(W1, W3), y(W2, W2), y(W2, W4), y(W3, W3));

    let alpha_r = 0.5 * j12 * (c12 * c13 / jt12 + jt13);
    let beta_r = 0.5 * j34 * (c34 * c24 / jt34 + jt24);
    let omega_r = 0.5 * j12 * (y22 * c13 / (2.0 * n2) + x12 * c13 / jt12 + x22 * jt13 / (2.0 * n2) + y13)
        - 0.5 * j34 * (y33 * c24 / (2.0 * n3) + x34 * c24 / jt34 + x33 * jt24 / (2.0 * n3) + y24);
    let alpha_i = 0.5 * j12 * (c12 * jt13 / jt12 - c13);
    let beta_i = 0.5 * j34 * (c34 * jt24 / jt34 - c24);
    let omega_i = 0.5 * j12 * (-x22 * c13 / (2.0 * n2) + y22 * jt13 / (2.0 * n2) + x12 * jt13 / jt12 - x13)
        - 0.5 * j34 * (-x33 * c24 / (2.0 * n3) + y33 * jt24 / (2.0 * n3) + x34 * jt24 / jt34 - x24);

    Ok(LinearSystemCoeffs::new(alpha_r, beta_r, omega_r, alpha_i, beta_i, omega_i))
}

/// Onsite energies `(ε1, ε4)` at the given tunnelling rates.
pub fn onsite_controls(
    moments: &DensityMoments,
    j12: f64,
    j23: f64,
    j34: f64,
    u: f64,
    degeneracy: f64,
) -> Result<(f64, f64)> {
    coefficient_assembly(moments, j12, j23, j34, u)?.solve(degeneracy)
}

/// Residual `-J12 σ13 + J34 σ24` of the reservoir-coupling requirement.
pub fn verify_requirement(moments: &DensityMoments, j12: f64, j34: f64) -> Complex64 {
    -moments.sigma(W1, W3) * j12 + moments.sigma(W2, W4) * j34
}

/// Complete feedback law with its fixed parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    pub gamma: f64,
    pub j23: f64,
    pub u: f64,
    pub thresholds: Thresholds,
}

impl ControlLaw {
    /// All four controls from the instantaneous moments. Fails with
    /// `CollapseDetected` when a current vanishes or a control exceeds the
    /// limit, and with `PureStateDegeneracy` when the onsite system is
    /// singular.
    ///
    /// Without gain and loss the reservoirs stay decoupled: `J12 = J34 = 0`,
    /// the requirement holds identically and the onsite energies are set to
    /// zero.
    pub fn evaluate(&self, moments: &DensityMoments) -> Result<ControlParams> {
        if self.gamma == 0.0 {
            return Ok(ControlParams::fixed(self.j23, self.u));
        }
        // thresholds are relative to the particle number of the moments, which
        // carries the (possibly non-unit) norm of the state
        let min_current = self.thresholds.collapse_current * moments.n_total();
        let (j12, j34) = tunnelling_controls(moments, self.gamma, min_current)?;
        let (eps1, eps4) = onsite_controls(moments, j12, self.j23, j34, self.u, self.thresholds.degeneracy)?;
        let params = ControlParams { j12, j23: self.j23, j34, eps1, eps4, u: self.u };
        params.check_finite()?;
        let limit = self.thresholds.control_limit * self.j23;
        for (name, v) in [("J12", j12), ("J34", j34), ("eps1", eps1), ("eps4", eps4)] {
            if v.abs() > limit {
                return Err(collapse(format!("|{name}| = {:e} exceeds {limit:e}", v.abs())));
            }
        }
        Ok(params)
    }
}
