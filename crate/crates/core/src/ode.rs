//! Adaptive Dormand-Prince 5(4) integrator for complex state vectors with
//! fourth-order dense output.
//!
//! The right-hand side may fail (e.g. when a feedback control diverges at a
//! stage state). A failing stage rejects the step and shrinks it; the error is
//! returned once the step size underflows or the failure happens at the
//! accepted state itself.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// First-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn rhs(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()>;
}

impl<F> OdeSystem for F
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>,
{
    fn rhs(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    /// Bound on the 2-norm of the local error estimate per step.
    pub tolerance: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, h_min: 1e-13, h_max: 0.05 }
    }
}

/// Statistics of the last accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub t_start: f64,
    pub h: f64,
    pub rejected: usize,
}

pub struct DormandPrince<S> {
    system: S,
    options: StepperOptions,
    t: f64,
    h: f64,
    y: Vec<Complex64>,
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    // dense-output coefficients of the last step
    cont: [Vec<Complex64>; 5],
    t_prev: f64,
    h_prev: f64,
}

impl<S: OdeSystem> DormandPrince<S> {
    /// Evaluates the right-hand side at the initial point; fails if that does.
    pub fn new(mut system: S, t0: f64, y0: Vec<Complex64>, h0: f64, options: StepperOptions) -> Result<Self> {
        let n = y0.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut k: [Vec<Complex64>; 7] = std::array::from_fn(|_| vec![zero; n]);
        system.rhs(t0, &y0, &mut k[0])?;
        Ok(Self {
            system,
            options,
            t: t0,
            h: h0.min(options.h_max),
            y: y0,
            k,
            stage: vec![zero; n],
            y_new: vec![zero; n],
            cont: std::array::from_fn(|_| vec![zero; n]),
            t_prev: t0,
            h_prev: 0.0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[Complex64] {
        &self.y
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    fn stage_sum(&mut self, h: f64, coeffs: &[(usize, f64)]) {
        for (i, s) in self.stage.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(j, a) in coeffs {
                acc += self.k[j][i] * a;
            }
            *s = self.y[i] + acc * h;
        }
    }

    fn try_step(&mut self, h: f64) -> Result<f64> {
        let t = self.t;
        self.stage_sum(h, &[(0, A21)]);
        let (stage, k1) = (&self.stage, &mut self.k[1]);
        self.system.rhs(t + C2 * h, stage, k1)?;
        self.stage_sum(h, &[(0, A31), (1, A32)]);
        self.system.rhs(t + C3 * h, &self.stage, &mut self.k[2])?;
        self.stage_sum(h, &[(0, A41), (1, A42), (2, A43)]);
        self.system.rhs(t + C4 * h, &self.stage, &mut self.k[3])?;
        self.stage_sum(h, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        self.system.rhs(t + C5 * h, &self.stage, &mut self.k[4])?;
        self.stage_sum(h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        self.system.rhs(t + h, &self.stage, &mut self.k[5])?;
        self.stage_sum(h, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)]);
        std::mem::swap(&mut self.stage, &mut self.y_new);
        self.system.rhs(t + h, &self.y_new, &mut self.k[6])?;

        let mut err_sq = 0.0;
        for i in 0..self.y.len() {
            let e = (self.k[0][i] * E1
                + self.k[2][i] * E3
                + self.k[3][i] * E4
                + self.k[4][i] * E5
                + self.k[5][i] * E6
                + self.k[6][i] * E7)
                * h;
            err_sq += e.norm_sqr();
        }
        Ok(err_sq.sqrt() / self.options.tolerance)
    }

    /// Advances by one accepted step, at most up to `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<StepInfo> {
        let mut rejected = 0;
        loop {
            let remaining = t_end - self.t;
            let mut h = self.h.min(self.options.h_max);
            let clipped = h >= remaining;
            if clipped {
                h = remaining;
            }
            if h < self.options.h_min && !clipped {
                return Err(Error::StepUnderflow { time: self.t, dt: h });
            }
            match self.try_step(h) {
                Ok(err) if err.is_finite() && err <= 1.0 => {
                    self.accept(h);
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !clipped || factor < 1.0 {
                        self.h = h * factor;
                    }
                    return Ok(StepInfo { t_start: self.t_prev, h, rejected });
                }
                Ok(err) => {
                    let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                    self.h = h * factor;
                }
                Err(e) => {
                    if h <= self.options.h_min {
                        return Err(e);
                    }
                    log::trace!("stage failure at t = {} with h = {h:e}: {e}", self.t);
                    self.h = h * 0.25;
                    if self.h < self.options.h_min {
                        return Err(e);
                    }
                }
            }
            rejected += 1;
        }
    }

    fn accept(&mut self, h: f64) {
        for i in 0..self.y.len() {
            let y0 = self.y[i];
            let y1 = self.y_new[i];
            let dy = y1 - y0;
            let bspl = self.k[0][i] * h - dy;
            self.cont[0][i] = y0;
            self.cont[1][i] = dy;
            self.cont[2][i] = bspl;
            self.cont[3][i] = dy - self.k[6][i] * h - bspl;
            self.cont[4][i] = (self.k[0][i] * D1
                + self.k[2][i] * D3
                + self.k[3][i] * D4
                + self.k[4][i] * D5
                + self.k[5][i] * D6
                + self.k[6][i] * D7)
                * h;
        }
        std::mem::swap(&mut self.y, &mut self.y_new);
        self.k.swap(0, 6);
        self.t_prev = self.t;
        self.h_prev = h;
        self.t += h;
    }

    /// Rescales the current state (and its cached derivative) by `factor`.
    /// Valid for right-hand sides that are homogeneous of degree one in `y`.
    pub fn rescale(&mut self, factor: f64) {
        self.y.iter_mut().for_each(|c| *c *= factor);
        self.k[0].iter_mut().for_each(|c| *c *= factor);
    }

    /// Dense output at `t` inside the last accepted step.
    pub fn interpolate(&self, t: f64, out: &mut [Complex64]) {
        let theta = if self.h_prev > 0.0 { (t - self.t_prev) / self.h_prev } else { 0.0 };
        let theta1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.cont[0][i]
                + (self.cont[1][i]
                    + (self.cont[2][i] + (self.cont[3][i] + self.cont[4][i] * theta1) * theta) * theta1)
                    * theta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn harmonic_phase_rotation() {
        // dy/dt = -i ω y
        let omega = 2.3;
        let rhs = move |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = c(0.0, -omega) * y[0];
            Ok(())
        };
        let opts = StepperOptions { tolerance: 1e-12, ..Default::default() };
        let mut dp = DormandPrince::new(rhs, 0.0, vec![c(1.0, 0.0)], 1e-3, opts).unwrap();
        let mut samples = Vec::new();
        let mut next = 0.1;
        while dp.t() < 3.0 {
            dp.step(3.0).unwrap();
            while next <= dp.t() {
                let mut out = [c(0.0, 0.0)];
                dp.interpolate(next, &mut out);
                samples.push((next, out[0]));
                next += 0.1;
            }
        }
        assert!((dp.t() - 3.0).abs() < 1e-14);
        let exact = Complex64::from_polar(1.0, -omega * 3.0);
        assert!((dp.y()[0] - exact).norm() < 1e-9);
        for (t, y) in samples {
            assert!((y - Complex64::from_polar(1.0, -omega * t)).norm() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn time_dependent_rhs() {
        // dy/dt = 2t y  =>  y = exp(t²)
        let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = y[0] * (2.0 * t);
            Ok(())
        };
        let mut dp = DormandPrince::new(rhs, 0.0, vec![c(1.0, 0.0)], 1e-4, StepperOptions::default()).unwrap();
        while dp.t() < 1.0 {
            dp.step(1.0).unwrap();
        }
        assert!((dp.y()[0].re - 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn failing_rhs_is_bracketed() {
        // fails once y crosses 2 (at t = ln 2 for dy/dt = y)
        let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            if y[0].re > 2.0 {
                return Err(Error::CollapseDetected { reason: "limit".into() });
            }
            dy[0] = y[0];
            Ok(())
        };
        let mut dp = DormandPrince::new(rhs, 0.0, vec![c(1.0, 0.0)], 1e-2, StepperOptions::default()).unwrap();
        let err = loop {
            match dp.step(5.0) {
                Ok(_) => {}
                Err(e) => break e,
            }
        };
        assert!(matches!(err, Error::CollapseDetected { .. }));
        assert!((dp.t() - 2f64.ln()).abs() < 1e-6, "t = {}", dp.t());
    }
}
