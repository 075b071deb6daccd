//! Initial-state construction.
//!
//! A mean-field seed is condensed into a product state, each Fock coefficient
//! is deflected by a normally distributed multiplier, and the multipliers are
//! then adjusted so that the five real constraints
//!
//! 1. `-J12 Re σ13 + J34 Re σ24 = 0`
//! 2. `-J12 Im σ13 + J34 Im σ24 = 0`
//! 3. `σ22 = σ33`
//! 4. `Im σ23 = sqrt(σ22 σ33) γ/J`
//! 5. `Re σ23 = sqrt(σ22 σ33) sqrt(1 - γ²/J²)`
//!
//! hold, with `J12`, `J34` taken from the tunnelling law on the same state.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::{FockBasis, ManyBodyState};
use crate::error::{Error, Result};
use crate::observables::{DensityMoments, MomentEvaluator};
use crate::twomode::TwoModeTarget;

/// Four-well mean-field coefficients
/// `(-i sqrt(n1) e^{iφ}, sqrt(n) e^{iφ}, sqrt(n) e^{-iφ}, i sqrt(n4) e^{-iφ})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSeed {
    pub psi: [Complex64; 4],
    pub n1_0: f64,
    pub n4_0: f64,
    pub n: f64,
    pub phi: f64,
}

impl MeanFieldSeed {
    pub fn new(target: &TwoModeTarget, n1_0: f64, n4_0: f64) -> Self {
        let phi = target.phi;
        let n = target.n;
        let i = Complex64::new(0.0, 1.0);
        let psi = [
            -i * Complex64::from_polar(n1_0.sqrt(), phi),
            Complex64::from_polar(n.sqrt(), phi),
            Complex64::from_polar(n.sqrt(), -phi),
            i * Complex64::from_polar(n4_0.sqrt(), -phi),
        ];
        Self { psi, n1_0, n4_0, n, phi }
    }

    /// `Σ |ψ_i|²`
    pub fn particles(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Normal deflection `z ~ N(mean, variance)` of every Fock coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub mean: f64,
    pub variance: f64,
    pub seed: u64,
    /// Multiply by `z_re + i z_im` with `z_im ~ N(0, variance)`. With real
    /// `z` every `σ_kl` keeps the seed phase and the onsite-energy system is
    /// singular, exactly as for the pure state.
    pub complex: bool,
}

impl PerturbationSpec {
    /// Complex multipliers with mean one.
    pub fn new(variance: f64, seed: u64) -> Self {
        Self { mean: 1.0, variance, seed, complex: true }
    }

    /// Real multipliers with mean one.
    pub fn real(variance: f64, seed: u64) -> Self {
        Self { complex: false, ..Self::new(variance, seed) }
    }
}

/// The five constraint residuals, in the order listed in the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    pub r: [f64; 5],
}

impl ConstraintResiduals {
    pub fn max_abs(&self) -> f64 {
        self.r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Product state `Σ sqrt(N!/Π n_i!) Π φ_i^{n_i} |n_1..n_M>` with
/// `φ = ψ / sqrt(N)`, for mean-field amplitudes normalized to `N`.
pub fn product_state_from_amplitudes(psi: &[Complex64], basis: Arc<FockBasis>) -> Result<ManyBodyState> {
    assert_eq!(psi.len(), basis.wells(), "one amplitude per well");
    let n_total = basis.n_total();
    let expected = n_total as f64;
    let found: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
    if !((found - expected).abs() <= 1e-9 * expected) {
        return Err(Error::SeedNorm { expected, found });
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n_total).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let scale = expected.sqrt();
    let phis: Vec<Complex64> = psi.iter().map(|c| c / scale).collect();

    let amplitudes = basis
        .states()
        .map(|occ| {
            let mut log_mag = 0.5 * ln_fact[n_total];
            let mut phase = 0.0;
            for (&n, phi) in occ.iter().zip(&phis) {
                if n == 0 {
                    continue;
                }
                let r = phi.norm();
                if r == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                log_mag += f64::from(n) * r.ln() - 0.5 * ln_fact[n as usize];
                phase += f64::from(n) * phi.arg();
            }
            Complex64::from_polar(log_mag.exp(), phase)
        })
        .collect();
    let mut state = ManyBodyState::new(basis, amplitudes);
    state.normalize();
    Ok(state)
}

/// Product state of a four-well mean-field seed.
pub fn product_state(seed: &MeanFieldSeed, basis: Arc<FockBasis>) -> Result<ManyBodyState> {
    product_state_from_amplitudes(&seed.psi, basis)
}

/// Deflects every coefficient by an independent normal multiplier and
/// renormalizes. Deterministic in `spec.seed`.
pub fn perturb(state: &ManyBodyState, spec: &PerturbationSpec) -> ManyBodyState {
    assert!(spec.variance >= 0.0, "variance must be non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(spec.mean, spec.variance.sqrt()).expect("finite normal parameters");
    let noise = Normal::new(0.0, spec.variance.sqrt()).expect("finite normal parameters");
    let mut out = state.clone();
    for c in out.amplitudes_mut() {
        let z_re = normal.sample(&mut rng);
        let z = if spec.complex { Complex64::new(z_re, noise.sample(&mut rng)) } else { Complex64::new(z_re, 0.0) };
        *c *= z;
    }
    out.normalize();
    out
}

/// Residuals of the five constraints for moments of a normalized state.
pub fn constraint_residuals(moments: &DensityMoments, target: &TwoModeTarget) -> ConstraintResiduals {
    let q = Quantities::from_moments(moments);
    ConstraintResiduals { r: q.residuals(target) }
}

// Real quantities the residuals depend on.
const Q_PAIRS: [(usize, usize); 5] = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Clone, Copy)]
struct Quantities {
    // Re, Im of σ12, σ13, σ23, σ24, σ34, then σ22, σ33
    v: [f64; 12],
}

impl Quantities {
    fn from_moments(m: &DensityMoments) -> Self {
        let mut v = [0.0; 12];
        for (p, &(k, l)) in Q_PAIRS.iter().enumerate() {
            v[2 * p] = m.sigma(k, l).re;
            v[2 * p + 1] = m.sigma(k, l).im;
        }
        v[10] = m.occupation(1);
        v[11] = m.occupation(2);
        Self { v }
    }

    fn residuals(&self, t: &TwoModeTarget) -> [f64; 5] {
        let [r12, i12, r13, i13, r23, i23, r24, i24, _r34, i34, n2, n3] = self.v;
        let _ = r12;
        let j12 = t.gamma * n2 / i12;
        let j34 = t.gamma * n3 / i34;
        let g = t.gamma / t.j;
        let h = (1.0 - g * g).sqrt();
        let s = (n2 * n3).sqrt();
        [-j12 * r13 + j34 * r24, -j12 * i13 + j34 * i24, n2 - n3, i23 - s * g, r23 - s * h]
    }

    /// The outer pair multiplied by `Im σ12 Im σ34 / γ`: same zero set away
    /// from vanishing currents, but polynomial in the moments.
    fn outer_residuals(&self) -> [f64; 2] {
        let [_r12, i12, r13, i13, _r23, _i23, r24, i24, _r34, i34, n2, n3] = self.v;
        [-n2 * i34 * r13 + n3 * i12 * r24, -n2 * i34 * i13 + n3 * i12 * i24]
    }

    /// `∂/∂q` of the outer pair (polynomial form) and of the three inner
    /// residuals, 5 x 12.
    fn solver_jacobian(&self, t: &TwoModeTarget) -> SMatrix<f64, 5, 12> {
        let [_r12, i12, r13, i13, _r23, _i23, r24, i24, _r34, i34, n2, n3] = self.v;
        let g = t.gamma / t.j;
        let h = (1.0 - g * g).sqrt();
        let s = (n2 * n3).sqrt();
        let mut d = SMatrix::<f64, 5, 12>::zeros();
        // indices into v
        let (ii12, ir13, ii13, ir23, ii23, ir24, ii24, ii34, in2, in3) = (1, 2, 3, 4, 5, 6, 7, 9, 10, 11);
        for (row, (a13, a24, c13, c24)) in [(r13, r24, ir13, ir24), (i13, i24, ii13, ii24)].into_iter().enumerate() {
            d[(row, c13)] = -n2 * i34;
            d[(row, c24)] = n3 * i12;
            d[(row, in2)] = -i34 * a13;
            d[(row, ii34)] = -n2 * a13;
            d[(row, in3)] = i12 * a24;
            d[(row, ii12)] = n3 * a24;
        }
        d[(2, in2)] = 1.0;
        d[(2, in3)] = -1.0;
        d[(3, ii23)] = 1.0;
        d[(3, in2)] = -g * n3 / (2.0 * s);
        d[(3, in3)] = -g * n2 / (2.0 * s);
        d[(4, ir23)] = 1.0;
        d[(4, in2)] = -h * n3 / (2.0 * s);
        d[(4, in3)] = -h * n2 / (2.0 * s);
        d
    }
}

/// Settings of the constraint solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-8 }
    }
}

/// Outcome of a successful projection.
#[derive(Debug, Clone)]
pub struct Projection {
    pub state: ManyBodyState,
    pub residuals: ConstraintResiduals,
    /// Gauss-Newton iterations summed over all solves.
    pub iterations: usize,
    /// Fraction `η` of the off-structure remainder kept in the state.
    pub remainder_weight: f64,
}

/// Projects `state` onto the five constraints.
///
/// The three inner-well conditions put `|σ23|` at its Cauchy-Schwarz bound
/// `sqrt(σ22 σ33)`. They hold exactly iff, within every block of fixed
/// `(n1, n4)`, all inner-well particles occupy the single mode
/// `b = (a2 + e^{iα} a3)/√2` with `α = arg(c + i j̃)`. The solver
///
/// 1. splits the state into its orthogonal projection onto that subspace and
///    a remainder, and strips from the remainder its first-order effect on
///    the residuals;
/// 2. for a remainder weight `η`, solves the two outer conditions by
///    Gauss-Newton over one real multiplier per block, each step being the
///    minimum-norm solution `Δw = -Jᵀ (J Jᵀ + λ I)⁻¹ r`;
/// 3. keeps the largest `η ∈ [0, 1]` whose state meets the tolerance.
///
/// `η = 0` is the exact nearest solution. Its onsite-energy system is
/// singular, like that of a pure state, so the kept remainder is what makes
/// the controls finite.
pub fn project_constraints(state: &ManyBodyState, target: &TwoModeTarget) -> Result<Projection> {
    project_constraints_with(state, target, &SolverOptions::default())
}

pub fn project_constraints_with(
    state: &ManyBodyState,
    target: &TwoModeTarget,
    options: &SolverOptions,
) -> Result<Projection> {
    if target.gamma > target.j {
        return Err(Error::BrokenPtRegime { gamma: target.gamma, j: target.j });
    }
    let solver = Solver::new(state.basis().clone(), *target, *options);
    let initial = solver.residuals(state);
    if initial.max_abs() < options.tolerance && (state.norm() - 1.0).abs() < 1e-12 {
        return Ok(Projection { state: state.clone(), residuals: initial, iterations: 0, remainder_weight: 1.0 });
    }

    let mut psi = state.clone();
    psi.normalize();
    let base = solver.blocks.project(&psi);
    if base.norm_sqr() == 0.0 {
        return Err(Error::ConstraintSolve { iterations: 0, max_residual: initial.max_abs(), residuals: initial.r });
    }
    let remainder = solver.decoupled_remainder(&base, &psi);

    let mut iterations = 0;
    let mut multipliers = vec![1.0; solver.blocks.len()];
    let mut attempt = |eta: f64, multipliers: &mut Vec<f64>| -> Option<(ManyBodyState, ConstraintResiduals)> {
        let mut w = multipliers.clone();
        let (out, res, its) = solver.solve_outer(&base, &remainder, eta, &mut w);
        iterations += its;
        // partial remainders stop short of the tolerance so that the result
        // does not sit on its edge
        let bound = if eta > 0.0 && eta < 1.0 { REMAINDER_MARGIN * options.tolerance } else { options.tolerance };
        (res.max_abs() < bound).then(|| {
            *multipliers = w;
            (out, res)
        })
    };

    let Some(mut best) = attempt(0.0, &mut multipliers) else {
        let (_, res, _) = solver.solve_outer(&base, &remainder, 0.0, &mut vec![1.0; solver.blocks.len()]);
        return Err(Error::ConstraintSolve {
            iterations: options.max_iterations,
            max_residual: res.max_abs(),
            residuals: res.r,
        });
    };
    let mut eta_best = 0.0;
    if let Some(full) = attempt(1.0, &mut multipliers.clone()) {
        best = full;
        eta_best = 1.0;
    } else {
        // bisection in log η; residuals grow monotonically with η for small η
        let (mut lo, mut hi) = (-16.0f64, 0.0f64);
        for _ in 0..REMAINDER_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let mut w = multipliers.clone();
            match attempt(10f64.powf(mid), &mut w) {
                Some(found) => {
                    best = found;
                    eta_best = 10f64.powf(mid);
                    multipliers = w;
                    lo = mid;
                }
                None => hi = mid,
            }
        }
    }
    Ok(Projection { state: best.0, residuals: best.1, iterations, remainder_weight: eta_best })
}

const REMAINDER_BISECTIONS: usize = 40;
const REMAINDER_MARGIN: f64 = 0.5;

// Relative Tikhonov ridge of the normal system.
const RIDGE: f64 = 1e-12;

struct Solver {
    evaluator: MomentEvaluator,
    blocks: InnerModeBlocks,
    target: TwoModeTarget,
    options: SolverOptions,
}

impl Solver {
    fn new(basis: Arc<FockBasis>, target: TwoModeTarget, options: SolverOptions) -> Self {
        let alpha = target.current.atan2(target.correlation);
        Self { blocks: InnerModeBlocks::new(&basis, alpha), evaluator: MomentEvaluator::new(basis), target, options }
    }

    fn quantities(&self, state: &ManyBodyState) -> Quantities {
        Quantities::from_moments(&self.evaluator.moments(state.amplitudes()))
    }

    fn residuals(&self, state: &ManyBodyState) -> ConstraintResiduals {
        ConstraintResiduals { r: self.quantities(state).residuals(&self.target) }
    }

    /// `psi - base` with the directions that change any residual to first
    /// order at `base` removed (orthogonal in `Re <.|.>`), restricted to the
    /// complement of the inner-mode subspace.
    fn decoupled_remainder(&self, base: &ManyBodyState, psi: &ManyBodyState) -> Vec<Complex64> {
        let mut unit = base.clone();
        unit.normalize();
        let q = self.quantities(&unit);
        let dim = unit.basis().dim();
        let amps = unit.amplitudes();
        let mut forward = vec![Complex64::new(0.0, 0.0); dim];
        let mut backward = vec![Complex64::new(0.0, 0.0); dim];
        // G_q with dq = Re <G_q | ξ> for ξ orthogonal to the state
        let mut grads: Vec<Vec<Complex64>> = Vec::with_capacity(12);
        for &(k, l) in &Q_PAIRS {
            self.evaluator.apply_ladder(l, k, amps, &mut forward);
            self.evaluator.apply_ladder(k, l, amps, &mut backward);
            grads.push(forward.iter().zip(&backward).map(|(u, v)| u + v).collect());
            grads.push(forward.iter().zip(&backward).map(|(u, v)| Complex64::new(0.0, 1.0) * (u - v)).collect());
        }
        for k in [1, 2] {
            grads.push((0..dim).map(|i| amps[i] * (2.0 * self.evaluator.occupation(i, k))).collect());
        }
        let jac = q.solver_jacobian(&self.target);
        let mut directions: Vec<Vec<Complex64>> = Vec::with_capacity(5);
        for row in 0..5 {
            let mut g = vec![Complex64::new(0.0, 0.0); dim];
            for (col, grad) in grads.iter().enumerate() {
                let w = jac[(row, col)];
                if w != 0.0 {
                    g.iter_mut().zip(grad).for_each(|(a, b)| *a += b * w);
                }
            }
            let in_subspace = self.blocks.project_vec(&g);
            g.iter_mut().zip(&in_subspace).for_each(|(a, b)| *a -= b);
            // Gram-Schmidt against the directions kept so far
            for d in &directions {
                let c = real_inner(d, &g);
                g.iter_mut().zip(d).for_each(|(a, b)| *a -= b * c);
            }
            let n = real_inner(&g, &g).sqrt();
            if n > 1e-12 {
                g.iter_mut().for_each(|a| *a /= n);
                directions.push(g);
            }
        }
        let mut xi: Vec<Complex64> = psi.amplitudes().iter().zip(base.amplitudes()).map(|(a, b)| a - b).collect();
        for d in &directions {
            let c = real_inner(d, &xi);
            xi.iter_mut().zip(d).for_each(|(a, b)| *a -= b * c);
        }
        xi
    }

    /// Solves the outer conditions on `normalize(w ⊙ (base + η ξ))` over the
    /// block multipliers `w`, starting from the given ones.
    fn solve_outer(
        &self,
        base: &ManyBodyState,
        remainder: &[Complex64],
        eta: f64,
        w: &mut [f64],
    ) -> (ManyBodyState, ConstraintResiduals, usize) {
        let basis = base.basis().clone();
        let dim = basis.dim();
        let build = |w: &[f64]| {
            let mut amps: Vec<Complex64> = base.amplitudes().iter().zip(remainder).map(|(b, x)| b + x * eta).collect();
            for (members, &f) in self.blocks.members.iter().zip(w) {
                for &(i, _) in members {
                    amps[i] *= f;
                }
            }
            let mut s = ManyBodyState::new(basis.clone(), amps);
            s.normalize();
            s
        };
        let mut current = build(w);
        let mut q = self.quantities(&current);
        let mut merit = norm2(&q.outer_residuals());
        let mut scratch_a = vec![Complex64::new(0.0, 0.0); dim];
        let mut scratch_b = vec![Complex64::new(0.0, 0.0); dim];

        for iteration in 0..self.options.max_iterations {
            let residuals = ConstraintResiduals { r: q.residuals(&self.target) };
            if residuals.max_abs() < self.options.tolerance || !merit.is_finite() {
                return (current, residuals, iteration);
            }
            let dq = quantity_gradients(&self.evaluator, &current, &q, &mut scratch_a, &mut scratch_b);
            let dr_dq = q.solver_jacobian(&self.target);
            // J = dr/dq · dq/dw, 2 x blocks; a block multiplier scales every
            // coefficient of the block
            let mut jac = [vec![0.0; self.blocks.len()], vec![0.0; self.blocks.len()]];
            for (row, jrow) in jac.iter_mut().enumerate() {
                for (col, grad) in dq.iter().enumerate() {
                    let c = dr_dq[(row, col)];
                    if c != 0.0 {
                        for (b, members) in self.blocks.members.iter().enumerate() {
                            jrow[b] += c * members.iter().map(|&(i, _)| grad[i]).sum::<f64>();
                        }
                    }
                }
            }
            let mut gram = SMatrix::<f64, 2, 2>::zeros();
            for a in 0..2 {
                for b in 0..2 {
                    gram[(a, b)] = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
                }
            }
            let scale = gram.trace() / 2.0;
            let r = SVector::<f64, 2>::from(q.outer_residuals());
            let system = gram + SMatrix::<f64, 2, 2>::identity() * (RIDGE * scale);
            let Some(y) = system.cholesky().map(|ch| ch.solve(&r)) else {
                return (current, residuals, iteration);
            };

            // backtracking along the Gauss-Newton direction; the multipliers
            // are relative to the current iterate
            let mut accepted = false;
            let mut length = 1.0;
            for _ in 0..30 {
                let trial_w: Vec<f64> = w
                    .iter()
                    .enumerate()
                    .map(|(b, &f)| f * (1.0 - length * (jac[0][b] * y[0] + jac[1][b] * y[1])))
                    .collect();
                let trial = build(&trial_w);
                let trial_q = self.quantities(&trial);
                let trial_merit = norm2(&trial_q.outer_residuals());
                if trial_merit < merit {
                    w.copy_from_slice(&trial_w);
                    current = trial;
                    q = trial_q;
                    merit = trial_merit;
                    accepted = true;
                    break;
                }
                length *= 0.5;
            }
            if !accepted {
                return (current, residuals, iteration + 1);
            }
        }
        let residuals = ConstraintResiduals { r: q.residuals(&self.target) };
        (current, residuals, self.options.max_iterations)
    }
}

fn real_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn norm2(r: &[f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// Basis states grouped by `(n1, n4)`, with the condensed inner-mode vector
/// of each group.
struct InnerModeBlocks {
    // (basis index, n2) per block
    members: Vec<Vec<(usize, u32)>>,
    // mode amplitudes per block, indexed by n2
    modes: Vec<Vec<Complex64>>,
}

impl InnerModeBlocks {
    fn new(basis: &FockBasis, alpha: f64) -> Self {
        let n = basis.n_total();
        let mut slot = vec![vec![usize::MAX; n + 1]; n + 1];
        let mut members: Vec<Vec<(usize, u32)>> = Vec::new();
        let mut modes = Vec::new();
        for (i, occ) in basis.states().enumerate() {
            let (n1, n2, n3, n4) = (occ[0] as usize, occ[1], occ[2], occ[3] as usize);
            if slot[n1][n4] == usize::MAX {
                slot[n1][n4] = members.len();
                members.push(Vec::new());
                modes.push(condensed_mode(n2 + n3, alpha));
            }
            members[slot[n1][n4]].push((i, n2));
        }
        Self { members, modes }
    }

    fn len(&self) -> usize {
        self.members.len()
    }

    fn project_vec(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for (members, mode) in self.members.iter().zip(&self.modes) {
            let overlap: Complex64 = members.iter().map(|&(i, n2)| mode[n2 as usize].conj() * amps[i]).sum();
            for &(i, n2) in members {
                out[i] = overlap * mode[n2 as usize];
            }
        }
        out
    }

    fn project(&self, state: &ManyBodyState) -> ManyBodyState {
        ManyBodyState::new(state.basis().clone(), self.project_vec(state.amplitudes()))
    }
}

/// Coefficients of `(b†)^K / sqrt(K!) |0>` on `|n2, K - n2>`.
fn condensed_mode(k: u32, alpha: f64) -> Vec<Complex64> {
    let ln_fact = |m: u32| (1..=m).map(|x| f64::from(x).ln()).sum::<f64>();
    (0..=k)
        .map(|n2| {
            let ln_binom = ln_fact(k) - ln_fact(n2) - ln_fact(k - n2);
            let mag = (0.5 * ln_binom - 0.5 * f64::from(k) * std::f64::consts::LN_2).exp();
            Complex64::from_polar(mag, alpha * f64::from(k - n2))
        })
        .collect()
}

/// Gradients of the twelve quantities with respect to the multipliers at
/// `z = 1` for a normalized state.
fn quantity_gradients(
    evaluator: &MomentEvaluator,
    state: &ManyBodyState,
    q: &Quantities,
    forward: &mut [Complex64],
    backward: &mut [Complex64],
) -> Vec<Vec<f64>> {
    let psi = state.amplitudes();
    let weights: Vec<f64> = psi.iter().map(|c| c.norm_sqr()).collect();
    let mut out = Vec::with_capacity(12);
    for (p, &(k, l)) in Q_PAIRS.iter().enumerate() {
        evaluator.apply_ladder(k, l, psi, forward);
        evaluator.apply_ladder(l, k, psi, backward);
        let sigma = Complex64::new(q.v[2 * p], q.v[2 * p + 1]);
        let grad: Vec<Complex64> = (0..psi.len())
            .map(|i| psi[i].conj() * forward[i] + psi[i] * backward[i].conj() - sigma * (2.0 * weights[i]))
            .collect();
        out.push(grad.iter().map(|g| g.re).collect());
        out.push(grad.iter().map(|g| g.im).collect());
    }
    for (slot, k) in [(10, 1), (11, 2)] {
        let sigma = q.v[slot];
        out.push((0..psi.len()).map(|i| 2.0 * weights[i] * (evaluator.occupation(i, k) - sigma)).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::single_particle_matrix;
    use crate::twomode::target_from;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn all_particles_in_one_well() {
        let b = Arc::new(FockBasis::new(2, 2).unwrap());
        let s = product_state_from_amplitudes(&[c(2f64.sqrt(), 0.0), c(0.0, 0.0)], b.clone()).unwrap();
        assert_eq!(s.amplitudes()[b.index_of(&[2, 0]).unwrap()], c(1.0, 0.0));
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_particle_superposition() {
        let b = Arc::new(FockBasis::new(1, 2).unwrap());
        let h = 1.0 / 2f64.sqrt();
        let s = product_state_from_amplitudes(&[c(h, 0.0), c(h, 0.0)], b).unwrap();
        for a in s.amplitudes() {
            assert!((a - c(h, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn seed_norm_mismatch() {
        let b = Arc::new(FockBasis::new(3, 2).unwrap());
        assert!(matches!(
            product_state_from_amplitudes(&[c(1.0, 0.0), c(1.0, 0.0)], b),
            Err(Error::SeedNorm { .. })
        ));
    }

    #[test]
    fn seed_phases_and_inner_coherence() {
        let t = target_from(0.5, 1.0, 5.0).unwrap();
        let seed = MeanFieldSeed::new(&t, 7.0, 5.0);
        assert!((seed.particles() - 22.0).abs() < 1e-12);
        let d12 = (seed.psi[0].arg() - seed.psi[1].arg()).rem_euclid(2.0 * std::f64::consts::PI);
        assert!((d12 - 1.5 * std::f64::consts::PI).abs() < 1e-12);
        let b = Arc::new(FockBasis::new(22, 4).unwrap());
        let state = product_state(&seed, b).unwrap();
        let s = single_particle_matrix(&state);
        let expected = Complex64::from_polar(5.0, -2.0 * t.phi);
        assert!((s[(1, 2)] - expected).norm() < 1e-10);
    }

    #[test]
    fn zero_variance_is_identity() {
        let t = target_from(0.5, 1.0, 2.0).unwrap();
        let b = Arc::new(FockBasis::new(6, 4).unwrap());
        let state = product_state(&MeanFieldSeed::new(&t, 1.0, 1.0), b).unwrap();
        let out = perturb(&state, &PerturbationSpec::new(0.0, 9));
        for (a, e) in out.amplitudes().iter().zip(state.amplitudes()) {
            assert!((a - e).norm() < 1e-15);
        }
    }

    #[test]
    fn perturbation_is_seeded() {
        let t = target_from(0.5, 1.0, 2.0).unwrap();
        let b = Arc::new(FockBasis::new(6, 4).unwrap());
        let state = product_state(&MeanFieldSeed::new(&t, 1.0, 1.0), b).unwrap();
        let a = perturb(&state, &PerturbationSpec::new(0.01, 1));
        let a2 = perturb(&state, &PerturbationSpec::new(0.01, 1));
        let b2 = perturb(&state, &PerturbationSpec::new(0.01, 2));
        assert_eq!(a, a2);
        assert_ne!(a, b2);
        assert!((b2.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn satisfied_state_is_a_fixed_point() {
        let t = target_from(0.5, 1.0, 2.0).unwrap();
        let b = Arc::new(FockBasis::new(7, 4).unwrap());
        let state = product_state(&MeanFieldSeed::new(&t, 2.0, 1.0), b).unwrap();
        let proj = project_constraints(&state, &t).unwrap();
        assert_eq!(proj.iterations, 0);
        assert!(proj.residuals.max_abs() < 1e-12);
        assert_eq!(proj.state, state);
    }

    #[test]
    fn broken_target_is_rejected() {
        let t = target_from(0.5, 1.0, 2.0).unwrap();
        let b = Arc::new(FockBasis::new(5, 4).unwrap());
        let state = product_state(&MeanFieldSeed::new(&t, 0.5, 0.5), b).unwrap();
        let broken = TwoModeTarget { gamma: 1.5, ..t };
        assert!(matches!(project_constraints(&state, &broken), Err(Error::BrokenPtRegime { .. })));
    }

    #[test]
    fn projection_of_a_perturbed_state() {
        let t = target_from(0.5, 1.0, 2.0).unwrap();
        let b = Arc::new(FockBasis::new(8, 4).unwrap());
        let state = product_state(&MeanFieldSeed::new(&t, 2.5, 1.5), b.clone()).unwrap();
        let perturbed = perturb(&state, &PerturbationSpec::new(0.01, 3));
        let before = constraint_residuals(&MomentEvaluator::new(b.clone()).moments(perturbed.amplitudes()), &t);
        assert!(before.max_abs() > 1e-4);
        let proj = project_constraints(&perturbed, &t).unwrap();
        assert!(proj.residuals.max_abs() < 1e-8);
        assert!((proj.state.norm() - 1.0).abs() < 1e-12);
        let again = constraint_residuals(&MomentEvaluator::new(b).moments(proj.state.amplitudes()), &t);
        assert!(again.max_abs() < 1e-8);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let t = target_from(0.4, 1.0, 1.5).unwrap();
        let b = Arc::new(FockBasis::new(5, 4).unwrap());
        let state = perturb(&product_state(&MeanFieldSeed::new(&t, 1.2, 0.8), b.clone()).unwrap(), &PerturbationSpec::new(0.02, 5));
        let ev = MomentEvaluator::new(b.clone());
        let q = Quantities::from_moments(&ev.moments(state.amplitudes()));
        let dim = b.dim();
        let mut fa = vec![c(0.0, 0.0); dim];
        let mut fb = vec![c(0.0, 0.0); dim];
        let grads = quantity_gradients(&ev, &state, &q, &mut fa, &mut fb);
        let h = 1e-6;
        for i in [0, dim / 3, dim - 1] {
            let shifted = |sign: f64| {
                let mut s = state.clone();
                s.amplitudes_mut()[i] *= 1.0 + sign * h;
                s.normalize();
                Quantities::from_moments(&ev.moments(s.amplitudes())).v
            };
            let (p, m) = (shifted(1.0), shifted(-1.0));
            for qi in 0..12 {
                let fd = (p[qi] - m[qi]) / (2.0 * h);
                assert!((fd - grads[qi][i]).abs() < 1e-7, "q{qi} at {i}: {fd} vs {}", grads[qi][i]);
            }
        }
    }
}

