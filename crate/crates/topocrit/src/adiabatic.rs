//! Ramped evolution towards the critical point and the GHZ-probe QFI.
//!
//! A single parameter `λ` is ramped from `λ(0)` to `λ(T) = λ_c`. Estimating `λ`
//! shifts the whole ramp, so `∂_λ H(τ)` is the driving term `H_λ` at all times
//! and `U†∂_λU = −i∫₀ᵀ U(τ)† H_λ U(τ) dτ`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::fit::{fit_joint_power_law, JointFit};
use crate::linalg::{self, C64, ZERO};
use crate::metrology::{self, DrivingTerm, Edge, Sublattice};
use crate::models::{self, LatticeSpec};
use crate::spectra::{self, eigh};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RampShape {
    Linear,
    /// `3u² − 2u³`, which starts and stops with zero velocity.
    Cubic,
}

/// Largest tolerated `dt·‖H‖` for a single step.
pub const STEP_BUDGET: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RampSchedule {
    pub shape: RampShape,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub total_time: f64,
    pub steps: usize,
}

impl RampSchedule {
    pub fn new(shape: RampShape, lambda_start: f64, lambda_end: f64, total_time: f64, steps: usize) -> Result<Self> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidArgument(format!("total time {total_time} must be positive")));
        }
        if steps < 100 {
            return Err(Error::InvalidArgument(format!("{steps} steps is below the minimum of 100")));
        }
        if !(lambda_start.is_finite() && lambda_end.is_finite()) {
            return Err(Error::InvalidArgument("ramp endpoints must be finite".into()));
        }
        Ok(Self {
            shape,
            lambda_start,
            lambda_end,
            total_time,
            steps,
        })
    }

    /// `max(2000, ⌈T·‖H‖/4⌉)` steps for a Hamiltonian norm bound `norm`.
    pub fn default_steps(total_time: f64, norm: f64) -> usize {
        2000.max((0.25 * total_time * norm).ceil() as usize)
    }

    pub fn lambda_at(&self, t: f64) -> f64 {
        let u = (t / self.total_time).clamp(0.0, 1.0);
        let s = match self.shape {
            RampShape::Linear => u,
            RampShape::Cubic => u * u * (3.0 - 2.0 * u),
        };
        self.lambda_start + (self.lambda_end - self.lambda_start) * s
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }

    /// The same ramp with both endpoints moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            lambda_start: self.lambda_start + delta,
            lambda_end: self.lambda_end + delta,
            ..*self
        }
    }

    pub fn amplitude(&self) -> f64 {
        (self.lambda_end - self.lambda_start).abs()
    }

    /// Scale for finite-difference steps: the amplitude, or 1 for a frozen ramp.
    fn step_scale(&self) -> f64 {
        let a = self.amplitude();
        if a > 0.0 {
            a
        } else {
            1.0
        }
    }
}

/// Result of [`evolve`].
#[derive(Clone, Debug)]
pub struct Evolution {
    pub states: Vec<Vec<C64>>,
    pub unitary: Option<Mat<C64>>,
    /// `‖U†U − I‖_max` when the unitary was formed, else the largest `|‖ψ‖ − 1|`.
    pub unitarity_defect: f64,
    /// `∫₀ᵀ ⟨ψ_m(τ)|∂_λH|ψ_m(τ)⟩ dτ` per state by the trapezoid rule on step boundaries.
    pub driving_integrals: Vec<f64>,
}

/// Nonzero pattern of `H(λ) = H₀ + λ·H_λ`, stored row by row as `(column, H₀, H_λ)`.
///
/// Lattice Hamiltonians have O(R) entries per row, so a sparse product is far
/// cheaper than any dense factorization of `H`.
struct SparseAffine {
    rows: Vec<Vec<(usize, C64, C64)>>,
}

impl SparseAffine {
    fn new(spec: &LatticeSpec, parameter: usize) -> Result<Self> {
        let h0 = models::hamiltonian(&spec.with_parameter(parameter, 0.0)?)?;
        let d = models::driving_term(spec, parameter)?;
        let dim = h0.dim();
        let rows = (0..dim)
            .map(|i| {
                (0..dim)
                    .filter_map(|j| {
                        let (a, b) = (h0.get(i, j), d.get(i, j));
                        (a != ZERO || b != ZERO).then_some((j, a, b))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { rows })
    }

    fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Gershgorin bound on `‖H(λ)‖`.
    fn norm_bound(&self, lambda: f64) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(_, a, b)| (a + b * lambda).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `out = scale·H(λ)·x` for a column-major block of `m` vectors.
    fn apply(&self, lambda: f64, scale: f64, x: &[C64], out: &mut [C64], m: usize) {
        let n = self.dim();
        for c in 0..m {
            let (xc, oc) = (&x[c * n..(c + 1) * n], &mut out[c * n..(c + 1) * n]);
            for (i, row) in self.rows.iter().enumerate() {
                oc[i] = row.iter().map(|&(j, a, b)| (a + b * lambda) * xc[j]).sum::<C64>() * scale;
            }
        }
    }

    /// `⟨ψ_c|H_λ|ψ_c⟩` per column.
    fn driving_expectations(&self, x: &[C64], m: usize) -> Vec<f64> {
        let n = self.dim();
        (0..m)
            .map(|c| {
                let xc = &x[c * n..(c + 1) * n];
                self.rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| (xc[i].conj() * row.iter().map(|&(j, _, b)| b * xc[j]).sum::<C64>()).re)
                    .sum()
            })
            .collect()
    }
}

/// `J_0(x) … J_kmax(x)` by Miller's backward recurrence, normalized with `J₀ + 2ΣJ_{2k} = 1`.
fn bessel_j(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = kmax + 20 + x.ceil() as usize;
    let (mut above, mut current) = (0.0_f64, 1e-30_f64);
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / x * current - above;
        (above, current) = (current, below);
        // `current` now holds the unnormalized J_{k−1}.
        if k - 1 <= kmax {
            out[k - 1] = current;
        }
        if (k - 1) % 2 == 0 {
            norm += if k == 1 { current } else { 2.0 * current };
        }
        if current.abs() > 1e250 {
            above *= 1e-250;
            current *= 1e-250;
            norm *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Replaces the block `psi` by `exp(−iH(λ)dt)·psi` through a Chebyshev series in `H/g`,
/// `g` a bound on `‖H‖`, truncated once the Bessel weights fall below `1e−18`.
fn chebyshev_step(h: &SparseAffine, lambda: f64, dt: f64, psi: &mut [C64], m: usize, work: &mut [Vec<C64>; 3]) -> Result<()> {
    let g = h.norm_bound(lambda);
    if g * dt > STEP_BUDGET {
        return Err(budget_error(dt, g));
    }
    let x = g * dt;
    if x == 0.0 {
        return Ok(());
    }
    let kmax = (x + 8.0 * x.cbrt() + 20.0).ceil() as usize;
    let j = bessel_j(x, kmax);
    let [prev, cur, next] = work;
    let inv = 1.0 / g;
    prev.copy_from_slice(psi);
    h.apply(lambda, inv, prev, cur, m);
    // (−i)^k cycles through 1, −i, −1, i.
    let phase = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)];
    let w1 = phase[1] * (2.0 * j[1]);
    for (p, (a, b)) in psi.iter_mut().zip(prev.iter().zip(cur.iter())) {
        *p = a * j[0] + b * w1;
    }
    for k in 2..=kmax {
        if k as f64 > x && j[k].abs() < 1e-18 {
            break;
        }
        h.apply(lambda, 2.0 * inv, cur, next, m);
        let w = phase[k % 4] * (2.0 * j[k]);
        for ((p, nx), pv) in psi.iter_mut().zip(next.iter_mut()).zip(prev.iter()) {
            *nx -= pv;
            *p += *nx * w;
        }
        std::mem::swap(prev, cur);
        std::mem::swap(cur, next);
    }
    Ok(())
}

/// Piecewise-constant propagation `U = Π_j exp(−iH(t_j)Δt)` with midpoints `t_j = (j+½)Δt`.
///
/// Each step's exponential is applied to the states by a Chebyshev series
/// converged to machine precision, using sparse products with `H`. With
/// `want_unitary` the full propagator is accumulated as well.
pub fn evolve(spec: &LatticeSpec, parameter: usize, schedule: &RampSchedule, initial: &[Vec<C64>], want_unitary: bool) -> Result<Evolution> {
    let dim = spec.dim();
    for (m, v) in initial.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::InvalidArgument(format!("initial state {m} has dimension {}, expected {dim}", v.len())));
        }
        let n = linalg::norm(v);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(n));
        }
    }
    let h = SparseAffine::new(spec, parameter)?;
    let mut columns: Vec<Vec<C64>> = initial.to_vec();
    if want_unitary {
        columns.extend((0..dim).map(|i| (0..dim).map(|j| if i == j { C64::new(1.0, 0.0) } else { ZERO }).collect()));
    }
    let (finals, integrals) = propagate_sparse(&h, schedule, &columns)?;
    let k = initial.len();
    let states: Vec<Vec<C64>> = finals[..k].to_vec();
    let (unitary, defect) = if want_unitary {
        let u = Mat::from_fn(dim, dim, |i, j| finals[k + j][i]);
        let mut worst = 0.0_f64;
        for a in 0..dim {
            for b in 0..dim {
                let g = linalg::vdot(&finals[k + a], &finals[k + b]);
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - C64::new(target, 0.0)).norm());
            }
        }
        (Some(u), worst)
    } else {
        (None, states.iter().map(|s| (linalg::norm(s) - 1.0).abs()).fold(0.0, f64::max))
    };
    Ok(Evolution {
        states,
        unitary,
        unitarity_defect: defect,
        driving_integrals: integrals[..k].to_vec(),
    })
}

fn budget_error(dt: f64, norm: f64) -> Error {
    Error::Accuracy(format!(
        "step dt·‖H‖ = {:.3} exceeds the budget of {STEP_BUDGET}; increase the step count",
        dt * norm
    ))
}

fn propagate_sparse(h: &SparseAffine, sched: &RampSchedule, states: &[Vec<C64>]) -> Result<(Vec<Vec<C64>>, Vec<f64>)> {
    let n = h.dim();
    let m = states.len();
    let mut psi: Vec<C64> = states.iter().flatten().copied().collect();
    let mut work = [vec![ZERO; n * m], vec![ZERO; n * m], vec![ZERO; n * m]];
    let dt = sched.dt();
    let mut integrals = vec![0.0; m];
    let mut prev = h.driving_expectations(&psi, m);
    for j in 0..sched.steps {
        let lambda = sched.lambda_at((j as f64 + 0.5) * dt);
        chebyshev_step(h, lambda, dt, &mut psi, m, &mut work)?;
        let now = h.driving_expectations(&psi, m);
        for c in 0..m {
            integrals[c] += 0.5 * dt * (prev[c] + now[c]);
        }
        prev = now;
    }
    Ok((psi.chunks(n).map(|c| c.to_vec()).collect(), integrals))
}

/// Dense reference: every step diagonalizes `H` and exponentiates exactly.
#[cfg(test)]
fn propagate_general(h0: &linalg::DenseHermitian, d: &linalg::DenseHermitian, sched: &RampSchedule, states: &[Vec<C64>]) -> Result<(Vec<Vec<C64>>, Vec<f64>)> {
    let dim = h0.dim();
    let m = states.len();
    let mut psi = Mat::from_fn(dim, m, |i, c| states[c][i]);
    let expect = |psi: &Mat<C64>| -> Vec<f64> {
        let dp = d.matrix() * psi;
        (0..m).map(|c| (0..dim).map(|i| (psi[(i, c)].conj() * dp[(i, c)]).re).sum()).collect()
    };
    let dt = sched.dt();
    let mut integrals = vec![0.0; m];
    let mut prev = expect(&psi);
    for j in 0..sched.steps {
        let lambda = sched.lambda_at((j as f64 + 0.5) * dt);
        let h = Mat::from_fn(dim, dim, |r, c| h0.get(r, c) + d.get(r, c) * lambda);
        let (e, w) = linalg::herm_eigen(h.as_ref(), true)?;
        let norm = e.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if norm * dt > STEP_BUDGET {
            return Err(budget_error(dt, norm));
        }
        let mut coeff = w.adjoint() * &psi;
        for (k, ek) in e.iter().enumerate() {
            let (sn, cs) = (ek * dt).sin_cos();
            let phase = C64::new(cs, -sn);
            for c in 0..m {
                coeff[(k, c)] *= phase;
            }
        }
        psi = &w * &coeff;
        let now = expect(&psi);
        for c in 0..m {
            integrals[c] += 0.5 * dt * (prev[c] + now[c]);
        }
        prev = now;
    }
    Ok(((0..m).map(|c| linalg::column(psi.as_ref(), c)).collect(), integrals))
}

/// How the two GHZ branches are chosen at `λ(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchBasis {
    /// The two left, sublattice-A polarized zero modes.
    SublatticePolarized,
    /// The chiral partners `(u_k, ±v_k)/√2` of the `k`-th smallest singular value.
    ChiralPair(usize),
}

pub fn initial_branches(spec: &LatticeSpec, basis: BranchBasis) -> Result<[Vec<C64>; 2]> {
    match basis {
        BranchBasis::SublatticePolarized => {
            let spectrum = eigh(&models::hamiltonian(spec)?)?;
            let modes: Vec<_> = metrology::select_zero_modes(spec, &spectrum)?
                .into_iter()
                .filter(|m| m.edge == Edge::Left && m.sublattice == Sublattice::A)
                .collect();
            if modes.len() != 2 {
                return Err(Error::InvalidArgument(format!("expected 2 left A-polarized modes, found {}", modes.len())));
            }
            let mut two = modes.into_iter().map(|m| m.state);
            Ok([two.next().unwrap(), two.next().unwrap()])
        }
        BranchBasis::ChiralPair(k) => {
            let x = models::chiral_block(spec)?;
            let svd = linalg::svd_ascending(x.as_ref())?;
            if k >= svd.s.len() {
                return Err(Error::InvalidArgument(format!("singular index {k} out of range")));
            }
            let (a_idx, b_idx) = spec.sublattice_indices().expect("chiral family");
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let build = |sign: f64| {
                let mut s = vec![ZERO; spec.dim()];
                a_idx.iter().enumerate().for_each(|(i, &g)| s[g] = svd.u[(i, k)] * h);
                b_idx.iter().enumerate().for_each(|(i, &g)| s[g] = svd.v[(i, k)] * (h * sign));
                s
            };
            Ok([build(1.0), build(-1.0)])
        }
    }
}

/// Options for the finite-difference part of [`branch_coefficients`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifferenceOptions {
    /// Initial shift as a fraction of the ramp amplitude.
    pub relative_delta: f64,
    /// Extrapolate the state derivative over `δ` and `δ/2`.
    pub richardson: bool,
}

impl Default for DifferenceOptions {
    fn default() -> Self {
        Self {
            relative_delta: 1e-4,
            richardson: false,
        }
    }
}

/// Final branch states at `λ` and at the shifted ramps, with the time integrals.
#[derive(Clone, Debug)]
pub struct BranchRun {
    pub schedule: RampSchedule,
    pub delta: f64,
    pub center: [Vec<C64>; 2],
    pub minus: [Vec<C64>; 2],
    pub plus: [Vec<C64>; 2],
    /// `∂_λψ_μ(T)`, Richardson-refined if requested.
    pub derivative: [Vec<C64>; 2],
    pub integrals: [f64; 2],
    pub unitarity_defect: f64,
}

fn pair(v: Vec<Vec<C64>>) -> [Vec<C64>; 2] {
    let mut it = v.into_iter();
    [it.next().unwrap(), it.next().unwrap()]
}

fn central(plus: &[Vec<C64>; 2], minus: &[Vec<C64>; 2], delta: f64) -> [Vec<C64>; 2] {
    let f = |p: &Vec<C64>, m: &Vec<C64>| p.iter().zip(m).map(|(a, b)| (a - b) / (2.0 * delta)).collect::<Vec<_>>();
    [f(&plus[0], &minus[0]), f(&plus[1], &minus[1])]
}

/// Evolves both branches at `λ` and `λ ± δ`.
///
/// `δ` starts at `relative_delta` times the ramp amplitude and is reduced once
/// so that `δ·‖∂ψ‖ ≤ 1e−3`, which keeps the difference in its linear regime.
pub fn run_branches(spec: &LatticeSpec, parameter: usize, schedule: &RampSchedule, basis: BranchBasis, options: DifferenceOptions) -> Result<BranchRun> {
    let start = spec.with_parameter(parameter, schedule.lambda_start)?;
    let init = initial_branches(&start, basis)?;
    let init = init.to_vec();
    let center = evolve(spec, parameter, schedule, &init, false)?;
    let shifted = |delta: f64| -> Result<(Evolution, Evolution)> {
        let runs = crate::par::try_map(&[delta, -delta], |&d| evolve(spec, parameter, &schedule.shifted(d), &init, false))?;
        let mut it = runs.into_iter();
        Ok((it.next().unwrap(), it.next().unwrap()))
    };
    let mut delta = options.relative_delta * schedule.step_scale();
    let (mut p, mut m) = shifted(delta)?;
    let mut deriv = central(&pair(p.states.clone()), &pair(m.states.clone()), delta);
    let size = deriv.iter().map(|d| linalg::norm(d)).fold(0.0, f64::max);
    if delta * size > 1e-3 {
        delta = 1e-3 / size;
        (p, m) = shifted(delta)?;
        deriv = central(&pair(p.states.clone()), &pair(m.states.clone()), delta);
    }
    let mut defect = center.unitarity_defect.max(p.unitarity_defect).max(m.unitarity_defect);
    if options.richardson {
        let (ph, mh) = shifted(delta / 2.0)?;
        defect = defect.max(ph.unitarity_defect).max(mh.unitarity_defect);
        let half = central(&pair(ph.states), &pair(mh.states), delta / 2.0);
        for (d, h) in deriv.iter_mut().zip(&half) {
            d.iter_mut().zip(h).for_each(|(x, y)| *x = (y * 4.0 - *x) / 3.0);
        }
    }
    Ok(BranchRun {
        schedule: *schedule,
        delta,
        center: pair(center.states),
        minus: pair(m.states),
        plus: pair(p.states),
        derivative: deriv,
        integrals: [center.driving_integrals[0], center.driving_integrals[1]],
        unitarity_defect: defect,
    })
}

/// `a_μ = ⟨ψ_μ|∂ψ_μ⟩` and `b_μ = ⟨∂ψ_μ|∂ψ_μ⟩` for the two branches.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchCoefficients {
    /// From the time integral, `a_μ = −i∫⟨ψ_μ|H_λ|ψ_μ⟩dτ`.
    pub a: [C64; 2],
    pub b: [f64; 2],
    /// `⟨ψ_μ|∂ψ_μ⟩` from the finite difference, kept as a cross-check.
    pub a_difference: [C64; 2],
    /// `|a_int − a_fd| / max(|a_int|, 1e−2·√b)` per branch.
    pub cross_check: [f64; 2],
    pub schedule: RampSchedule,
    pub length: usize,
    pub delta: f64,
    pub unitarity_defect: f64,
}

/// Rejection threshold for the time-integral versus finite-difference check.
pub const CROSS_CHECK_LIMIT: f64 = 1e-3;

pub fn coefficients_from_run(run: &BranchRun, length: usize) -> Result<BranchCoefficients> {
    let mut a = [ZERO; 2];
    let mut b = [0.0; 2];
    let mut a_fd = [ZERO; 2];
    let mut check = [0.0; 2];
    for mu in 0..2 {
        a[mu] = C64::new(0.0, -run.integrals[mu]);
        b[mu] = linalg::vdot(&run.derivative[mu], &run.derivative[mu]).re;
        a_fd[mu] = linalg::vdot(&run.center[mu], &run.derivative[mu]);
        let scale = a[mu].norm().max(1e-2 * b[mu].sqrt()).max(f64::MIN_POSITIVE);
        check[mu] = (a[mu] - a_fd[mu]).norm() / scale;
        if check[mu] > CROSS_CHECK_LIMIT {
            return Err(Error::Accuracy(format!(
                "branch {}: time-integral a = {} disagrees with finite-difference a = {} (relative {:.2e}); refine steps or δ",
                mu + 1,
                a[mu],
                a_fd[mu],
                check[mu]
            )));
        }
    }
    Ok(BranchCoefficients {
        a,
        b,
        a_difference: a_fd,
        cross_check: check,
        schedule: run.schedule,
        length,
        delta: run.delta,
        unitarity_defect: run.unitarity_defect,
    })
}

pub fn branch_coefficients(spec: &LatticeSpec, parameter: usize, schedule: &RampSchedule, basis: BranchBasis, options: DifferenceOptions) -> Result<BranchCoefficients> {
    coefficients_from_run(&run_branches(spec, parameter, schedule, basis, options)?, spec.length())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhzQfi {
    pub n: usize,
    pub value: f64,
    pub interference: f64,
    pub eigenstate: f64,
}

/// `N²|a₁ − a₂|² + 2N[(b₁ − |a₁|²) + (b₂ − |a₂|²)]`.
pub fn ghz_qfi(coeffs: &BranchCoefficients, n: usize) -> Result<GhzQfi> {
    if n < 1 {
        return Err(Error::InvalidArgument("particle number must be at least 1".into()));
    }
    let nf = n as f64;
    let interference = nf * nf * (coeffs.a[0] - coeffs.a[1]).norm_sqr();
    let eigenstate = 2.0 * nf * (0..2).map(|mu| coeffs.b[mu] - coeffs.a[mu].norm_sqr()).sum::<f64>();
    Ok(GhzQfi {
        n,
        value: interference + eigenstate,
        interference,
        eigenstate,
    })
}

/// QFI of the materialized two-particle state `(ψ₁⊗ψ₁ + ψ₂⊗ψ₂)/√2` from the run's three ramps.
pub fn ghz_tensor_qfi(run: &BranchRun) -> Result<f64> {
    let ghz = |s: &[Vec<C64>; 2]| -> Vec<C64> {
        let n = s[0].len();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (s[0][i] * s[0][j] + s[1][i] * s[1][j]) * h;
            }
        }
        out
    };
    let r = metrology::qfi_state_derivative(&ghz(&run.minus), &ghz(&run.center), &ghz(&run.plus), run.schedule.lambda_end, run.delta)?;
    Ok(r.value)
}

/// Inputs of the dynamical-phase decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFormData {
    /// `∂_λθ` with `θ = −∫₀ᵀ (E₂ − E₁) dt` along the tracked branches.
    pub theta_derivative: f64,
    /// `⟨∂_λE_μ|∂_λE_μ⟩` of the tracked eigenstates at `λ(T)` (perturbative sums).
    pub eigen_derivative_norms: [f64; 2],
    pub delta: f64,
}

/// Relative dynamical phase along the ramp, following instantaneous eigenstates by overlap.
fn dynamical_phase(spec: &LatticeSpec, parameter: usize, sched: &RampSchedule, branches: (usize, usize), samples: usize) -> Result<(f64, [usize; 2])> {
    let at = |t: f64| -> Result<spectra::Spectrum> { eigh(&models::hamiltonian(&spec.with_parameter(parameter, sched.lambda_at(t))?)?) };
    let dt = sched.total_time / samples as f64;
    let first = at(0.0)?;
    let mut idx = [branches.0, branches.1];
    if idx.iter().any(|&i| i >= first.len()) {
        return Err(Error::InvalidArgument("branch index out of range".into()));
    }
    let mut refs = [first.state(idx[0]), first.state(idx[1])];
    let scale = first.energies.iter().fold(0.0_f64, |m, e| m.max(e.abs())).max(1.0);
    let mut theta = 0.0;
    for j in 0..samples {
        let s = at((j as f64 + 0.5) * dt)?;
        for mu in 0..2 {
            let ov = linalg::adjoint_matvec(s.states.as_ref(), &refs[mu]);
            let mut order: Vec<usize> = (0..ov.len()).collect();
            order.sort_by(|&a, &b| ov[b].norm().total_cmp(&ov[a].norm()));
            let (best, second) = (order[0], order[1]);
            let tie = ov[best].norm() - ov[second].norm() < metrology::TRACKING_MARGIN;
            if tie && (s.energies[best] - s.energies[second]).abs() > 1e-12 * scale {
                return Err(Error::Tracking(format!("branch {} lost at t = {:.4}", mu + 1, (j as f64 + 0.5) * dt)));
            }
            idx[mu] = best;
            refs[mu] = s.state(best);
        }
        theta -= (s.energies[idx[1]] - s.energies[idx[0]]) * dt;
    }
    Ok((theta, idx))
}

/// Gathers the phase-form ingredients; `branches` index eigenstates of `H(λ(0))`.
pub fn phase_form_data(spec: &LatticeSpec, parameter: usize, schedule: &RampSchedule, branches: (usize, usize), samples: usize) -> Result<PhaseFormData> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let delta = 1e-4 * schedule.step_scale();
    let (_, idx) = dynamical_phase(spec, parameter, schedule, branches, samples)?;
    let (tp, _) = dynamical_phase(spec, parameter, &schedule.shifted(delta), branches, samples)?;
    let (tm, _) = dynamical_phase(spec, parameter, &schedule.shifted(-delta), branches, samples)?;
    let end = spec.with_parameter(parameter, schedule.lambda_end)?;
    let spectrum = eigh(&models::hamiltonian(&end)?)?;
    let drive = DrivingTerm::new(&end, parameter)?;
    let mut norms = [0.0; 2];
    for mu in 0..2 {
        norms[mu] = metrology::qfi_perturbative(&spectrum, &drive, idx[mu], None)?.value / 4.0;
    }
    Ok(PhaseFormData {
        theta_derivative: (tp - tm) / (2.0 * delta),
        eigen_derivative_norms: norms,
        delta,
    })
}

/// `N²(∂_λθ)² + 2N(⟨∂E₁|∂E₁⟩ + ⟨∂E₂|∂E₂⟩)`.
pub fn ghz_qfi_phase_form(data: &PhaseFormData, n: usize) -> Result<GhzQfi> {
    if n < 1 {
        return Err(Error::InvalidArgument("particle number must be at least 1".into()));
    }
    let nf = n as f64;
    let interference = nf * nf * data.theta_derivative.powi(2);
    let eigenstate = 2.0 * nf * (data.eigen_derivative_norms[0] + data.eigen_derivative_norms[1]);
    Ok(GhzQfi {
        n,
        value: interference + eigenstate,
        interference,
        eigenstate,
    })
}

/// Settings shared by every size of a GHZ scaling surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceOptions {
    pub lambda_end: f64,
    pub shape: RampShape,
    /// `T = c·L^p`; `None` selects `c = 20·|λ(0) − λ_c| / gap(λ(0))`.
    pub time_constant: Option<f64>,
    pub time_exponent: f64,
    /// Overrides the default step count when set.
    pub steps: Option<usize>,
    pub basis: BranchBasis,
    pub difference: DifferenceOptions,
}

/// Default ramp constant `c = 20·|λ(0) − λ_c| / gap(λ(0))`.
pub fn default_time_constant(start: &LatticeSpec, parameter: usize, lambda_end: f64) -> Result<f64> {
    let gap = spectra::bulk_gap(start);
    if gap <= 0.0 {
        return Err(Error::Critical("starting point is gapless".into()));
    }
    Ok(20.0 * (start.parameters()[parameter] - lambda_end).abs() / gap)
}

/// Schedule for one size: `T = c·L^p`, steps from the coupling-norm bound.
pub fn schedule_for(start: &LatticeSpec, parameter: usize, options: &SurfaceOptions) -> Result<RampSchedule> {
    let c = match options.time_constant {
        Some(c) => c,
        None => default_time_constant(start, parameter, options.lambda_end)?,
    };
    let t = c * (start.length() as f64).powf(options.time_exponent);
    let lambda_start = start.parameters()[parameter];
    let norm = [lambda_start, options.lambda_end]
        .iter()
        .map(|&l| start.with_parameter(parameter, l).map(|s| s.parameters().iter().map(|x| x.abs()).sum::<f64>()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let steps = options.steps.unwrap_or_else(|| RampSchedule::default_steps(t, norm));
    RampSchedule::new(options.shape, lambda_start, options.lambda_end, t, steps)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceRow {
    pub length: usize,
    pub qfi: GhzQfi,
}

#[derive(Clone, Debug)]
pub struct GhzSurface {
    /// Ordered by size, then particle number.
    pub rows: Vec<SurfaceRow>,
    pub coefficients: Vec<BranchCoefficients>,
    pub fit: JointFit,
}

/// `F_Q(N, L)` over a grid and the joint fit `F_Q ∝ N^α L^β`.
pub fn ghz_scaling_surface<F>(family: F, parameter: usize, sizes: &[usize], ns: &[usize], options: &SurfaceOptions) -> Result<GhzSurface>
where
    F: Fn(usize) -> Result<LatticeSpec> + Sync,
{
    if sizes.is_empty() || ns.is_empty() {
        return Err(Error::InvalidArgument("sizes and particle numbers must be non-empty".into()));
    }
    let coefficients = crate::par::try_map(sizes, |&l| {
        let start = family(l)?;
        let schedule = schedule_for(&start, parameter, options)?;
        branch_coefficients(&start, parameter, &schedule, options.basis, options.difference)
    })?;
    let mut rows = Vec::new();
    for (c, &l) in coefficients.iter().zip(sizes) {
        for &n in ns {
            rows.push(SurfaceRow { length: l, qfi: ghz_qfi(c, n)? });
        }
    }
    let nf: Vec<f64> = rows.iter().map(|r| r.qfi.n as f64).collect();
    let lf: Vec<f64> = rows.iter().map(|r| r.length as f64).collect();
    let yf: Vec<f64> = rows.iter().map(|r| r.qfi.value).collect();
    let fit = fit_joint_power_law(&nf, &lf, &yf)?;
    Ok(GhzSurface { rows, coefficients, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Boundary, CouplingVector};

    fn cv(x: &[f64]) -> CouplingVector {
        CouplingVector::new(x.to_vec()).unwrap()
    }

    fn coeffs(a: [C64; 2], b: [f64; 2]) -> BranchCoefficients {
        BranchCoefficients {
            a,
            b,
            a_difference: a,
            cross_check: [0.0; 2],
            schedule: RampSchedule::new(RampShape::Linear, 0.0, 1.0, 1.0, 100).unwrap(),
            length: 4,
            delta: 0.0,
            unitarity_defect: 0.0,
        }
    }

    #[test]
    fn closed_form_anchors() {
        let i = C64::new(0.0, 1.0);
        assert_eq!(ghz_qfi(&coeffs([ZERO, i], [0.0, 1.0]), 3).unwrap().value, 9.0);
        assert_eq!(ghz_qfi(&coeffs([i, i], [1.0, 1.0]), 5).unwrap().value, 0.0);
        assert!(ghz_qfi(&coeffs([i, i], [1.0, 1.0]), 0).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(RampSchedule::new(RampShape::Linear, 2.0, 1.0, 0.0, 200).is_err());
        assert!(RampSchedule::new(RampShape::Linear, 2.0, 1.0, 1.0, 99).is_err());
        let s = RampSchedule::new(RampShape::Cubic, 2.0, 1.0, 10.0, 200).unwrap();
        assert_eq!(s.lambda_at(10.0), 1.0);
        assert_eq!(s.lambda_at(0.0), 2.0);
    }

    #[test]
    fn constant_hamiltonian_matches_exponential() {
        let spec = LatticeSpec::essh(cv(&[1.0, 0.7, 0.3]), 6, Boundary::Open).unwrap();
        let sched = RampSchedule::new(RampShape::Linear, 0.3, 0.3, 2.5, 100).unwrap();
        let chiral = evolve(&spec, 2, &sched, &[], true).unwrap();
        let h = models::hamiltonian(&spec).unwrap();
        let s = eigh(&h).unwrap();
        let n = spec.dim();
        let exact = Mat::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| {
                    let ph = -s.energies[k] * 2.5;
                    s.states[(i, k)] * C64::new(ph.cos(), ph.sin()) * s.states[(j, k)].conj()
                })
                .sum::<C64>()
        });
        let u = chiral.unitary.unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((u[(i, j)] - exact[(i, j)]).norm() < 1e-10);
            }
        }
        assert!(chiral.unitarity_defect < 1e-10);
    }

    #[test]
    fn bessel_values() {
        let j = bessel_j(1.0, 30);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        let j = bessel_j(10.0, 50);
        assert!((j[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
        let total = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chebyshev_matches_spectral_steps() {
        let spec = LatticeSpec::essh(cv(&[1.0, 2.0, 2.0]), 8, Boundary::Open).unwrap();
        let sched = RampSchedule::new(RampShape::Linear, 2.0, 1.0, 3.0, 300).unwrap();
        let mut psi = vec![ZERO; spec.dim()];
        psi[0] = C64::new(0.6, 0.0);
        psi[3] = C64::new(0.0, 0.8);
        let fast = evolve(&spec, 2, &sched, &[psi.clone()], false).unwrap();
        let h0 = models::hamiltonian(&spec.with_parameter(2, 0.0).unwrap()).unwrap();
        let d = models::driving_term(&spec, 2).unwrap();
        let (slow, ints) = propagate_general(&h0, &d, &sched, &[psi]).unwrap();
        assert!(fast.unitarity_defect < 1e-13);
        for (a, b) in fast.states[0].iter().zip(&slow[0]) {
            assert!((a - b).norm() < 1e-11);
        }
        assert!((fast.driving_integrals[0] - ints[0]).abs() < 1e-11);
    }

    #[test]
    fn polarized_branches_have_vanishing_a() {
        let spec = LatticeSpec::essh(cv(&[1.0, 2.0, 2.0]), 12, Boundary::Open).unwrap();
        let sched = RampSchedule::new(RampShape::Linear, 2.0, 2.0, 0.5, 200).unwrap();
        let c = branch_coefficients(&spec, 2, &sched, BranchBasis::SublatticePolarized, DifferenceOptions::default()).unwrap();
        for mu in 0..2 {
            assert!(c.a[mu].norm() < 1e-12);
            assert!(c.b[mu] >= c.a[mu].norm_sqr() - 1e-8);
        }
    }

    #[test]
    fn degenerate_branches_have_no_interference() {
        // Two decoupled dimers with equal energies.
        let spec = LatticeSpec::essh(cv(&[1.0, 0.0]), 4, Boundary::Open).unwrap();
        let sched = RampSchedule::new(RampShape::Linear, 0.0, 0.0, 1.0, 100).unwrap();
        let d = phase_form_data(&spec, 1, &sched, (0, 1), 16).unwrap();
        assert!(ghz_qfi_phase_form(&d, 4).unwrap().interference < 1e-16);
    }
}
