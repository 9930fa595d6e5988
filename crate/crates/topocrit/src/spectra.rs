//! Spectra, band touchings and finite-size gaps.

use std::f64::consts::PI;

use faer::Mat;

use crate::edgetheory::edge_roots;
use crate::error::{Error, Result};
use crate::fit::{fit_power_law, ScalingFit};
use crate::linalg::{self, DenseHermitian, C64};
use crate::models::{self, bloch_h, momentum_grid, CouplingVector, LatticeSpec, ModelFamily};

/// Eigenvalues in ascending order with matching orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub states: Mat<C64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn state(&self, index: usize) -> Vec<C64> {
        linalg::column(self.states.as_ref(), index)
    }

    /// Index of the state with the smallest `|E|`; ties go to the non-negative one.
    pub fn nearest_zero(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.energies.iter().enumerate() {
            let b = self.energies[best];
            if e.abs() < b.abs() || (e.abs() == b.abs() && *e >= 0.0 && b < 0.0) {
                best = i;
            }
        }
        best
    }
}

/// Full eigendecomposition; deterministic for identical input bits.
pub fn eigh(h: &DenseHermitian) -> Result<Spectrum> {
    let (energies, states) = linalg::herm_eigen(h.matrix(), true)?;
    Ok(Spectrum { energies, states })
}

/// Upper band `E⁺(k) = |h(k)|` on the grid `k_j = −π + 2πj/n_k`.
pub fn band_energies_1d(couplings: &CouplingVector, n_k: usize) -> Result<Vec<(f64, f64)>> {
    let need = 2 * couplings.range() + 2;
    if n_k < need {
        return Err(Error::InvalidArgument(format!("n_k = {n_k} is below 2R + 2 = {need}")));
    }
    Ok(momentum_grid(n_k)
        .into_iter()
        .map(|k| (k, bloch_h(couplings, k).norm()))
        .collect())
}

/// Location of the band minimum and, once classified, the touching order.
#[derive(Clone, Debug, PartialEq)]
pub struct TouchingPoint {
    pub k_c: f64,
    pub e_min: f64,
    pub order_p: Option<u32>,
    /// Raw exponent of the log–log fit of `E⁺` against `|k − k_c|`.
    pub fitted_exponent: Option<f64>,
    pub fit_quality: Option<f64>,
    /// Half the order of the first non-vanishing k-derivative of `|h|²`.
    pub derivative_order: Option<u32>,
    /// Fit off-integer, poor R², or disagreement with the derivative test.
    pub mixed_order: bool,
}

fn wrap_angle(k: f64) -> f64 {
    let mut k = (k + PI).rem_euclid(2.0 * PI) - PI;
    if k >= PI {
        k -= 2.0 * PI;
    }
    k
}

/// `|h(k_c + δ)|` evaluated around `k_c` without losing the small difference.
///
/// With `μ_r = λ_r e^{ik_c r}`, `h(k_c + δ) = Σ μ_r + Σ μ_r (e^{irδ} − 1)` and
/// `cos x − 1 = −2 sin²(x/2)`.
pub fn band_energy_near(couplings: &CouplingVector, k_c: f64, delta: f64) -> f64 {
    let mut base = C64::new(0.0, 0.0);
    let mut shift = C64::new(0.0, 0.0);
    for (r, &l) in couplings.entries().iter().enumerate() {
        let mu = C64::new(l * (k_c * r as f64).cos(), l * (k_c * r as f64).sin());
        let x = r as f64 * delta;
        let s = (0.5 * x).sin();
        base += mu;
        shift += mu * C64::new(-2.0 * s * s, x.sin());
    }
    (base + shift).norm()
}

fn golden_minimize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Global minimizer of `|h(k)|`.
///
/// A dense grid finds the basin, golden-section search refines it, and when the
/// minimum is numerically zero the momentum is snapped to the argument of the
/// nearest unit-circle root of `P(z) = Σ λ_r z^r`, which pins high-order
/// touchings far below the `ε^{1/p}` resolution of the direct search.
pub fn locate_band_touching(couplings: &CouplingVector) -> TouchingPoint {
    let n = (256 * (couplings.range() + 1)).max(4096);
    let grid = momentum_grid(n);
    let dk = 2.0 * PI / n as f64;
    let mut best = 0;
    let mut best_e = f64::INFINITY;
    for (i, &k) in grid.iter().enumerate() {
        let e = bloch_h(couplings, k).norm_sqr();
        if e < best_e {
            best_e = e;
            best = i;
        }
    }
    let k0 = grid[best];
    let mut k_c = golden_minimize(|k| bloch_h(couplings, k).norm_sqr(), k0 - dk, k0 + dk, 1e-12);
    let mut e_min = bloch_h(couplings, k_c).norm();
    if e_min < 1e-6 {
        if let Ok(roots) = edge_roots(couplings) {
            for root in roots.roots.iter().filter(|r| (r.z.norm() - 1.0).abs() < 1e-5) {
                let k = wrap_angle(root.z.arg());
                let near = (wrap_angle(k - k_c)).abs() < 1e-3;
                let e = band_energy_near(couplings, k, 0.0);
                if near && e <= e_min {
                    k_c = k;
                    e_min = e;
                }
            }
        }
    }
    TouchingPoint {
        k_c: wrap_angle(k_c),
        e_min,
        order_p: None,
        fitted_exponent: None,
        fit_quality: None,
        derivative_order: None,
        mixed_order: false,
    }
}

/// Largest `E_min` accepted as a genuine touching.
pub const CRITICAL_TOLERANCE: f64 = 1e-8;
/// Fitted exponents further than this from an integer are flagged.
pub const ORDER_REJECTION_BAND: f64 = 0.15;

/// Order `p` of the touching `E⁺ ∝ |k − k_c|^p` at `k_c`.
pub fn touching_order(couplings: &CouplingVector, k_c: f64) -> Result<TouchingPoint> {
    let e_min = band_energy_near(couplings, k_c, 0.0);
    if e_min > CRITICAL_TOLERANCE {
        return Err(Error::NotCritical(e_min));
    }
    let per_side = 25;
    let mut xs = Vec::with_capacity(2 * per_side);
    let mut ys = Vec::with_capacity(2 * per_side);
    for i in 0..per_side {
        let t = i as f64 / (per_side - 1) as f64;
        let d = 10f64.powf(-4.0 + 2.0 * t);
        for side in [1.0, -1.0] {
            xs.push(d);
            ys.push(band_energy_near(couplings, k_c, side * d));
        }
    }
    // Pool both sides: sort by δ, averaging the two energies in log space.
    let mut pairs: Vec<(f64, f64)> = xs.chunks(2).zip(ys.chunks(2)).map(|(x, y)| (x[0], (y[0] * y[1]).sqrt())).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (fx, fy): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let fit = fit_power_law(&fx, &fy)?;
    let p = fit.exponent.round().max(1.0) as u32;
    let derivative_order = derivative_order(couplings, k_c);
    let mixed = (fit.exponent - p as f64).abs() > ORDER_REJECTION_BAND
        || fit.r_squared < 0.999
        || derivative_order != Some(p);
    Ok(TouchingPoint {
        k_c,
        e_min,
        order_p: Some(p),
        fitted_exponent: Some(fit.exponent),
        fit_quality: Some(fit.r_squared),
        derivative_order,
        mixed_order: mixed,
    })
}

/// `|h(k)|² = C₀ + 2 Σ_{n≥1} C_n cos(nk)` with `C_n = Σ_r λ_r λ_{r+n}`; returns
/// half the order of the first derivative at `k_c` that does not vanish.
fn derivative_order(couplings: &CouplingVector, k_c: f64) -> Option<u32> {
    let l = couplings.entries();
    let c: Vec<f64> = (0..l.len()).map(|n| (0..l.len() - n).map(|r| l[r] * l[r + n]).sum()).collect();
    let max_m = 4 * l.len() + 2;
    for m in 0..=max_m {
        let (value, scale) = if m == 0 {
            let v = c[0] + 2.0 * (1..c.len()).map(|n| c[n] * (n as f64 * k_c).cos()).sum::<f64>();
            (v, c.iter().map(|x| x.abs()).sum::<f64>() * 2.0)
        } else {
            let shift = m as f64 * PI / 2.0;
            let mut v = 0.0;
            let mut s = 0.0;
            for (n, &cn) in c.iter().enumerate().skip(1) {
                let w = (n as f64).powi(m as i32);
                v += 2.0 * cn * w * (n as f64 * k_c + shift).cos();
                s += 2.0 * cn.abs() * w;
            }
            (v, s)
        };
        if scale == 0.0 {
            continue;
        }
        if value.abs() > 1e-6 * scale {
            return if m % 2 == 0 { Some((m / 2) as u32) } else { None };
        }
    }
    None
}

/// Minimal bulk energy of the infinite system, used to separate in-gap states.
pub fn bulk_gap(spec: &LatticeSpec) -> f64 {
    match spec.family() {
        ModelFamily::Essh(c) => locate_band_touching(c).e_min,
        // E² = |h(k_x)|² + |h(k_y)|² for the Γ construction.
        ModelFamily::Hoti(c) => 2f64.sqrt() * locate_band_touching(c).e_min,
        ModelFamily::Ci(p) => {
            let n = 256;
            let grid = momentum_grid(n);
            let mut best = f64::INFINITY;
            for &kx in &grid {
                for &ky in &grid {
                    let dz = p.m0 + p.lambda0 * (kx.cos() + ky.cos());
                    let g = C64::new((-kx).cos() - 1.0, (-kx).sin()) + C64::new(0.0, 1.0) * C64::new((-ky).cos() - 1.0, (-ky).sin());
                    best = best.min((dz * dz + g.norm_sqr().powi(2)).sqrt());
                }
            }
            best
        }
    }
}

/// Non-negative single-particle energies in ascending order.
///
/// For chiral families these are the singular values of the `A×B` block, so
/// the full spectrum is `±` this list.
pub fn positive_energies(spec: &LatticeSpec) -> Result<Vec<f64>> {
    if spec.is_chiral() {
        let x = models::chiral_block(spec)?;
        linalg::singular_values_ascending(x.as_ref())
    } else {
        let h = models::hamiltonian(spec)?;
        let (vals, _) = linalg::herm_eigen(h.matrix(), false)?;
        let mut abs: Vec<f64> = vals.into_iter().map(f64::abs).collect();
        abs.sort_by(f64::total_cmp);
        // Each |E| appears twice for a particle-hole paired spectrum; keep one copy per pair.
        Ok(abs.into_iter().step_by(2).collect())
    }
}

/// Bulk–edge gap: lowest bulk energy minus the largest in-gap (zero-mode) energy.
///
/// In-gap states are those below a tenth of the infinite-system gap; at
/// criticality there are none and the gap is the lowest positive energy.
pub fn bulk_edge_gap(spec: &LatticeSpec) -> Result<f64> {
    let energies = positive_energies(spec)?;
    let threshold = bulk_gap(spec) / 10.0;
    let zero_modes = energies.iter().take_while(|&&e| e < threshold).count();
    if zero_modes >= energies.len() {
        return Err(Error::InvalidArgument("every state classified as in-gap".into()));
    }
    Ok(match zero_modes {
        0 => energies[0],
        n => energies[n] - energies[n - 1],
    })
}

/// Fits `ΔE ∼ L^exponent` over the given sizes; returns the fit and raw gaps.
pub fn gap_scaling<F>(family: F, sizes: &[usize]) -> Result<ScalingFit>
where
    F: Fn(usize) -> Result<LatticeSpec> + Sync,
{
    if sizes.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 sizes, got {}", sizes.len())));
    }
    let gaps = crate::par::try_map(sizes, |&l| bulk_edge_gap(&family(l)?))?;
    if let Some((l, g)) = sizes.iter().zip(&gaps).find(|(_, g)| **g <= 0.0) {
        return Err(Error::InvalidArgument(format!("non-positive gap {g:e} at L = {l}")));
    }
    let xs: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    fit_power_law(&xs, &gaps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_essh_real, Boundary};

    fn cv(x: &[f64]) -> CouplingVector {
        CouplingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn eigh_small_anchors() {
        let d = DenseHermitian::from_fn(3, |i, j| if i == j { C64::new([3.0, 1.0, 2.0][i], 0.0) } else { C64::new(0.0, 0.0) }).unwrap();
        let s = eigh(&d).unwrap();
        assert_eq!(s.energies, vec![1.0, 2.0, 3.0]);
        assert!((s.states[(1, 0)].norm() - 1.0).abs() < 1e-15);
        let sx = DenseHermitian::from_fn(2, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0)).unwrap();
        let s = eigh(&sx).unwrap();
        assert!((s.energies[0] + 1.0).abs() < 1e-15 && (s.energies[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn band_anchors() {
        assert!(band_energies_1d(&cv(&[1.0, 0.0]), 64).unwrap().iter().all(|(_, e)| (*e - 1.0).abs() < 1e-15));
        assert!(band_energies_1d(&cv(&[1.0, 2.0, 1.0]), 5).is_err());
        let b = band_energies_1d(&cv(&[1.0, -4.0, 6.0, -4.0, 1.0]), 1024).unwrap();
        let (k, e) = b.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(k, 0.0);
        assert!(e < 1e-13);
    }

    #[test]
    fn locate_anchors() {
        let t = locate_band_touching(&cv(&[1.0, -1.0]));
        assert!(t.k_c.abs() < 1e-8 && t.e_min < 1e-12);
        let t = locate_band_touching(&cv(&[1.0, 2.0, 1.0]));
        assert!((t.k_c.abs() - PI).abs() < 1e-8 && t.e_min < 1e-12, "{t:?}");
        let t = locate_band_touching(&cv(&[1.0, -4.0, 0.0, -4.0, 1.0]));
        assert!(t.e_min < 1e-12, "{t:?}");
        let t = locate_band_touching(&cv(&[2.0, 1.0]));
        assert!((t.e_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quartic_touching_is_pinned() {
        let c = cv(&[1.0, -4.0, 6.0, -4.0, 1.0]);
        let t = locate_band_touching(&c);
        assert!(t.k_c.abs() < 1e-8, "{t:?}");
        let p = touching_order(&c, t.k_c).unwrap();
        assert_eq!(p.order_p, Some(4));
        assert!(!p.mixed_order, "{p:?}");
    }

    #[test]
    fn non_critical_rejected() {
        assert!(matches!(touching_order(&cv(&[2.0, 1.0]), PI), Err(Error::NotCritical(_))));
    }

    #[test]
    fn near_evaluation_matches_direct() {
        let c = cv(&[0.3, -1.2, 0.7, 2.0]);
        for d in [1e-2, 0.3, -0.7] {
            assert!((band_energy_near(&c, 0.4, d) - bloch_h(&c, 0.4 + d).norm()).abs() < 1e-13);
        }
    }

    #[test]
    fn chiral_energies_match_full_spectrum() {
        let spec = LatticeSpec::essh(cv(&[1.0, 2.0, 0.5]), 12, Boundary::Open).unwrap();
        let pos = positive_energies(&spec).unwrap();
        let full = eigh(&build_essh_real(&spec).unwrap()).unwrap();
        for (i, e) in pos.iter().enumerate() {
            assert!((full.energies[12 + i] - e).abs() < 1e-12);
            assert!((full.energies[11 - i] + e).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_gap_family() {
        let fit = gap_scaling(|l| LatticeSpec::essh(cv(&[1.0]), l, Boundary::Open), &[8, 16, 32, 64]).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
    }
}
