//! Edge modes from the boundary polynomial.
//!
//! A left zero mode `φ_j` on sublattice A obeys `Σ_r λ_r φ_{j+r} = 0` (real
//! couplings, so no conjugation appears). Each root `z` of
//! `P(z) = Σ_r λ_r z^r` with multiplicity `m` contributes the solutions
//! `j^s z^j`, `s < m`; the normalizable ones (`|z| < 1`) are the edge modes and
//! their count equals the winding number of `h(k) = P(e^{ik})`.

use crate::error::{Error, Result};
use crate::fit::{fit_power_law, ScalingFit};
use crate::linalg::{self, C64, ZERO};
use crate::models::CouplingVector;
use faer::Mat;

/// A root of the boundary polynomial with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub z: C64,
    pub multiplicity: usize,
}

/// All roots of `P(z)`, sorted by modulus and then argument.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRootSet {
    pub couplings: CouplingVector,
    pub roots: Vec<Root>,
    /// Roots with `|z| < 1`, counted with multiplicity (`z = 0` included).
    pub inside_count: usize,
    /// Roots with `||z| − 1| ≤ ON_CIRCLE_TOLERANCE`, counted with multiplicity.
    pub on_circle_count: usize,
}

pub const ON_CIRCLE_TOLERANCE: f64 = 1e-9;

impl EdgeRootSet {
    pub fn degree(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn is_critical(&self) -> bool {
        self.on_circle_count > 0
    }
}

fn horner(q: &[C64], z: C64) -> C64 {
    q.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
}

fn derivative(q: &[C64]) -> Vec<C64> {
    q.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect()
}

/// Newton on `D` from `z0`, keeping only steps that reduce `|D|` and stay within `radius`.
fn newton_polish(d: &[C64], z0: C64, radius: f64) -> C64 {
    if d.len() < 2 {
        return z0;
    }
    let dd = derivative(d);
    let mut z = z0;
    let mut fz = horner(d, z).norm();
    for _ in 0..12 {
        let slope = horner(&dd, z);
        if slope.norm() == 0.0 {
            break;
        }
        let next = z - horner(d, z) / slope;
        let fnext = horner(d, next).norm();
        if fnext >= fz || (next - z0).norm() > radius {
            break;
        }
        let step = (next - z).norm();
        z = next;
        fz = fnext;
        if step <= 1e-16 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Roots of `P(z) = Σ λ_r z^r` from the companion-matrix eigenproblem.
///
/// Floating point splits an `m`-fold root into a ring of radius `~(ε·cond)^{1/m}`,
/// so the merge radius grows with the candidate multiplicity (never below
/// `1e−6·max(1, |z|)`). Each merged cluster is placed at its centroid and polished
/// by Newton iteration on `P^{(m−1)}`, for which the root is simple.
pub fn edge_roots(couplings: &CouplingVector) -> Result<EdgeRootSet> {
    let Some(top) = couplings.effective_range() else {
        return Err(Error::InvalidCouplings("degenerate boundary polynomial: all couplings vanish".into()));
    };
    let entries = couplings.entries();
    let zeros_at_origin = entries.iter().position(|&x| x != 0.0).unwrap_or(0);
    let q: Vec<C64> = entries[zeros_at_origin..=top]
        .iter()
        .map(|&x| C64::new(x / entries[top], 0.0))
        .collect();
    let deg = q.len() - 1;
    let mut roots: Vec<Root> = Vec::new();
    if zeros_at_origin > 0 {
        roots.push(Root {
            z: ZERO,
            multiplicity: zeros_at_origin,
        });
    }
    if deg > 0 {
        let companion = Mat::<C64>::from_fn(deg, deg, |i, j| {
            if j == deg - 1 {
                -q[i]
            } else if i == j + 1 {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        let raw = linalg::eigenvalues_general(companion.as_ref())?;
        let cond: f64 = q.iter().map(|c| c.norm()).sum();
        roots.extend(cluster_roots(&q, raw, cond));
    }
    roots.sort_by(|a, b| a.z.norm().total_cmp(&b.z.norm()).then(a.z.arg().total_cmp(&b.z.arg())));
    let inside_count = roots.iter().filter(|r| r.z.norm() < 1.0 - ON_CIRCLE_TOLERANCE).map(|r| r.multiplicity).sum();
    let on_circle_count = roots
        .iter()
        .filter(|r| (r.z.norm() - 1.0).abs() <= ON_CIRCLE_TOLERANCE)
        .map(|r| r.multiplicity)
        .sum();
    Ok(EdgeRootSet {
        couplings: couplings.clone(),
        roots,
        inside_count,
        on_circle_count,
    })
}

fn merge_radius(m: usize, z: C64, cond: f64) -> f64 {
    let base = if m == 1 { 0.0 } else { 10.0 * (f64::EPSILON * cond * m as f64).powf(1.0 / m as f64) };
    z.norm().max(1.0) * base.max(1e-6)
}

fn cluster_roots(q: &[C64], mut raw: Vec<C64>, cond: f64) -> Vec<Root> {
    raw.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    let mut used = vec![false; raw.len()];
    let mut out = Vec::new();
    for i in 0..raw.len() {
        if used[i] {
            continue;
        }
        let mut near: Vec<usize> = (0..raw.len()).filter(|&j| !used[j]).collect();
        near.sort_by(|&a, &b| (raw[a] - raw[i]).norm().total_cmp(&(raw[b] - raw[i]).norm()));
        let mut members = vec![i];
        for m in (2..=near.len()).rev() {
            let cand = &near[..m];
            let diameter = cand
                .iter()
                .flat_map(|&a| cand.iter().map(move |&b| (a, b)))
                .map(|(a, b)| (raw[a] - raw[b]).norm())
                .fold(0.0, f64::max);
            if diameter <= merge_radius(m, raw[i], cond) {
                members = cand.to_vec();
                break;
            }
        }
        members.iter().for_each(|&j| used[j] = true);
        let m = members.len();
        let centroid = members.iter().map(|&j| raw[j]).sum::<C64>() / m as f64;
        let mut d = q.to_vec();
        for _ in 1..m {
            d = derivative(&d);
        }
        let radius = merge_radius(m, centroid, cond).max(1e-6 * centroid.norm().max(1.0));
        out.push(Root {
            z: newton_polish(&d, centroid, radius),
            multiplicity: m,
        });
    }
    out
}

/// One analytic left edge mode `φ_j ∝ j^s z^j`, `j = 1..L`, on sublattice A.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticEdgeMode {
    pub amplitudes: Vec<C64>,
    pub root: C64,
    pub power: usize,
}

/// Modes for every root inside or on the unit circle, normalized.
///
/// A root at the origin of multiplicity `m` stands for the sites that no
/// hopping reaches from the left; its modes are `δ_{j,s+1}`.
pub fn analytic_edge_modes(roots: &EdgeRootSet, length: usize) -> Result<Vec<AnalyticEdgeMode>> {
    let mut modes = Vec::new();
    for root in roots.roots.iter().filter(|r| r.z.norm() <= 1.0 + ON_CIRCLE_TOLERANCE) {
        for s in 0..root.multiplicity {
            let mut amplitudes: Vec<C64> = if root.z == ZERO {
                (1..=length).map(|j| if j == s + 1 { C64::new(1.0, 0.0) } else { ZERO }).collect()
            } else {
                let mut zj = C64::new(1.0, 0.0);
                (1..=length)
                    .map(|j| {
                        zj *= root.z;
                        zj * (j as f64).powi(s as i32)
                    })
                    .collect()
            };
            linalg::normalize(&mut amplitudes);
            modes.push(AnalyticEdgeMode {
                amplitudes,
                root: root.z,
                power: s,
            });
        }
    }
    if modes.is_empty() {
        return Err(Error::TrivialPhase("no root inside or on the unit circle, so no left edge modes".into()));
    }
    Ok(modes)
}

/// Largest `|Σ_r λ_r φ_{j+r}|` over the bulk rows `1 ≤ j ≤ L − R`.
pub fn recursion_residual(couplings: &CouplingVector, amplitudes: &[C64]) -> f64 {
    let r_max = couplings.range();
    if amplitudes.len() <= r_max {
        return 0.0;
    }
    (0..amplitudes.len() - r_max)
        .map(|j| {
            couplings
                .entries()
                .iter()
                .enumerate()
                .map(|(r, &l)| amplitudes[j + r] * l)
                .sum::<C64>()
                .norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalizationMethod {
    Root,
    EnvelopeFit,
}

/// Localization length in unit cells; `xi = ∞` marks a critical input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizationResult {
    pub xi: f64,
    pub kappa: f64,
    pub method: LocalizationMethod,
}

pub enum LocalizationInput<'a> {
    Roots(&'a EdgeRootSet),
    /// Amplitudes on sites `j = 1..L`, with the algebraic prefactor power `s` to divide out.
    Mode { amplitudes: &'a [C64], power: usize },
}

pub fn localization_length(input: LocalizationInput<'_>) -> Result<LocalizationResult> {
    match input {
        LocalizationInput::Roots(roots) => {
            if roots.is_critical() {
                return Ok(LocalizationResult {
                    xi: f64::INFINITY,
                    kappa: 0.0,
                    method: LocalizationMethod::Root,
                });
            }
            let z_max = roots
                .roots
                .iter()
                .map(|r| r.z.norm())
                .filter(|&m| m < 1.0)
                .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))))
                .ok_or_else(|| Error::TrivialPhase("no root strictly inside the unit circle".into()))?;
            if z_max == 0.0 {
                return Err(Error::InvalidArgument("modes are confined to single sites (only z = 0 roots)".into()));
            }
            let kappa = -z_max.ln();
            Ok(LocalizationResult {
                xi: 1.0 / kappa,
                kappa,
                method: LocalizationMethod::Root,
            })
        }
        LocalizationInput::Mode { amplitudes, power } => {
            let l = amplitudes.len();
            let (lo, hi) = (l.div_ceil(4).max(1), (3 * l) / 4);
            if hi < lo + 2 {
                return Err(Error::InvalidArgument(format!("mode of length {l} is too short for an envelope fit")));
            }
            let peak = amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for j in lo..=hi {
                let a = amplitudes[j - 1].norm();
                if a <= 1e-14 * peak {
                    return Err(Error::Accuracy(format!("amplitude {a:e} at j = {j} is below the resolvable floor")));
                }
                xs.push(j as f64);
                ys.push(a.ln() - power as f64 * (j as f64).ln());
            }
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
                / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
            let kappa = -slope;
            Ok(LocalizationResult {
                xi: if kappa > 1e-12 { 1.0 / kappa } else { f64::INFINITY },
                kappa: kappa.max(0.0),
                method: LocalizationMethod::EnvelopeFit,
            })
        }
    }
}

/// Fits `ξ(δ) ∼ δ^exponent` along a one-parameter family using the root method.
pub fn xi_exponent<F>(family: F, deltas: &[f64]) -> Result<ScalingFit>
where
    F: Fn(f64) -> Result<CouplingVector> + Sync,
{
    if deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("deltas must be positive".into()));
    }
    let xis = crate::par::try_map(deltas, |&d| {
        let roots = edge_roots(&family(d)?)?;
        let res = localization_length(LocalizationInput::Roots(&roots))?;
        if !res.xi.is_finite() {
            return Err(Error::Critical(format!("family is critical at delta = {d}")));
        }
        Ok(res.xi)
    })?;
    fit_power_law(deltas, &xis)
}

/// Mean and variance of the site index `j` (1-based) under weights `|φ_j|²`.
pub fn position_moments(amplitudes: &[C64]) -> (f64, f64) {
    let w: Vec<f64> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = w.iter().sum();
    let mean = w.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum::<f64>() / total;
    let var = w.iter().enumerate().map(|(i, p)| ((i + 1) as f64 - mean).powi(2) * p).sum::<f64>() / total;
    (mean, var)
}

/// Orthonormal basis of the span of `vectors` (modified Gram–Schmidt, two passes).
pub fn orthonormal_basis(vectors: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        let start = linalg::norm(&w);
        for _ in 0..2 {
            for b in &basis {
                let ov = linalg::vdot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= ov * y);
            }
        }
        let n = linalg::norm(&w);
        if n > 1e-10 * start.max(f64::MIN_POSITIVE) {
            w.iter_mut().for_each(|x| *x /= n);
            basis.push(w);
        }
    }
    basis
}

/// Principal angles (radians, ascending) between two subspaces.
pub fn principal_angles(a: &[Vec<C64>], b: &[Vec<C64>]) -> Result<Vec<f64>> {
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    if qa.is_empty() || qb.is_empty() {
        return Err(Error::InvalidArgument("empty subspace".into()));
    }
    let m = Mat::<C64>::from_fn(qa.len(), qb.len(), |i, j| linalg::vdot(&qa[i], &qb[j]));
    let s = linalg::singular_values_ascending(m.as_ref())?;
    let mut angles: Vec<f64> = s.iter().rev().map(|c| c.clamp(0.0, 1.0).acos()).collect();
    // A dimension mismatch leaves directions with no partner at all.
    angles.extend(std::iter::repeat_n(std::f64::consts::FRAC_PI_2, qa.len().abs_diff(qb.len())));
    Ok(angles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(x: &[f64]) -> CouplingVector {
        CouplingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn linear_root() {
        let r = edge_roots(&cv(&[1.0, -2.0])).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert!((r.roots[0].z - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(r.inside_count, 1);
    }

    #[test]
    fn quartic_root_merges() {
        let r = edge_roots(&cv(&[1.0, -4.0, 6.0, -4.0, 1.0])).unwrap();
        assert_eq!(r.roots.len(), 1, "{r:?}");
        assert_eq!(r.roots[0].multiplicity, 4);
        assert!((r.roots[0].z - C64::new(1.0, 0.0)).norm() < 1e-10, "{r:?}");
        assert_eq!(r.on_circle_count, 4);
    }

    #[test]
    fn double_root_merges() {
        let r = edge_roots(&cv(&[1.0, 2.0, 1.0])).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert_eq!(r.roots[0].multiplicity, 2);
        assert!((r.roots[0].z + C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_roots_and_trailing_zeros() {
        let r = edge_roots(&cv(&[0.0, 1.0])).unwrap();
        assert_eq!(r.inside_count, 1);
        assert_eq!(r.roots[0].z, ZERO);
        let r = edge_roots(&cv(&[1.0, -2.5, 0.0])).unwrap();
        assert_eq!(r.degree(), 1);
        assert!(edge_roots(&cv(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn split_quartic_stays_split() {
        let r = edge_roots(&cv(&[1.0, -4.0, 6.001, -4.0, 1.0])).unwrap();
        assert_eq!(r.roots.len(), 4);
        assert_eq!(r.inside_count, 2);
    }

    #[test]
    fn analytic_modes_obey_recursion() {
        for c in [cv(&[1.0, -2.0]), cv(&[1.0, 2.0, 2.0]), cv(&[1.0, -4.0, 6.0, -4.0, 1.0]), cv(&[0.0, 0.5, 1.0])] {
            let roots = edge_roots(&c).unwrap();
            for m in analytic_edge_modes(&roots, 60).unwrap() {
                assert!(recursion_residual(&c, &m.amplitudes) < 1e-9, "{c:?} {m:?}");
            }
        }
        assert!(matches!(analytic_edge_modes(&edge_roots(&cv(&[2.0, 1.0])).unwrap(), 10), Err(Error::TrivialPhase(_))));
    }

    #[test]
    fn critical_quartic_modes_are_algebraic() {
        let roots = edge_roots(&cv(&[1.0, -4.0, 6.0, -4.0, 1.0])).unwrap();
        let modes = analytic_edge_modes(&roots, 100).unwrap();
        assert_eq!(modes.len(), 4);
        for m in &modes {
            let ratio = m.amplitudes[99].norm() / m.amplitudes[49].norm();
            let expect = (100.0f64 / 50.0).powi(m.power as i32);
            assert!((ratio - expect).abs() < 1e-8 * expect, "{} vs {}", ratio, expect);
        }
    }

    #[test]
    fn root_localization() {
        let r = edge_roots(&cv(&[1.0, -2.0])).unwrap();
        let xi = localization_length(LocalizationInput::Roots(&r)).unwrap();
        assert!((xi.xi - 1.0 / 2f64.ln()).abs() < 1e-12);
        let r = edge_roots(&cv(&[1.0, -1.0])).unwrap();
        assert!(localization_length(LocalizationInput::Roots(&r)).unwrap().xi.is_infinite());
    }

    #[test]
    fn envelope_matches_root() {
        let c = cv(&[1.0, -1.25]);
        let roots = edge_roots(&c).unwrap();
        let mode = &analytic_edge_modes(&roots, 80).unwrap()[0];
        let env = localization_length(LocalizationInput::Mode {
            amplitudes: &mode.amplitudes,
            power: 0,
        })
        .unwrap();
        let root = localization_length(LocalizationInput::Roots(&roots)).unwrap();
        assert!((env.xi / root.xi - 1.0).abs() < 0.02);
    }

    #[test]
    fn principal_angles_of_identical_spans_vanish() {
        let a = vec![vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), ZERO]];
        let b = vec![vec![C64::new(0.0, 2.0), C64::new(0.0, 2.0), ZERO]];
        assert!(principal_angles(&a, &b).unwrap()[0] < 1e-7);
    }
}
