//! Quantum Fisher information of eigenstate probes.
//!
//! Three routes are provided: the perturbative sum over the spectrum, the
//! fidelity susceptibility from finite parameter shifts, and the pure-state
//! formula applied to a finite-difference state derivative. For edge probes at
//! criticality, where the zero modes pair up, [`polarized_edge_qfi`] follows
//! the sublattice-polarized zero mode through the singular-value structure of
//! the chiral block instead.

use faer::Mat;

use crate::error::{Error, Result};
use crate::fit::{fit_power_law, ScalingFit};
use crate::linalg::{self, DenseHermitian, C64, ZERO};
use crate::models::{self, LatticeSpec};
use crate::spectra::{self, eigh, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QfiMethod {
    Fidelity,
    Perturbative,
    StateDerivative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QfiResult {
    pub lambda: f64,
    pub method: QfiMethod,
    pub value: f64,
    pub probe_index: usize,
    /// Finite-difference step, `0` for the perturbative route.
    pub delta_lambda: f64,
    /// Terms dropped because their energy denominator fell below the cut.
    pub excluded_terms: usize,
}

/// `∂H/∂λ_r` together with the parameter it belongs to.
#[derive(Clone, Debug)]
pub struct DrivingTerm {
    pub r: usize,
    /// Value of `λ_r` in the lattice the term was taken from.
    pub lambda: f64,
    pub matrix: DenseHermitian,
}

impl DrivingTerm {
    pub fn new(spec: &LatticeSpec, r: usize) -> Result<Self> {
        Ok(Self {
            r,
            lambda: spec.parameters().get(r).copied().unwrap_or(f64::NAN),
            matrix: models::driving_term(spec, r)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sublattice {
    A,
    B,
}

/// A sublattice-polarized combination of near-zero eigenstates.
#[derive(Clone, Debug)]
pub struct ZeroMode {
    pub state: Vec<C64>,
    pub edge: Edge,
    pub sublattice: Sublattice,
    /// Weight on the dominant sublattice.
    pub polarization: f64,
    /// `⟨x⟩` in unit cells (1-based).
    pub mean_position: f64,
    /// Standard deviation of the cell index, used as the localization measure.
    pub spread: f64,
    /// Spectrum indices spanning the near-zero subspace the mode was built from.
    pub source_indices: Vec<usize>,
}

/// Near-zero eigenstates rotated into sublattice-polarized edge modes.
///
/// Candidates are states with `|E|` below a tenth of the bulk gap. Within their
/// span the chiral operator is diagonalized to separate A from B, and inside each
/// polarized block the cell-position operator separates modes spatially. The
/// result is sorted by spread (most localized first).
pub fn select_zero_modes(spec: &LatticeSpec, spectrum: &Spectrum) -> Result<Vec<ZeroMode>> {
    if spec.boundary() != models::Boundary::Open {
        return Err(Error::InvalidArgument("edge modes need an open boundary".into()));
    }
    let Some(signs) = spec.sublattice_signs() else {
        return Err(Error::WrongFamily {
            expected: "a chiral family (ESSH_1D or HOTI_2D)",
            found: spec.family().name(),
        });
    };
    let threshold = spectra::bulk_gap(spec) / 10.0;
    let idx: Vec<usize> = (0..spectrum.len()).filter(|&i| spectrum.energies[i].abs() < threshold).collect();
    if idx.is_empty() {
        return Err(Error::TrivialPhase("no in-gap states: trivial phase".into()));
    }
    let n = spectrum.len();
    let w = Mat::from_fn(n, idx.len(), |i, j| spectrum.states[(i, idx[j])]);
    let coords = spec.cell_coordinates();
    let pos: Vec<f64> = coords.iter().map(|&(x, _)| x as f64).collect();
    let center = (spec.length() as f64 + 1.0) / 2.0;

    let s_vals = |mat: &Mat<C64>, diag: &[f64]| -> Result<(Vec<f64>, Mat<C64>)> {
        let m = mat.ncols();
        let op = Mat::from_fn(m, m, |a, b| (0..n).map(|s| mat[(s, a)].conj() * diag[s] * mat[(s, b)]).sum::<C64>());
        let op = Mat::from_fn(m, m, |a, b| (op[(a, b)] + op[(b, a)].conj()) * 0.5);
        linalg::herm_eigen(op.as_ref(), true)
    };
    let (svals, svecs) = s_vals(&w, &signs)?;
    let rotated = &w * &svecs;
    let mut modes = Vec::new();
    for (positive, sub) in [(true, Sublattice::A), (false, Sublattice::B)] {
        let cols: Vec<usize> = (0..svals.len()).filter(|&k| (svals[k] > 0.0) == positive).collect();
        if cols.is_empty() {
            continue;
        }
        let block = Mat::from_fn(n, cols.len(), |i, j| rotated[(i, cols[j])]);
        let (_, pvecs) = s_vals(&block, &pos)?;
        let local = &block * &pvecs;
        for j in 0..local.ncols() {
            let mut state = linalg::column(local.as_ref(), j);
            linalg::canonical_phase(&mut state);
            let weight = |sign: f64| -> f64 { state.iter().zip(&signs).filter(|(_, &s)| s == sign).map(|(a, _)| a.norm_sqr()).sum() };
            let polarization = if positive { weight(1.0) } else { weight(-1.0) };
            let mean: f64 = state.iter().zip(&pos).map(|(a, x)| a.norm_sqr() * x).sum();
            let var: f64 = state.iter().zip(&pos).map(|(a, x)| a.norm_sqr() * (x - mean).powi(2)).sum();
            modes.push(ZeroMode {
                state,
                edge: if mean < center { Edge::Left } else { Edge::Right },
                sublattice: sub,
                polarization,
                mean_position: mean,
                spread: var.max(0.0).sqrt(),
                source_indices: idx.clone(),
            });
        }
    }
    modes.sort_by(|a, b| a.spread.total_cmp(&b.spread));
    Ok(modes)
}

/// `4 Σ_{l≠l₀} |⟨E_l|H_r|E_{l₀}⟩|² / (E_l − E_{l₀})²`.
///
/// Terms with `|E_l − E_{l₀}| ≤ cut` are skipped and counted; the default cut is
/// `1e−9·max|E|`.
pub fn qfi_perturbative(spectrum: &Spectrum, driving: &DrivingTerm, l0: usize, cut: Option<f64>) -> Result<QfiResult> {
    if l0 >= spectrum.len() {
        return Err(Error::InvalidArgument(format!("probe index {l0} out of range ({} states)", spectrum.len())));
    }
    let scale = spectrum.energies.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let cut = cut.unwrap_or(1e-9 * scale);
    let psi = spectrum.state(l0);
    let hv = driving.matrix.apply(&psi);
    let elements = linalg::adjoint_matvec(spectrum.states.as_ref(), &hv);
    let e0 = spectrum.energies[l0];
    let mut value = 0.0;
    let mut excluded = 0;
    for (l, (&e, m)) in spectrum.energies.iter().zip(&elements).enumerate() {
        if l == l0 {
            continue;
        }
        let gap = e - e0;
        if gap.abs() <= cut {
            excluded += 1;
            continue;
        }
        value += m.norm_sqr() / (gap * gap);
    }
    Ok(QfiResult {
        lambda: driving.lambda,
        method: QfiMethod::Perturbative,
        value: 4.0 * value,
        probe_index: l0,
        delta_lambda: 0.0,
        excluded_terms: excluded,
    })
}

/// Minimum gap between the best and second-best overlaps for unambiguous tracking.
pub const TRACKING_MARGIN: f64 = 1e-3;

/// Eigenvector of `h` with maximal overlap with `reference`.
fn track(h: &DenseHermitian, reference: &[C64]) -> Result<Vec<C64>> {
    let s = eigh(h)?;
    let overlaps = linalg::adjoint_matvec(s.states.as_ref(), reference);
    let mut order: Vec<usize> = (0..overlaps.len()).collect();
    order.sort_by(|&a, &b| overlaps[b].norm().total_cmp(&overlaps[a].norm()));
    let best = overlaps[order[0]].norm();
    if order.len() > 1 && best - overlaps[order[1]].norm() < TRACKING_MARGIN {
        return Err(Error::Tracking(format!(
            "ambiguous overlap tracking ({best:.6} vs {:.6}): near-degenerate probe",
            overlaps[order[1]].norm()
        )));
    }
    Ok(s.state(order[0]))
}

/// States at `λ − δ/2`, `λ`, `λ + δ/2`, matched to probe `l0` at `λ` by overlap.
fn tracked_triplet<F>(family: &F, lambda: f64, l0: usize, delta: f64) -> Result<[Vec<C64>; 3]>
where
    F: Fn(f64) -> Result<DenseHermitian>,
{
    let center = eigh(&family(lambda)?)?;
    if l0 >= center.len() {
        return Err(Error::InvalidArgument(format!("probe index {l0} out of range ({} states)", center.len())));
    }
    let psi = center.state(l0);
    let minus = track(&family(lambda - delta / 2.0)?, &psi)?;
    let plus = track(&family(lambda + delta / 2.0)?, &psi)?;
    Ok([minus, psi, plus])
}

/// Fidelity susceptibility `4(1 − |⟨ψ(λ−δ/2)|ψ(λ+δ/2)⟩|²)/δ²`, Richardson-extrapolated over `δ` and `δ/2`.
///
/// The default step is `1e−4`. When the infidelity at that step exceeds `1e−4`
/// (a large QFI), the step is shrunk so the quadratic regime is kept.
pub fn qfi_fidelity<F>(family: F, lambda: f64, l0: usize, delta: Option<f64>) -> Result<QfiResult>
where
    F: Fn(f64) -> Result<DenseHermitian>,
{
    let mut delta = delta.unwrap_or(1e-4);
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {delta} must be positive")));
    }
    let estimate = |d: f64| -> Result<(f64, f64)> {
        let [m, _, p] = tracked_triplet(&family, lambda, l0, d)?;
        let infidelity = linalg::orthogonal_weight(&m, &p);
        Ok((4.0 * infidelity / (d * d), infidelity))
    };
    let (mut coarse, mut infidelity) = estimate(delta)?;
    for _ in 0..8 {
        if infidelity <= 1e-4 {
            break;
        }
        delta *= (1e-5 / infidelity).sqrt().max(1e-3);
        (coarse, infidelity) = estimate(delta)?;
    }
    let (fine, _) = estimate(delta / 2.0)?;
    let value = ((4.0 * fine - coarse) / 3.0).max(0.0);
    Ok(QfiResult {
        lambda,
        method: QfiMethod::Fidelity,
        value,
        probe_index: l0,
        delta_lambda: delta,
        excluded_terms: 0,
    })
}

fn check_normalized(v: &[C64]) -> Result<()> {
    let n = linalg::norm(v);
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// Pure-state QFI `4(⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|²)` with `∂ψ` from a central difference of step `delta`
/// (the outer states sit at `λ ± delta`).
///
/// The outer states are first rotated so their overlap with the center is real
/// and positive, which makes the difference quotient smooth in the gauge.
pub fn qfi_state_derivative(minus: &[C64], center: &[C64], plus: &[C64], lambda: f64, delta: f64) -> Result<QfiResult> {
    for v in [minus, center, plus] {
        check_normalized(v)?;
    }
    if minus.len() != center.len() || plus.len() != center.len() {
        return Err(Error::InvalidArgument("states have different dimensions".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("step {delta} must be positive")));
    }
    let mut m = minus.to_vec();
    let mut p = plus.to_vec();
    linalg::align_phase(center, &mut m);
    linalg::align_phase(center, &mut p);
    let d: Vec<C64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * delta)).collect();
    Ok(QfiResult {
        lambda,
        method: QfiMethod::StateDerivative,
        value: 4.0 * linalg::orthogonal_weight(center, &d),
        probe_index: 0,
        delta_lambda: delta,
        excluded_terms: 0,
    })
}

/// [`qfi_state_derivative`] on the overlap-tracked eigenstate `l0` of a one-parameter family.
pub fn qfi_state_derivative_tracked<F>(family: F, lambda: f64, l0: usize, delta: Option<f64>) -> Result<QfiResult>
where
    F: Fn(f64) -> Result<DenseHermitian>,
{
    let delta = delta.unwrap_or(1e-4);
    let [m, c, p] = tracked_triplet(&family, lambda, l0, 2.0 * delta)?;
    let mut r = qfi_state_derivative(&m, &c, &p, lambda, delta)?;
    r.probe_index = l0;
    Ok(r)
}

/// QFI of the A-polarized zero mode `(u₁, 0)`, where `u₁` is the left singular
/// vector of the chiral block with the smallest singular value.
///
/// With `X = U Σ V†` and `a = U† ∂X V`, the derivative of `u₁` has components
/// `(σ₁ a_{i1} + σ_i ā_{1i}) / (σ₁² − σ_i²)` on `u_i`. Singular values closer
/// to `σ₁` than the SVD rounding floor `8·n·ε·‖X‖` belong to the same
/// polarized multiplet and are excluded. A coarser cut would swallow the
/// `L^−p` splittings of high-order critical chains.
pub fn polarized_edge_qfi(spec: &LatticeSpec, driving_index: usize) -> Result<QfiResult> {
    let x = models::chiral_block(spec)?;
    let dx = models::driving_block(spec, driving_index)?;
    let svd = linalg::svd_ascending(x.as_ref())?;
    let k = svd.s.len();
    let scale = svd.s[k - 1];
    let s1 = svd.s[0];
    let cut = 8.0 * k as f64 * f64::EPSILON * scale;
    let u1 = linalg::column(svd.u.as_ref(), 0);
    let v1 = linalg::column(svd.v.as_ref(), 0);
    // Column 1 of a = U† ∂X v₁ and row 1 of a (conjugated) = V† ∂X† u₁.
    let col = linalg::adjoint_matvec(svd.u.as_ref(), &linalg::matvec(dx.as_ref(), &v1));
    let row_conj = linalg::adjoint_matvec(svd.v.as_ref(), &linalg::adjoint_matvec(dx.as_ref(), &u1));
    let mut value = 0.0;
    let mut excluded = 0;
    for i in 1..svd.u.ncols() {
        let si = if i < k { svd.s[i] } else { 0.0 };
        if (si - s1).abs() <= cut {
            excluded += 1;
            continue;
        }
        let ri = if i < row_conj.len() { row_conj[i] } else { ZERO };
        let c = (col[i] * s1 + ri * si) / (s1 * s1 - si * si);
        value += c.norm_sqr();
    }
    Ok(QfiResult {
        lambda: spec.parameters()[driving_index],
        method: QfiMethod::Perturbative,
        value: 4.0 * value,
        probe_index: 0,
        delta_lambda: 0.0,
        excluded_terms: excluded,
    })
}

/// Which eigenstate feeds the QFI in a scaling sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeSelector {
    /// Sublattice-A polarized zero mode (chiral families only).
    PolarizedEdge,
    /// Eigenstate closest to zero energy.
    NearestZero,
    Index(usize),
}

/// QFI for one lattice with the chosen probe and driving parameter.
pub fn probe_qfi(spec: &LatticeSpec, probe: ProbeSelector, driving_index: usize) -> Result<QfiResult> {
    match probe {
        ProbeSelector::PolarizedEdge => polarized_edge_qfi(spec, driving_index),
        ProbeSelector::NearestZero | ProbeSelector::Index(_) => {
            let spectrum = eigh(&models::hamiltonian(spec)?)?;
            let l0 = match probe {
                ProbeSelector::Index(i) => i,
                _ => spectrum.nearest_zero(),
            };
            qfi_perturbative(&spectrum, &DrivingTerm::new(spec, driving_index)?, l0, None)
        }
    }
}

/// Fits `F_Q(L) ∼ L^β` over at least four sizes.
pub fn qfi_scaling<F>(family: F, sizes: &[usize], probe: ProbeSelector, driving_index: usize) -> Result<(ScalingFit, Vec<QfiResult>)>
where
    F: Fn(usize) -> Result<LatticeSpec> + Sync,
{
    if sizes.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 sizes, got {}", sizes.len())));
    }
    let results = crate::par::try_map(sizes, |&l| probe_qfi(&family(l)?, probe, driving_index))?;
    let xs: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = results.iter().map(|r| r.value).collect();
    Ok((fit_power_law(&xs, &ys)?, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::models::{Boundary, CouplingVector};

    fn cv(x: &[f64]) -> CouplingVector {
        CouplingVector::new(x.to_vec()).unwrap()
    }

    fn two_level(lambda: f64) -> Result<DenseHermitian> {
        DenseHermitian::from_fn(2, |i, j| match (i, j) {
            (0, 0) => ONE,
            (1, 1) => -ONE,
            _ => C64::new(lambda, 0.0),
        })
    }

    #[test]
    fn two_level_closed_form() {
        let s = eigh(&two_level(0.0).unwrap()).unwrap();
        let drive = DrivingTerm {
            r: 0,
            lambda: 0.0,
            matrix: DenseHermitian::from_fn(2, |i, j| if i != j { ONE } else { ZERO }).unwrap(),
        };
        let p = qfi_perturbative(&s, &drive, 0, None).unwrap();
        assert!((p.value - 1.0).abs() < 1e-12);
        let f = qfi_fidelity(two_level, 0.0, 0, None).unwrap();
        assert!((f.value - 1.0).abs() < 1e-6, "{}", f.value);
        let d = qfi_state_derivative_tracked(two_level, 0.0, 0, None).unwrap();
        assert!((d.value - 1.0).abs() < 1e-6, "{}", d.value);
    }

    #[test]
    fn diagonal_driving_gives_zero() {
        let s = eigh(&two_level(0.0).unwrap()).unwrap();
        let drive = DrivingTerm {
            r: 0,
            lambda: 0.0,
            matrix: DenseHermitian::from_fn(2, |i, j| if i == j { ONE } else { ZERO }).unwrap(),
        };
        assert_eq!(qfi_perturbative(&s, &drive, 1, None).unwrap().value, 0.0);
        assert!(qfi_perturbative(&s, &drive, 2, None).is_err());
    }

    #[test]
    fn flat_direction_gives_zero() {
        let f = qfi_fidelity(|_| two_level(0.3), 0.0, 0, None).unwrap();
        assert!(f.value < 1e-12, "{}", f.value);
    }

    #[test]
    fn ssh_single_left_mode() {
        let spec = LatticeSpec::essh(cv(&[1.0, -2.0]), 40, Boundary::Open).unwrap();
        let s = eigh(&models::hamiltonian(&spec).unwrap()).unwrap();
        let modes = select_zero_modes(&spec, &s).unwrap();
        let left: Vec<_> = modes.iter().filter(|m| m.edge == Edge::Left).collect();
        assert_eq!(left.len(), 1);
        assert_eq!(left[0].sublattice, Sublattice::A);
        assert!(left[0].polarization > 1.0 - 1e-6);
        let a = &left[0].state;
        for j in 0..10 {
            let ratio = a[2 * (j + 1)].norm() / a[2 * j].norm();
            assert!((ratio - 0.5).abs() < 1e-8, "{ratio}");
        }
    }

    #[test]
    fn two_left_modes_on_a() {
        let spec = LatticeSpec::essh(cv(&[1.0, 2.0, 2.0]), 60, Boundary::Open).unwrap();
        let s = eigh(&models::hamiltonian(&spec).unwrap()).unwrap();
        let modes = select_zero_modes(&spec, &s).unwrap();
        let left: Vec<_> = modes.iter().filter(|m| m.edge == Edge::Left).collect();
        assert_eq!(left.len(), 2);
        assert!(left.iter().all(|m| m.sublattice == Sublattice::A && m.polarization > 1.0 - 1e-6));
    }

    #[test]
    fn trivial_chain_has_no_modes() {
        let spec = LatticeSpec::essh(cv(&[2.0, 1.0]), 40, Boundary::Open).unwrap();
        let s = eigh(&models::hamiltonian(&spec).unwrap()).unwrap();
        assert!(matches!(select_zero_modes(&spec, &s), Err(Error::TrivialPhase(_))));
    }

    #[test]
    fn polarized_qfi_matches_fidelity_of_singular_vector() {
        // Off criticality the A-polarized mode is a smooth function of λ₁.
        let spec = LatticeSpec::essh(cv(&[1.0, -1.3, 0.4]), 24, Boundary::Open).unwrap();
        let analytic = polarized_edge_qfi(&spec, 1).unwrap().value;
        let mode = |l: f64| -> Vec<C64> {
            let s = spec.with_parameter(1, l).unwrap();
            let x = models::chiral_block(&s).unwrap();
            linalg::column(linalg::svd_ascending(x.as_ref()).unwrap().u.as_ref(), 0)
        };
        let h = 1e-5;
        let fd = qfi_state_derivative(&mode(-1.3 - h), &mode(-1.3), &mode(-1.3 + h), -1.3, h).unwrap().value;
        assert!((analytic / fd - 1.0).abs() < 1e-5, "{analytic} vs {fd}");
    }
}
