//! Winding number, Chern number, multipole chiral number and phase diagrams.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ONE, ZERO};
use crate::models::{self, bloch_h, ci_terms, momentum_grid, CiParams, CouplingVector, FourierTerms, LatticeSpec, ModelFamily};
use crate::spectra::{locate_band_touching, CRITICAL_TOLERANCE};

/// Largest tolerated distance of a raw invariant from the nearest integer.
pub const INTEGER_TOLERANCE: f64 = 1e-6;

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

fn round_checked(raw: f64, what: &str) -> Result<i64> {
    let n = raw.round();
    if (raw - n).abs() > INTEGER_TOLERANCE {
        return Err(Error::Accuracy(format!("{what} sum {raw} is not within {INTEGER_TOLERANCE:e} of an integer")));
    }
    Ok(n as i64)
}

/// Winding of `h(k)` around the origin from unwrapped phase increments on `n_k` points.
pub fn winding_number(couplings: &CouplingVector, n_k: usize) -> Result<i64> {
    let need = 64 * (couplings.range() + 1);
    if n_k < need {
        return Err(Error::InvalidArgument(format!("n_k = {n_k} is below 64(R+1) = {need}")));
    }
    let grid = momentum_grid(n_k);
    let mut phases = Vec::with_capacity(n_k);
    for &k in &grid {
        let h = bloch_h(couplings, k);
        if h.norm() <= 1e-10 {
            return Err(Error::Critical(format!("|h(k)| = {:e} at k = {k}: critical point, winding undefined", h.norm())));
        }
        phases.push(h.arg());
    }
    let total: f64 = (0..n_k).map(|j| wrap(phases[(j + 1) % n_k] - phases[j])).sum();
    round_checked(total / (2.0 * PI), "winding")
}

/// Chern number of the lower half of the bands of `H(k) = Σ_d C(d) e^{ik·d}`.
///
/// Uses the lattice field strength: each plaquette contributes the phase of
/// the product of its four link determinants, so the total is an integer for
/// any grid on which the occupied subspace stays gapped.
pub fn chern_number_terms(terms: &FourierTerms, norb: usize, n_k: usize) -> Result<i64> {
    if n_k < 4 {
        return Err(Error::InvalidArgument(format!("n_k = {n_k} is too small")));
    }
    let occ = norb / 2;
    let grid = momentum_grid(n_k);
    let mut frames: Vec<Mat<C64>> = Vec::with_capacity(n_k * n_k);
    let mut scale = 0.0_f64;
    let mut min_gap = f64::INFINITY;
    for &ky in &grid {
        for &kx in &grid {
            let h = models::bloch_from_terms(terms, norb, kx, ky);
            let (vals, vecs) = linalg::herm_eigen(h.as_ref(), true)?;
            scale = scale.max(vals[norb - 1].abs()).max(vals[0].abs());
            min_gap = min_gap.min(vals[occ] - vals[occ - 1]);
            frames.push(Mat::from_fn(norb, occ, |i, j| vecs[(i, j)]));
        }
    }
    if min_gap <= CRITICAL_TOLERANCE * scale.max(1.0) {
        return Err(Error::Critical(format!("band gap {min_gap:e} closes on the grid")));
    }
    let link = |a: usize, b: usize| -> C64 {
        let (fa, fb) = (&frames[a], &frames[b]);
        let m = Mat::from_fn(occ, occ, |i, j| (0..norb).map(|s| fa[(s, i)].conj() * fb[(s, j)]).sum::<C64>());
        let d = det(m);
        d / d.norm()
    };
    let idx = |x: usize, y: usize| (y % n_k) * n_k + (x % n_k);
    let mut total = 0.0;
    for y in 0..n_k {
        for x in 0..n_k {
            let u = link(idx(x, y), idx(x + 1, y))
                * link(idx(x + 1, y), idx(x + 1, y + 1))
                * link(idx(x + 1, y + 1), idx(x, y + 1))
                * link(idx(x, y + 1), idx(x, y));
            total += u.arg();
        }
    }
    round_checked(total / (2.0 * PI), "Chern")
}

fn det(mut m: Mat<C64>) -> C64 {
    let n = m.nrows();
    let mut d = ONE;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[(a, c)].norm().total_cmp(&m[(b, c)].norm())).unwrap();
        if m[(p, c)] == ZERO {
            return ZERO;
        }
        if p != c {
            for j in 0..n {
                let t = m[(p, j)];
                m[(p, j)] = m[(c, j)];
                m[(c, j)] = t;
            }
            d = -d;
        }
        d *= m[(c, c)];
        for r in c + 1..n {
            let f = m[(r, c)] / m[(c, c)];
            for j in c..n {
                let v = m[(c, j)];
                m[(r, j)] -= f * v;
            }
        }
    }
    d
}

/// Chern number of the Chern insulator's lower band.
///
/// Evaluated at `n_k` and `2·n_k`; a disagreement means the grid is too coarse.
pub fn chern_number(params: &CiParams, n_k: usize) -> Result<i64> {
    let terms = ci_terms(params);
    let coarse = chern_number_terms(&terms, 2, n_k)?;
    let fine = chern_number_terms(&terms, 2, 2 * n_k)?;
    if coarse != fine {
        return Err(Error::Accuracy(format!("Chern number changes from {coarse} to {fine} on grid doubling")));
    }
    Ok(coarse)
}

/// Multipole chiral number of an open HOTI flake.
///
/// The sublattice multipole operators `Q^S = diag(e^{−2πi·xy/L²})` are projected
/// onto the left and right singular bases of the chiral block `X = U_A Σ U_B†`,
/// and the result is `(1/2π)·Σ arg` of the eigenvalues of `Q̄^A Q̄^B†`.
pub fn multipole_chiral_number(spec: &LatticeSpec) -> Result<i64> {
    let ModelFamily::Hoti(c) = spec.family() else {
        return Err(Error::WrongFamily {
            expected: "HOTI_2D",
            found: spec.family().name(),
        });
    };
    if spec.boundary() != models::Boundary::Open {
        return Err(Error::InvalidArgument("the multipole chiral number needs an open flake".into()));
    }
    let touching = locate_band_touching(c);
    if touching.e_min < CRITICAL_TOLERANCE * c.l1_norm().max(1.0) {
        return Err(Error::Critical(format!("bulk gap closes at k = {}", touching.k_c)));
    }
    let x = models::chiral_block(spec)?;
    let svd = linalg::svd_ascending(x.as_ref())?;
    let (a_idx, b_idx) = spec.sublattice_indices().expect("HOTI is chiral");
    let coords = spec.cell_coordinates();
    let l2 = (spec.length() * spec.length()) as f64;
    let phase = |i: usize| {
        let (cx, cy) = coords[i];
        let t = -2.0 * PI * (cx * cy) as f64 / l2;
        C64::new(t.cos(), t.sin())
    };
    let project = |u: &Mat<C64>, idx: &[usize]| {
        let q: Vec<C64> = idx.iter().map(|&i| phase(i)).collect();
        let n = idx.len();
        Mat::from_fn(n, n, |i, j| (0..n).map(|s| u[(s, i)].conj() * q[s] * u[(s, j)]).sum::<C64>())
    };
    let qa = project(&svd.u, &a_idx);
    let qb = project(&svd.v, &b_idx);
    let n = qa.nrows();
    let product = Mat::from_fn(n, n, |i, j| (0..n).map(|s| qa[(i, s)] * qb[(j, s)].conj()).sum::<C64>());
    let eig = linalg::eigenvalues_general(product.as_ref())?;
    let total: f64 = eig.iter().map(|z| z.arg()).sum();
    round_checked(total / (2.0 * PI), "multipole chiral number")
}

/// Named uniform axis of a phase diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// `n` evenly spaced values from `start` to `end` inclusive.
    pub fn uniform(name: impl Into<String>, start: f64, end: f64, n: usize) -> Result<Self> {
        if n == 0 || !(start.is_finite() && end.is_finite()) {
            return Err(Error::InvalidArgument("axis needs n ≥ 1 and finite bounds".into()));
        }
        let values = if n == 1 {
            vec![start]
        } else {
            (0..n).map(|i| start + (end - start) * i as f64 / (n - 1) as f64).collect()
        };
        Ok(Self { name: name.into(), values })
    }
}

/// Invariant per grid cell, row-major over (`axis1`, `axis2`).
///
/// `None` marks a cell where the evaluator rejected the input, usually a
/// critical line; the reasons are kept in `rejections`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDiagram {
    pub axis1: Axis,
    pub axis2: Axis,
    pub cells: Vec<Option<i64>>,
    pub rejections: Vec<(usize, usize, String)>,
}

impl PhaseDiagram {
    pub fn get(&self, i: usize, j: usize) -> Option<i64> {
        self.cells[i * self.axis2.values.len() + j]
    }
}

pub fn phase_diagram<F>(axis1: Axis, axis2: Axis, evaluate: F) -> PhaseDiagram
where
    F: Fn(f64, f64) -> Result<i64> + Sync + Send,
{
    let n2 = axis2.values.len();
    let points: Vec<(f64, f64)> = axis1
        .values
        .iter()
        .flat_map(|&a| axis2.values.iter().map(move |&b| (a, b)))
        .collect();
    let results = crate::par::map(&points, |&(a, b)| evaluate(a, b));
    let mut cells = Vec::with_capacity(results.len());
    let mut rejections = Vec::new();
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => cells.push(Some(v)),
            Err(e) => {
                cells.push(None);
                rejections.push((idx / n2, idx % n2, e.to_string()));
            }
        }
    }
    PhaseDiagram {
        axis1,
        axis2,
        cells,
        rejections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Boundary;

    fn cv(x: &[f64]) -> CouplingVector {
        CouplingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn winding_anchors() {
        assert_eq!(winding_number(&cv(&[1.0, 0.0]), 256).unwrap(), 0);
        assert_eq!(winding_number(&cv(&[0.0, 1.0]), 256).unwrap(), 1);
        assert_eq!(winding_number(&cv(&[1.0, 2.0, 2.0]), 256).unwrap(), 2);
        assert_eq!(winding_number(&cv(&[1.0, 2.0, 0.5]), 256).unwrap(), 1);
        assert!(matches!(winding_number(&cv(&[1.0, -1.0]), 256), Err(Error::Critical(_))));
        assert!(winding_number(&cv(&[1.0, 2.0]), 64).is_err());
    }

    #[test]
    fn chern_anchors() {
        assert_eq!(chern_number(&CiParams::new(10.0, -0.5).unwrap(), 32).unwrap(), 0);
        assert!(matches!(chern_number(&CiParams::new(1.0, -0.5).unwrap(), 32), Err(Error::Critical(_))));
    }

    #[test]
    fn chern_stable_under_refinement() {
        let p = CiParams::new(1.0, -1.0).unwrap();
        let values: Vec<i64> = [32, 64, 128].iter().map(|&n| chern_number_terms(&ci_terms(&p), 2, n).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] == w[1]), "{values:?}");
        assert_eq!(values[0], 2);
    }

    #[test]
    fn mcn_anchors() {
        let trivial = LatticeSpec::hoti(cv(&[1.0, 0.0, 0.0]), 8, Boundary::Open).unwrap();
        assert_eq!(multipole_chiral_number(&trivial).unwrap(), 0);
        for l in [8, 10, 12] {
            let s = LatticeSpec::hoti(cv(&[1.0, -2.5, 0.0]), l, Boundary::Open).unwrap();
            assert_eq!(multipole_chiral_number(&s).unwrap(), 1, "L = {l}");
        }
        let crit = LatticeSpec::hoti(cv(&[1.0, -2.0, 1.0]), 12, Boundary::Open).unwrap();
        assert!(matches!(multipole_chiral_number(&crit), Err(Error::Critical(_))));
    }

    #[test]
    fn single_cell_diagram() {
        let d = phase_diagram(Axis::uniform("a", 1.0, 1.0, 1).unwrap(), Axis::uniform("b", 0.0, 0.0, 1).unwrap(), |a, b| {
            winding_number(&cv(&[a, b]), 128)
        });
        assert_eq!(d.cells, vec![Some(0)]);
    }

    #[test]
    fn diagram_marks_critical_cells() {
        let d = phase_diagram(Axis::uniform("l0", 1.0, 1.0, 1).unwrap(), Axis::uniform("l1", -2.0, 0.0, 3).unwrap(), |a, b| {
            winding_number(&cv(&[a, b]), 128)
        });
        assert_eq!(d.cells, vec![Some(1), None, Some(0)]);
        assert_eq!(d.rejections.len(), 1);
    }
}
