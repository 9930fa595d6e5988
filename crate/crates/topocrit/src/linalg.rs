//! Dense linear-algebra glue over `faer`.
//!
//! Every decomposition used by the crate goes through this module so the
//! numerical path stays fixed: real-symmetric inputs take the real kernels,
//! everything else the complex ones, and no randomized algorithm is involved.

use faer::{Mat, MatRef, Side};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// A dense Hermitian matrix, checked on construction.
#[derive(Clone, Debug)]
pub struct DenseHermitian {
    mat: Mat<C64>,
}

impl DenseHermitian {
    /// Largest tolerated `|H - H†|` entry.
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(mat: Mat<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidArgument(format!(
                "matrix is {}x{}, expected square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let defect = hermiticity_defect(mat.as_ref());
        if defect > Self::TOLERANCE {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { mat })
    }

    /// Builds from per-entry values; `f(i, j)` must already be Hermitian.
    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        Self::new(Mat::from_fn(dim, dim, f))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    /// True when every entry has an exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        is_real_matrix(self.mat.as_ref())
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        matvec(self.mat.as_ref(), v)
    }

    /// `<v|H|v>` for a (not necessarily normalized) vector.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        vdot(v, &self.apply(v)).re
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> Result<f64> {
        let (vals, _) = herm_eigen(self.matrix(), false)?;
        Ok(vals.iter().fold(0.0_f64, |m, e| m.max(e.abs())))
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &DenseHermitian) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        let n = self.dim();
        Ok(Self {
            mat: Mat::from_fn(n, n, |i, j| self.mat[(i, j)] + other.mat[(i, j)] * alpha),
        })
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &DenseHermitian) -> Self {
        let (n, m) = (self.dim(), other.dim());
        Self {
            mat: Mat::from_fn(n * m, n * m, |i, j| {
                self.mat[(i / m, j / m)] * other.mat[(i % m, j % m)]
            }),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: Mat::from_fn(dim, dim, |i, j| if i == j { ONE } else { ZERO }),
        }
    }
}

pub(crate) fn hermiticity_defect(m: MatRef<'_, C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn is_real_matrix(m: MatRef<'_, C64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

fn real_part(m: MatRef<'_, C64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)
}

pub(crate) fn complexify(m: MatRef<'_, f64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}

/// Eigenvalues (ascending) and, if requested, eigenvectors as columns.
pub(crate) fn herm_eigen(m: MatRef<'_, C64>, vectors: bool) -> Result<(Vec<f64>, Mat<C64>)> {
    let fail = |e: faer::linalg::evd::EvdError| Error::Decomposition(format!("{e:?}"));
    if is_real_matrix(m) {
        let r = real_part(m);
        if !vectors {
            let vals = r.self_adjoint_eigenvalues(Side::Lower).map_err(fail)?;
            return Ok((vals, Mat::zeros(0, 0)));
        }
        let evd = r.self_adjoint_eigen(Side::Lower).map_err(fail)?;
        let vals = evd.S().column_vector().iter().copied().collect();
        Ok((vals, complexify(evd.U())))
    } else {
        if !vectors {
            let vals = m.self_adjoint_eigenvalues(Side::Lower).map_err(fail)?;
            return Ok((vals, Mat::zeros(0, 0)));
        }
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(fail)?;
        let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
        Ok((vals, evd.U().to_owned()))
    }
}

/// Singular value decomposition `M = U diag(s) V†` with `s` ascending.
#[derive(Clone, Debug)]
pub(crate) struct Svd {
    pub u: Mat<C64>,
    pub s: Vec<f64>,
    pub v: Mat<C64>,
}

fn svd_fail(e: faer::linalg::svd::SvdError) -> Error {
    Error::Decomposition(format!("{e:?}"))
}

pub(crate) fn svd_ascending(m: MatRef<'_, C64>) -> Result<Svd> {
    if is_real_matrix(m) {
        let (u, s, v) = svd_real_ascending(real_part(m).as_ref())?;
        return Ok(Svd {
            u: complexify(u.as_ref()),
            s,
            v: complexify(v.as_ref()),
        });
    }
    let svd = m.svd().map_err(svd_fail)?;
    let k = svd.S().column_vector().nrows();
    let s: Vec<f64> = (0..k).rev().map(|i| svd.S().column_vector()[i].re).collect();
    let u = Mat::from_fn(m.nrows(), m.nrows(), |i, j| svd.U()[(i, flip(j, k))]);
    let v = Mat::from_fn(m.ncols(), m.ncols(), |i, j| svd.V()[(i, flip(j, k))]);
    Ok(Svd { u, s, v })
}

/// Reverses the first `k` columns and leaves any null-space columns behind them.
fn flip(j: usize, k: usize) -> usize {
    if j < k {
        k - 1 - j
    } else {
        j
    }
}

pub(crate) fn svd_real_ascending(m: MatRef<'_, f64>) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let svd = m.svd().map_err(svd_fail)?;
    let k = svd.S().column_vector().nrows();
    let s: Vec<f64> = (0..k).rev().map(|i| svd.S().column_vector()[i]).collect();
    let u = Mat::from_fn(m.nrows(), m.nrows(), |i, j| svd.U()[(i, flip(j, k))]);
    let v = Mat::from_fn(m.ncols(), m.ncols(), |i, j| svd.V()[(i, flip(j, k))]);
    Ok((u, s, v))
}

pub(crate) fn singular_values_ascending(m: MatRef<'_, C64>) -> Result<Vec<f64>> {
    let mut s = if is_real_matrix(m) {
        real_part(m).singular_values().map_err(svd_fail)?
    } else {
        m.singular_values().map_err(svd_fail)?
    };
    s.reverse();
    Ok(s)
}

/// Eigenvalues of a general square matrix.
pub(crate) fn eigenvalues_general(m: MatRef<'_, C64>) -> Result<Vec<C64>> {
    let fail = |e: faer::linalg::evd::EvdError| Error::Decomposition(format!("{e:?}"));
    if is_real_matrix(m) {
        real_part(m).eigenvalues().map_err(fail)
    } else {
        m.eigenvalues().map_err(fail)
    }
}

pub(crate) fn column(m: MatRef<'_, C64>, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub(crate) fn matvec(m: MatRef<'_, C64>, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len(), "matvec dimension mismatch");
    let mut out = vec![ZERO; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == ZERO {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

/// `M† v`.
pub(crate) fn adjoint_matvec(m: MatRef<'_, C64>, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.nrows(), v.len(), "adjoint matvec dimension mismatch");
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].conj() * v[i]).sum())
        .collect()
}

/// Inner product `<a|b>`, antilinear in the first argument.
pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn normalize(a: &mut [C64]) {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
}

/// `‖b - <a|b> a‖²`, the infidelity `1 - |<a|b>|²` for unit vectors without cancellation.
pub(crate) fn orthogonal_weight(a: &[C64], b: &[C64]) -> f64 {
    let ov = vdot(a, b);
    a.iter().zip(b).map(|(x, y)| (y - ov * x).norm_sqr()).sum()
}

/// Multiplies `b` by the phase that makes `<a|b>` real and non-negative.
pub(crate) fn align_phase(a: &[C64], b: &mut [C64]) {
    let ov = vdot(a, b);
    if ov.norm() > 0.0 {
        let phase = ov.conj() / ov.norm();
        b.iter_mut().for_each(|x| *x *= phase);
    }
}

/// Fixes the global phase so the largest-magnitude entry is real positive.
pub(crate) fn canonical_phase(a: &mut [C64]) {
    let mut best = 0;
    for (i, x) in a.iter().enumerate() {
        if x.norm() > a[best].norm() * (1.0 + 1e-12) {
            best = i;
        }
    }
    let pivot = a[best];
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        a.iter_mut().for_each(|x| *x *= phase);
    }
}
