//! Lattice model definitions and Hamiltonian builders.
//!
//! Three families share one description, [`LatticeSpec`]:
//!
//! * the extended SSH chain with hoppings `⟨a_{j+r}|H|b_j⟩ = λ_r`, sites ordered
//!   `(a_1, b_1, a_2, b_2, …)`;
//! * a four-band higher-order insulator on the square lattice built from
//!   `Γ₁ = −τ₂σ₁, Γ₂ = −τ₂σ₂, Γ₃ = −τ₂σ₃, Γ₄ = τ₁σ₀` (orbital index `2τ + σ`);
//! * a two-band Chern insulator with `d_z = m₀ + λ₀(cos k_x + cos k_y)` and
//!   `d_x + i d_y = g(k)²`, `g = (e^{−ik_x} − 1) + i(e^{−ik_y} − 1)`.
//!
//! Two-dimensional models are stored as Fourier terms `C(d)` so that the Bloch
//! matrix is `Σ_d C(d) e^{ik·d}` and the real-space matrix has
//! `⟨R + d, α|H|R, β⟩ = C(d)_{αβ}`. Open boundaries drop terms that leave the
//! sample; periodic ones wrap them. Unit cells are indexed `x + L·y` and the
//! orbital index runs fastest.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{DenseHermitian, C64, I, ONE, ZERO};

/// Real hopping amplitudes `λ₀ … λ_R`.
///
/// Trailing zeros are kept so that a declared range survives a sweep through
/// zero; [`CouplingVector::effective_range`] reports the true degree.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingVector {
    entries: Vec<f64>,
}

impl CouplingVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidCouplings("empty coupling vector".into()));
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidCouplings(format!("non-finite coupling {bad}")));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Declared range `R`, one less than the number of entries.
    pub fn range(&self) -> usize {
        self.entries.len() - 1
    }

    /// Index of the last non-zero coupling, `None` when all vanish.
    pub fn effective_range(&self) -> Option<usize> {
        self.entries.iter().rposition(|&x| x != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.effective_range().is_none()
    }

    pub fn get(&self, r: usize) -> f64 {
        self.entries.get(r).copied().unwrap_or(0.0)
    }

    pub fn with_entry(&self, r: usize, value: f64) -> Result<Self> {
        if r > self.range() {
            return Err(Error::InvalidArgument(format!(
                "coupling index {r} exceeds range {}",
                self.range()
            )));
        }
        let mut entries = self.entries.clone();
        entries[r] = value;
        Self::new(entries)
    }

    /// Unit vector `e_r` of the same length.
    pub fn unit(&self, r: usize) -> Result<Self> {
        let zeros = Self::new(vec![0.0; self.entries.len()])?;
        zeros.with_entry(r, 1.0)
    }

    /// Largest `Σ|λ_r|`, an upper bound on every band energy.
    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|x| x.abs()).sum()
    }
}

impl TryFrom<&[f64]> for CouplingVector {
    type Error = Error;

    fn try_from(value: &[f64]) -> Result<Self> {
        Self::new(value.to_vec())
    }
}

/// Bloch function `h(k) = Σ_r λ_r e^{ikr}`; band energies are `±|h(k)|`.
pub fn bloch_h(couplings: &CouplingVector, k: f64) -> C64 {
    couplings
        .entries()
        .iter()
        .enumerate()
        .map(|(r, &l)| {
            let phase = k * r as f64;
            C64::new(l * phase.cos(), l * phase.sin())
        })
        .sum()
}

/// Parameters of the Chern insulator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CiParams {
    pub m0: f64,
    pub lambda0: f64,
}

impl CiParams {
    pub fn new(m0: f64, lambda0: f64) -> Result<Self> {
        if !(m0.is_finite() && lambda0.is_finite()) {
            return Err(Error::InvalidArgument("CI parameters must be finite".into()));
        }
        Ok(Self { m0, lambda0 })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelFamily {
    Essh(CouplingVector),
    Hoti(CouplingVector),
    Ci(CiParams),
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Essh(_) => "ESSH_1D",
            ModelFamily::Hoti(_) => "HOTI_2D",
            ModelFamily::Ci(_) => "CI_2D",
        }
    }

    fn orbitals(&self) -> usize {
        match self {
            ModelFamily::Essh(_) | ModelFamily::Ci(_) => 2,
            ModelFamily::Hoti(_) => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Which matrix a 2D builder returns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Representation {
    /// The orbital-space Bloch matrix at `(k_x, k_y)`.
    Bloch { kx: f64, ky: f64 },
    /// The `L×L` lattice, open or periodic according to the boundary setting.
    RealSpace,
}

/// Complete description of a finite lattice Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    family: ModelFamily,
    length: usize,
    boundary: Boundary,
}

impl LatticeSpec {
    pub fn essh(couplings: CouplingVector, length: usize, boundary: Boundary) -> Result<Self> {
        if length <= couplings.range() {
            return Err(Error::SizeTooSmall {
                length,
                range: couplings.range(),
            });
        }
        Ok(Self {
            family: ModelFamily::Essh(couplings),
            length,
            boundary,
        })
    }

    /// Higher-order insulator; exactly `(λ₀, λ₁, λ₂)` are required.
    pub fn hoti(couplings: CouplingVector, length: usize, boundary: Boundary) -> Result<Self> {
        if couplings.entries().len() != 3 {
            return Err(Error::InvalidCouplings(format!(
                "HOTI takes exactly (λ0, λ1, λ2), got {} entries",
                couplings.entries().len()
            )));
        }
        if length <= 2 {
            return Err(Error::SizeTooSmall { length, range: 2 });
        }
        Ok(Self {
            family: ModelFamily::Hoti(couplings),
            length,
            boundary,
        })
    }

    pub fn ci(params: CiParams, length: usize, boundary: Boundary) -> Result<Self> {
        if length <= 2 {
            return Err(Error::SizeTooSmall { length, range: 2 });
        }
        Ok(Self {
            family: ModelFamily::Ci(params),
            length,
            boundary,
        })
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        Self {
            boundary,
            ..self.clone()
        }
    }

    pub fn with_length(&self, length: usize) -> Result<Self> {
        match &self.family {
            ModelFamily::Essh(c) => Self::essh(c.clone(), length, self.boundary),
            ModelFamily::Hoti(c) => Self::hoti(c.clone(), length, self.boundary),
            ModelFamily::Ci(p) => Self::ci(*p, length, self.boundary),
        }
    }

    /// Couplings of the chiral families.
    pub fn couplings(&self) -> Option<&CouplingVector> {
        match &self.family {
            ModelFamily::Essh(c) | ModelFamily::Hoti(c) => Some(c),
            ModelFamily::Ci(_) => None,
        }
    }

    /// Hilbert-space dimension of the real-space Hamiltonian.
    pub fn dim(&self) -> usize {
        match self.family {
            ModelFamily::Essh(_) => 2 * self.length,
            _ => self.family.orbitals() * self.length * self.length,
        }
    }

    pub fn is_two_dimensional(&self) -> bool {
        !matches!(self.family, ModelFamily::Essh(_))
    }

    /// Whether the model has a sublattice (chiral) structure.
    pub fn is_chiral(&self) -> bool {
        !matches!(self.family, ModelFamily::Ci(_))
    }

    /// Tunable parameters: `λ_r` for the chiral families, `(m₀, λ₀)` for the CI.
    pub fn parameters(&self) -> Vec<f64> {
        match &self.family {
            ModelFamily::Essh(c) | ModelFamily::Hoti(c) => c.entries().to_vec(),
            ModelFamily::Ci(p) => vec![p.m0, p.lambda0],
        }
    }

    pub fn parameter_name(&self, index: usize) -> String {
        match &self.family {
            ModelFamily::Ci(_) => match index {
                0 => "m0".into(),
                _ => "lambda0".into(),
            },
            _ => format!("lambda{index}"),
        }
    }

    pub fn with_parameters(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.parameters().len() {
            return Err(Error::InvalidArgument(format!(
                "{} takes {} parameters, got {}",
                self.family.name(),
                self.parameters().len(),
                values.len()
            )));
        }
        let family = match &self.family {
            ModelFamily::Essh(_) => ModelFamily::Essh(CouplingVector::new(values.to_vec())?),
            ModelFamily::Hoti(_) => ModelFamily::Hoti(CouplingVector::new(values.to_vec())?),
            ModelFamily::Ci(_) => ModelFamily::Ci(CiParams::new(values[0], values[1])?),
        };
        Ok(Self {
            family,
            ..self.clone()
        })
    }

    pub fn with_parameter(&self, index: usize, value: f64) -> Result<Self> {
        let mut values = self.parameters();
        if index >= values.len() {
            return Err(Error::InvalidArgument(format!(
                "parameter index {index} out of range for {}",
                self.family.name()
            )));
        }
        values[index] = value;
        self.with_parameters(&values)
    }

    /// Sublattice sign per basis index (+1 on A, −1 on B) for chiral families.
    pub fn sublattice_signs(&self) -> Option<Vec<f64>> {
        let (a, b) = self.sublattice_indices()?;
        let mut s = vec![0.0; self.dim()];
        a.iter().for_each(|&i| s[i] = 1.0);
        b.iter().for_each(|&i| s[i] = -1.0);
        Some(s)
    }

    /// Basis indices of sublattices A and B, each ascending.
    pub fn sublattice_indices(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        let n = self.dim();
        match self.family {
            ModelFamily::Essh(_) => Some(((0..n).step_by(2).collect(), (1..n).step_by(2).collect())),
            ModelFamily::Hoti(_) => Some((
                (0..n).filter(|i| i % 4 < 2).collect(),
                (0..n).filter(|i| i % 4 >= 2).collect(),
            )),
            ModelFamily::Ci(_) => None,
        }
    }

    /// One-based unit-cell coordinates `(x, y)` of each basis index (`y = 1` in 1D).
    pub fn cell_coordinates(&self) -> Vec<(usize, usize)> {
        let norb = self.family.orbitals();
        (0..self.dim())
            .map(|i| {
                let cell = i / norb;
                match self.family {
                    ModelFamily::Essh(_) => (cell + 1, 1),
                    _ => (cell % self.length + 1, cell / self.length + 1),
                }
            })
            .collect()
    }
}

/// Real-space Hamiltonian of any family.
pub fn hamiltonian(spec: &LatticeSpec) -> Result<DenseHermitian> {
    match spec.family {
        ModelFamily::Essh(_) => build_essh_real(spec),
        ModelFamily::Hoti(_) => build_hoti(spec, Representation::RealSpace),
        ModelFamily::Ci(_) => build_ci(spec, Representation::RealSpace),
    }
}

pub fn build_essh_real(spec: &LatticeSpec) -> Result<DenseHermitian> {
    let ModelFamily::Essh(c) = &spec.family else {
        return Err(wrong_family("ESSH_1D", spec));
    };
    let l = spec.length;
    let mut h = Mat::<C64>::zeros(2 * l, 2 * l);
    for (r, &lambda) in c.entries().iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        for j in 0..l {
            let target = match spec.boundary {
                Boundary::Open if j + r >= l => continue,
                Boundary::Open => j + r,
                Boundary::Periodic => (j + r) % l,
            };
            h[(2 * target, 2 * j + 1)] += C64::new(lambda, 0.0);
            h[(2 * j + 1, 2 * target)] += C64::new(lambda, 0.0);
        }
    }
    DenseHermitian::new(h)
}

/// The `A×B` block `X` of a chiral Hamiltonian `H = [[0, X], [X†, 0]]`.
///
/// Rows follow [`LatticeSpec::sublattice_indices`]'s A list, columns the B list.
pub fn chiral_block(spec: &LatticeSpec) -> Result<Mat<C64>> {
    match &spec.family {
        ModelFamily::Essh(c) => {
            let l = spec.length;
            let mut x = Mat::<C64>::zeros(l, l);
            for (r, &lambda) in c.entries().iter().enumerate() {
                for j in 0..l {
                    let target = match spec.boundary {
                        Boundary::Open if j + r >= l => continue,
                        Boundary::Open => j + r,
                        Boundary::Periodic => (j + r) % l,
                    };
                    x[(target, j)] += C64::new(lambda, 0.0);
                }
            }
            Ok(x)
        }
        ModelFamily::Hoti(_) => {
            let h = build_hoti(spec, Representation::RealSpace)?;
            let (a, b) = spec.sublattice_indices().expect("HOTI is chiral");
            Ok(Mat::from_fn(a.len(), b.len(), |i, j| h.get(a[i], b[j])))
        }
        ModelFamily::Ci(_) => Err(Error::WrongFamily {
            expected: "a chiral family (ESSH_1D or HOTI_2D)",
            found: spec.family.name(),
        }),
    }
}

/// `∂H/∂θ` for parameter `index`; every family is affine in its parameters.
pub fn driving_term(spec: &LatticeSpec, index: usize) -> Result<DenseHermitian> {
    let n = spec.parameters().len();
    if index >= n {
        return Err(Error::InvalidArgument(format!(
            "parameter index {index} out of range ({n} parameters)"
        )));
    }
    let mut unit = vec![0.0; n];
    unit[index] = 1.0;
    let with_unit = hamiltonian(&spec.with_parameters(&unit)?)?;
    let origin = hamiltonian(&spec.with_parameters(&vec![0.0; n])?)?;
    with_unit.add_scaled(-1.0, &origin)
}

/// Chiral block of `∂H/∂λ_index` for the chiral families.
pub fn driving_block(spec: &LatticeSpec, index: usize) -> Result<Mat<C64>> {
    let n = spec.parameters().len();
    if index >= n {
        return Err(Error::InvalidArgument(format!(
            "parameter index {index} out of range ({n} parameters)"
        )));
    }
    let mut unit = vec![0.0; n];
    unit[index] = 1.0;
    chiral_block(&spec.with_parameters(&unit)?)
}

pub fn build_hoti(spec: &LatticeSpec, repr: Representation) -> Result<DenseHermitian> {
    let ModelFamily::Hoti(c) = &spec.family else {
        return Err(wrong_family("HOTI_2D", spec));
    };
    assemble(&hoti_terms(c), 4, spec, repr)
}

pub fn build_ci(spec: &LatticeSpec, repr: Representation) -> Result<DenseHermitian> {
    let ModelFamily::Ci(p) = &spec.family else {
        return Err(wrong_family("CI_2D", spec));
    };
    assemble(&ci_terms(p), 2, spec, repr)
}

fn wrong_family(expected: &'static str, spec: &LatticeSpec) -> Error {
    Error::WrongFamily {
        expected,
        found: spec.family.name(),
    }
}

/// Fourier coefficients keyed by hopping vector `(dx, dy)`.
pub type FourierTerms = BTreeMap<(i64, i64), Mat<C64>>;

fn pauli(which: usize) -> [[C64; 2]; 2] {
    match which {
        0 => [[ONE, ZERO], [ZERO, ONE]],
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, -I], [I, ZERO]],
        _ => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// `τ_a ⊗ σ_b` with index `2τ + σ`.
fn tau_sigma(a: usize, b: usize) -> Mat<C64> {
    let (t, s) = (pauli(a), pauli(b));
    Mat::from_fn(4, 4, |i, j| t[i / 2][j / 2] * s[i % 2][j % 2])
}

/// The four Γ matrices, `gammas()[n - 1] = Γ_n`.
pub fn gammas() -> [Mat<C64>; 4] {
    let neg = |m: Mat<C64>| Mat::from_fn(4, 4, |i, j| -m[(i, j)]);
    [
        neg(tau_sigma(2, 1)),
        neg(tau_sigma(2, 2)),
        neg(tau_sigma(2, 3)),
        tau_sigma(1, 0),
    ]
}

fn add_into(terms: &mut FourierTerms, d: (i64, i64), m: &Mat<C64>, coef: C64) {
    let n = m.nrows();
    let entry = terms.entry(d).or_insert_with(|| Mat::zeros(n, n));
    for j in 0..n {
        for i in 0..n {
            entry[(i, j)] += m[(i, j)] * coef;
        }
    }
}

/// HOTI Bloch matrix `[λ₀ + Σ_r λ_r cos(rk_x)]Γ₄ + [Σ_r λ_r sin(rk_x)]Γ₃ + (x → y, Γ₄ → Γ₂, Γ₃ → Γ₁)`.
pub fn hoti_terms(c: &CouplingVector) -> FourierTerms {
    let g = gammas();
    let mut terms = FourierTerms::new();
    let l0 = C64::new(c.get(0), 0.0);
    add_into(&mut terms, (0, 0), &g[3], l0);
    add_into(&mut terms, (0, 0), &g[1], l0);
    for r in 1..=c.range() {
        let half = C64::new(0.5 * c.get(r), 0.0);
        let r = r as i64;
        for (sign, d_x, d_y) in [(1.0, (r, 0), (0, r)), (-1.0, (-r, 0), (0, -r))] {
            // e^{±irk}(Γ ∓ iΓ')/2 pairs sum to cos·Γ + sin·Γ'.
            add_into(&mut terms, d_x, &g[3], half);
            add_into(&mut terms, d_x, &g[2], -I * sign * half);
            add_into(&mut terms, d_y, &g[1], half);
            add_into(&mut terms, d_y, &g[0], -I * sign * half);
        }
    }
    terms
}

type Laurent = BTreeMap<(i64, i64), C64>;

fn laurent_mul(a: &Laurent, b: &Laurent) -> Laurent {
    let mut out = Laurent::new();
    for (&(ax, ay), &ca) in a {
        for (&(bx, by), &cb) in b {
            *out.entry((ax + bx, ay + by)).or_insert(ZERO) += ca * cb;
        }
    }
    out.retain(|_, v| *v != ZERO);
    out
}

/// Coefficients of `w(k) = d_x + i d_y = g(k)²`.
pub fn ci_winding_polynomial() -> BTreeMap<(i64, i64), C64> {
    let g: Laurent = [((-1, 0), ONE), ((0, -1), I), ((0, 0), C64::new(-1.0, -1.0))]
        .into_iter()
        .collect();
    laurent_mul(&g, &g)
}

/// CI Bloch matrix `[[d_z, w̄], [w, −d_z]]`.
pub fn ci_terms(p: &CiParams) -> FourierTerms {
    let sz = Mat::from_fn(2, 2, |i, j| pauli(3)[i][j]);
    let mut terms = FourierTerms::new();
    add_into(&mut terms, (0, 0), &sz, C64::new(p.m0, 0.0));
    let half = C64::new(0.5 * p.lambda0, 0.0);
    for d in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        add_into(&mut terms, d, &sz, half);
    }
    let lower = Mat::from_fn(2, 2, |i, j| if i == 1 && j == 0 { ONE } else { ZERO });
    let upper = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { ONE } else { ZERO });
    for ((dx, dy), w) in ci_winding_polynomial() {
        add_into(&mut terms, (dx, dy), &lower, w);
        add_into(&mut terms, (-dx, -dy), &upper, w.conj());
    }
    terms
}

/// `Σ_d C(d) e^{ik·d}`.
pub fn bloch_from_terms(terms: &FourierTerms, norb: usize, kx: f64, ky: f64) -> Mat<C64> {
    let mut h = Mat::<C64>::zeros(norb, norb);
    for (&(dx, dy), m) in terms {
        let phase = kx * dx as f64 + ky * dy as f64;
        let e = C64::new(phase.cos(), phase.sin());
        for j in 0..norb {
            for i in 0..norb {
                h[(i, j)] += m[(i, j)] * e;
            }
        }
    }
    h
}

fn real_from_terms(terms: &FourierTerms, norb: usize, l: usize, boundary: Boundary) -> Mat<C64> {
    let n = norb * l * l;
    let mut h = Mat::<C64>::zeros(n, n);
    let li = l as i64;
    for (&(dx, dy), m) in terms {
        for y in 0..li {
            for x in 0..li {
                let (tx, ty) = (x + dx, y + dy);
                let (tx, ty) = match boundary {
                    Boundary::Open => {
                        if !(0..li).contains(&tx) || !(0..li).contains(&ty) {
                            continue;
                        }
                        (tx, ty)
                    }
                    Boundary::Periodic => (tx.rem_euclid(li), ty.rem_euclid(li)),
                };
                let src = (x + li * y) as usize * norb;
                let dst = (tx + li * ty) as usize * norb;
                for b in 0..norb {
                    for a in 0..norb {
                        h[(dst + a, src + b)] += m[(a, b)];
                    }
                }
            }
        }
    }
    h
}

fn assemble(terms: &FourierTerms, norb: usize, spec: &LatticeSpec, repr: Representation) -> Result<DenseHermitian> {
    match repr {
        Representation::Bloch { kx, ky } => DenseHermitian::new(bloch_from_terms(terms, norb, kx, ky)),
        Representation::RealSpace => DenseHermitian::new(real_from_terms(terms, norb, spec.length, spec.boundary)),
    }
}

/// The momentum grid `k_j = −π + 2πj/n`, `j = 0..n`.
pub fn momentum_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(x: &[f64]) -> CouplingVector {
        CouplingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn bloch_h_anchors() {
        assert!(bloch_h(&cv(&[1.0, -1.0]), 0.0).norm() < 1e-15);
        assert!(bloch_h(&cv(&[1.0, 2.0, 1.0]), PI).norm() < 1e-14);
        for k in [-3.0, -1.0, 0.3, 2.9] {
            assert!((bloch_h(&cv(&[1.0, 0.0]), k) - ONE).norm() < 1e-15);
        }
    }

    #[test]
    fn open_chain_respects_range() {
        let c = cv(&[1.0, -4.0, 6.0, -4.0, 1.0]);
        assert!(matches!(
            LatticeSpec::essh(c.clone(), 4, Boundary::Open),
            Err(Error::SizeTooSmall { length: 4, range: 4 })
        ));
        let h = build_essh_real(&LatticeSpec::essh(c, 10, Boundary::Open).unwrap()).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if i % 2 == j % 2 {
                    assert_eq!(h.get(i, j), ZERO);
                }
            }
        }
        // ⟨a_{j+r}|H|b_j⟩ = λ_r
        assert_eq!(h.get(2 * 3, 2 * 1 + 1).re, 6.0);
        assert_eq!(h.get(2 * 5, 2 * 1 + 1).re, 1.0);
    }

    #[test]
    fn empty_couplings_rejected() {
        assert!(CouplingVector::new(vec![]).is_err());
    }

    #[test]
    fn hoti_bloch_anchors() {
        let spec = LatticeSpec::hoti(cv(&[1.0, 0.0, 0.0]), 4, Boundary::Open).unwrap();
        let h = build_hoti(&spec, Representation::Bloch { kx: 0.0, ky: 0.0 }).unwrap();
        let (vals, _) = crate::linalg::herm_eigen(h.matrix(), false).unwrap();
        for v in vals {
            assert!((v.abs() - 2f64.sqrt()).abs() < 1e-14);
        }
        let spec = LatticeSpec::hoti(cv(&[1.0, -2.0, 1.0]), 4, Boundary::Open).unwrap();
        let h = build_hoti(&spec, Representation::Bloch { kx: 0.0, ky: 0.0 }).unwrap();
        assert!(h.spectral_norm().unwrap() < 1e-14);
    }

    #[test]
    fn gammas_anticommute() {
        let g = gammas();
        for a in 0..4 {
            for b in 0..4 {
                let ab = &g[a] * &g[b];
                let ba = &g[b] * &g[a];
                for i in 0..4 {
                    for j in 0..4 {
                        let s = ab[(i, j)] + ba[(i, j)];
                        let expect = if a == b && i == j { 2.0 } else { 0.0 };
                        assert!((s - C64::new(expect, 0.0)).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn ci_polynomial_is_g_squared() {
        let w = ci_winding_polynomial();
        for (kx, ky) in [(0.3, -1.2), (2.0, 0.5), (-PI / 2.0, PI / 2.0)] {
            let g = C64::new(0.0, -kx).exp() - ONE + I * (C64::new(0.0, -ky).exp() - ONE);
            let val: C64 = w
                .iter()
                .map(|(&(dx, dy), c)| c * C64::new(0.0, kx * dx as f64 + ky * dy as f64).exp())
                .sum();
            assert!((val - g * g).norm() < 1e-13);
        }
    }

    #[test]
    fn ci_touching_anchors() {
        let spec = LatticeSpec::ci(CiParams::new(1.0, -0.5).unwrap(), 4, Boundary::Open).unwrap();
        let h = build_ci(&spec, Representation::Bloch { kx: 0.0, ky: 0.0 }).unwrap();
        assert!(h.spectral_norm().unwrap() < 1e-14);
        // m₀ = 0 closes d_z at (−π/2, π/2) whatever λ₀ is; |g|² = 4 there.
        let spec = LatticeSpec::ci(CiParams::new(0.0, 0.7).unwrap(), 4, Boundary::Open).unwrap();
        let h = build_ci(&spec, Representation::Bloch { kx: -PI / 2.0, ky: PI / 2.0 }).unwrap();
        assert!(h.get(0, 0).norm() < 1e-14);
        assert!(h.get(1, 0).norm() < 1e-13);
    }

    #[test]
    fn driving_term_is_unit_hopping() {
        let spec = LatticeSpec::essh(cv(&[1.0, 2.0, 1.0]), 6, Boundary::Open).unwrap();
        let d = driving_term(&spec, 2).unwrap();
        assert_eq!(d.get(2 * 2, 1).re, 1.0);
        assert_eq!(d.get(0, 1).re, 0.0);
        let ci = LatticeSpec::ci(CiParams::new(1.0, -0.5).unwrap(), 3, Boundary::Open).unwrap();
        let dm = driving_term(&ci, 0).unwrap();
        assert_eq!(dm.get(0, 0).re, 1.0);
        assert_eq!(dm.get(1, 1).re, -1.0);
    }

    #[test]
    fn chiral_block_matches_full_matrix() {
        for spec in [
            LatticeSpec::essh(cv(&[1.0, 0.5, -0.3]), 7, Boundary::Periodic).unwrap(),
            LatticeSpec::hoti(cv(&[1.0, -2.5, 0.4]), 4, Boundary::Open).unwrap(),
        ] {
            let h = hamiltonian(&spec).unwrap();
            let x = chiral_block(&spec).unwrap();
            let (a, b) = spec.sublattice_indices().unwrap();
            for (i, &ai) in a.iter().enumerate() {
                for (j, &bj) in b.iter().enumerate() {
                    assert_eq!(h.get(ai, bj), x[(i, j)]);
                }
                for &aj in &a {
                    assert_eq!(h.get(ai, aj), ZERO);
                }
            }
        }
    }
}
