//! Closed-form reference values checked against the numerical routines.

use std::f64::consts::PI;

use topocrit::edgetheory::{self, LocalizationInput};
use topocrit::metrology::{self, DrivingTerm};
use topocrit::{invariants, spectra, Boundary, CiParams, CouplingVector, LatticeSpec, C64};

fn cv(x: &[f64]) -> CouplingVector {
    CouplingVector::new(x.to_vec()).unwrap()
}

// A left mode with ratio q has |φ_j|² ∝ s^(j−1), s = q², a geometric law with
// mean 1 + s/(1−s) and variance s/(1−s)².
#[test]
fn geometric_mode_moments() {
    let roots = edgetheory::edge_roots(&cv(&[1.0, -2.0])).unwrap();
    let mode = &edgetheory::analytic_edge_modes(&roots, 200).unwrap()[0];
    let (mean, var) = edgetheory::position_moments(&mode.amplitudes);
    let s = 0.25;
    assert!((mean - (1.0 + s / (1.0 - s))).abs() < 1e-12, "{mean}");
    assert!((var - s / (1.0f64 - s).powi(2)).abs() < 1e-12, "{var}");
}

#[test]
fn localization_length_is_inverse_log_ratio() {
    let roots = edgetheory::edge_roots(&cv(&[1.0, -2.0])).unwrap();
    let xi = edgetheory::localization_length(LocalizationInput::Roots(&roots)).unwrap().xi;
    assert!((xi - 1.0 / 2f64.ln()).abs() < 1e-12, "{xi}");
}

// For ψ_n ∝ q^n the QFI in q is the Fisher information of a geometric law,
// 4/(1−q²)², and q = −λ₀/λ₁ carries it to either coupling.
#[test]
fn polarized_qfi_of_two_site_chain() {
    let (l0, l1) = (1.0, -2.0);
    let q: f64 = -l0 / l1;
    let fq = 4.0 / (1.0 - q * q).powi(2);
    let spec = LatticeSpec::essh(cv(&[l0, l1]), 80, Boundary::Open).unwrap();
    let d1 = metrology::polarized_edge_qfi(&spec, 1).unwrap().value;
    let d0 = metrology::polarized_edge_qfi(&spec, 0).unwrap().value;
    assert!((d1 - fq * (l0 / (l1 * l1)).powi(2)).abs() < 1e-9, "{d1}");
    assert!((d0 - fq / (l1 * l1)).abs() < 1e-9, "{d0}");
}

// At λ₀ = λ₁ the open chain is a uniform hopping chain of 2L sites with
// levels 2cos(πn/(2L+1)); the lowest positive one is 2sin(π/(4L+2)).
#[test]
fn uniform_chain_gap() {
    for l in [8, 33, 100] {
        let spec = LatticeSpec::essh(cv(&[1.0, -1.0]), l, Boundary::Open).unwrap();
        let gap = spectra::bulk_edge_gap(&spec).unwrap();
        let exact = 2.0 * (PI / (4 * l + 2) as f64).sin();
        assert!((gap - exact).abs() < 1e-12, "L={l}: {gap} vs {exact}");
    }
}

#[test]
fn ssh_dispersion() {
    for (k, e) in spectra::band_energies_1d(&cv(&[1.0, -1.0]), 256).unwrap() {
        assert!((e - 2.0 * (k / 2.0).sin().abs()).abs() < 1e-12, "{k}: {e}");
    }
}

#[test]
fn periodic_chain_matches_bloch_energies() {
    let c = cv(&[0.7, -1.1, 0.4]);
    let l = 24;
    let spec = LatticeSpec::essh(c.clone(), l, Boundary::Periodic).unwrap();
    let mut numeric = spectra::positive_energies(&spec).unwrap();
    let mut bloch: Vec<f64> = (0..l)
        .map(|m| {
            let k = 2.0 * PI * m as f64 / l as f64;
            c.entries().iter().enumerate().map(|(r, &x)| C64::from_polar(x, k * r as f64)).sum::<C64>().norm()
        })
        .collect();
    numeric.sort_by(f64::total_cmp);
    bloch.sort_by(f64::total_cmp);
    for (a, b) in numeric.iter().zip(&bloch) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

// Two roots of 1 + 0.3z + 2z² have product 1/2 and equal modulus 1/√2.
#[test]
fn winding_of_known_polynomials() {
    assert_eq!(invariants::winding_number(&cv(&[0.5, 1.0]), 256).unwrap(), 1);
    assert_eq!(invariants::winding_number(&cv(&[2.0, 1.0]), 256).unwrap(), 0);
    assert_eq!(invariants::winding_number(&cv(&[1.0, 0.3, 2.0]), 256).unwrap(), 2);
    assert!(invariants::winding_number(&cv(&[1.0, -1.0]), 256).is_err());
}

#[test]
fn chern_regression_values() {
    assert_eq!(invariants::chern_number(&CiParams::new(1.0, -1.0).unwrap(), 32).unwrap(), 2);
    assert_eq!(invariants::chern_number(&CiParams::new(5.0, 1.0).unwrap(), 32).unwrap(), 0);
}

#[test]
fn two_level_qfi_is_one() {
    use topocrit::DenseHermitian;
    let h = |x: f64| DenseHermitian::from_fn(2, |i, j| if i != j { C64::new(x, 0.0) } else { C64::new(if i == 0 { 1.0 } else { -1.0 }, 0.0) });
    let s = spectra::eigh(&h(0.0).unwrap()).unwrap();
    let drive = DrivingTerm {
        r: 0,
        lambda: 0.0,
        matrix: DenseHermitian::from_fn(2, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0)).unwrap(),
    };
    assert!((metrology::qfi_perturbative(&s, &drive, 0, None).unwrap().value - 1.0).abs() < 1e-12);
    assert!((metrology::qfi_fidelity(h, 0.0, 1, None).unwrap().value - 1.0).abs() < 1e-6);
}
