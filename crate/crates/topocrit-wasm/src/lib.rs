//! Browser bindings for the interactive demo page in `www/`.
//!
//! Each export returns a flat `Float64Array`; the page reshapes it. The
//! computations live in plain functions so they can be tested natively.

use topocrit::edgetheory;
use topocrit::invariants::{self, Axis};
use topocrit::spectra;
use topocrit::CouplingVector;
use wasm_bindgen::prelude::*;

fn couplings(values: &[f64]) -> Result<CouplingVector, String> {
    CouplingVector::new(values.to_vec()).map_err(|e| e.to_string())
}

/// `[k₀, E₀, k₁, E₁, …, k_c, p]` where `p` is `NaN` for a gapped chain.
pub fn band_curve_data(values: &[f64], n_k: usize) -> Result<Vec<f64>, String> {
    let c = couplings(values)?;
    let mut out: Vec<f64> = spectra::band_energies_1d(&c, n_k)
        .map_err(|e| e.to_string())?
        .into_iter()
        .flat_map(|(k, e)| [k, e])
        .collect();
    let t = spectra::locate_band_touching(&c);
    let p = spectra::touching_order(&c, t.k_c).ok().and_then(|t| t.order_p).map_or(f64::NAN, f64::from);
    out.extend([t.k_c, p]);
    Ok(out)
}

/// Row-major winding numbers over two coupling axes; critical cells are `NaN`.
pub fn winding_map_data(base: &[f64], axis1: (usize, f64, f64, usize), axis2: (usize, f64, f64, usize)) -> Result<Vec<f64>, String> {
    for (index, ..) in [axis1, axis2] {
        if index >= base.len() {
            return Err(format!("axis index {index} is outside the coupling list"));
        }
    }
    let axis = |(i, a, b, n): (usize, f64, f64, usize)| Axis::uniform(format!("λ{i}"), a, b, n).map_err(|e| e.to_string());
    let diagram = invariants::phase_diagram(axis(axis1)?, axis(axis2)?, |x, y| {
        let mut v = base.to_vec();
        v[axis1.0] = x;
        v[axis2.0] = y;
        let c = CouplingVector::new(v)?;
        invariants::winding_number(&c, 64 * (c.range() + 1))
    });
    Ok(diagram.cells.iter().map(|c| c.map_or(f64::NAN, |w| w as f64)).collect())
}

/// `|φ_j|²` of every analytic left edge mode, concatenated, followed by `ξ`.
pub fn edge_profile_data(values: &[f64], length: usize) -> Result<Vec<f64>, String> {
    let c = couplings(values)?;
    let roots = edgetheory::edge_roots(&c).map_err(|e| e.to_string())?;
    let modes = edgetheory::analytic_edge_modes(&roots, length).map_err(|e| e.to_string())?;
    let xi = edgetheory::localization_length(edgetheory::LocalizationInput::Roots(&roots)).map_or(f64::NAN, |r| r.xi);
    let mut out: Vec<f64> = modes.iter().flat_map(|m| m.amplitudes.iter().map(|a| a.norm_sqr())).collect();
    out.push(xi);
    Ok(out)
}

#[wasm_bindgen]
pub fn band_curve(couplings: &[f64], n_k: usize) -> Result<Vec<f64>, JsError> {
    band_curve_data(couplings, n_k).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn winding_map(base: &[f64], index1: usize, start1: f64, end1: f64, points1: usize, index2: usize, start2: f64, end2: f64, points2: usize) -> Result<Vec<f64>, JsError> {
    winding_map_data(base, (index1, start1, end1, points1), (index2, start2, end2, points2)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn edge_profile(couplings: &[f64], length: usize) -> Result<Vec<f64>, JsError> {
    edge_profile_data(couplings, length).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_curve_reports_touching() {
        let d = band_curve_data(&[1.0, -1.0], 64).unwrap();
        assert_eq!(d.len(), 2 * 64 + 2);
        assert_eq!(d[d.len() - 1], 1.0);
        assert!(band_curve_data(&[2.0, 1.0], 64).unwrap().last().unwrap().is_nan());
    }

    #[test]
    fn winding_map_marks_phases() {
        let m = winding_map_data(&[1.0, 0.0], (0, 0.5, 2.5, 3), (1, 0.0, 2.0, 3)).unwrap();
        // λ₀ = 0.5, λ₁ = 2 lies in the w = 1 phase; λ₁ = 0 is trivial.
        assert_eq!(m[2], 1.0);
        assert_eq!(m[0], 0.0);
        assert!(winding_map_data(&[1.0, 0.0], (5, 0.0, 1.0, 2), (1, 0.0, 1.0, 2)).is_err());
    }

    #[test]
    fn edge_profile_is_normalized() {
        let d = edge_profile_data(&[1.0, -2.0], 60).unwrap();
        let total: f64 = d[..60].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((d[60] - 1.0 / 2f64.ln()).abs() < 1e-12);
    }
}
