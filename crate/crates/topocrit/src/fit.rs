//! Log–log regression for power laws `y = A·x^β` and the two-variable surface
//! `y = A·N^α·L^β`.

use crate::error::{Error, Result};

/// Result of an ordinary least-squares fit of `ln y` on `ln x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// `ln y_i − (ln A + β ln x_i)` per point.
    pub residuals: Vec<f64>,
}

impl ScalingFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} abscissae but {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", xs.len())));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Fit(format!("non-positive or non-finite value {bad}")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Fit("abscissae must be strictly increasing".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(ScalingFit {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
        residuals,
    })
}

/// Joint fit `ln y = ln A + α ln N + β ln L`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointFit {
    pub n_exponent: f64,
    pub l_exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_joint_power_law(ns: &[f64], ls: &[f64], ys: &[f64]) -> Result<JointFit> {
    if ns.len() != ls.len() || ns.len() != ys.len() {
        return Err(Error::Fit("input lengths differ".into()));
    }
    if ns.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", ns.len())));
    }
    if let Some(bad) = ns.iter().chain(ls).chain(ys).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Fit(format!("non-positive or non-finite value {bad}")));
    }
    let rows: Vec<[f64; 3]> = ns.iter().zip(ls).map(|(n, l)| [1.0, n.ln(), l.ln()]).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (row, y) in rows.iter().zip(&ly) {
        for i in 0..3 {
            atb[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let coef = solve3(ata, atb).ok_or_else(|| Error::Fit("design matrix is singular (vary both N and L)".into()))?;
    let residuals: Vec<f64> = rows
        .iter()
        .zip(&ly)
        .map(|(row, y)| y - (coef[0] + coef[1] * row[1] + coef[2] * row[2]))
        .collect();
    let mean = ly.iter().sum::<f64>() / ly.len() as f64;
    let syy: f64 = ly.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(JointFit {
        n_exponent: coef[1],
        l_exponent: coef[2],
        prefactor: coef[0].exp(),
        r_squared: if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 },
        residuals,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_integer_exponent() {
        let xs = [8.0, 12.0, 16.0, 20.0, 24.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.powf(4.09)).collect();
        assert!((fit_power_law(&xs, &ys).unwrap().exponent - 4.09).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 4.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 0.0, 9.0]).is_err());
        assert!(fit_power_law(&[1.0, 3.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn joint_surface() {
        let mut ns = vec![];
        let mut ls = vec![];
        let mut ys = vec![];
        for l in [20.0, 32.0, 44.0] {
            for n in [1.0, 2.0, 4.0, 8.0] {
                ns.push(n);
                ls.push(l);
                ys.push(0.7 * n * n * f64::powi(l, 4));
            }
        }
        let f = fit_joint_power_law(&ns, &ls, &ys).unwrap();
        assert!((f.n_exponent - 2.0).abs() < 1e-10);
        assert!((f.l_exponent - 4.0).abs() < 1e-10);
        assert!((f.prefactor - 0.7).abs() < 1e-9);
    }
}
