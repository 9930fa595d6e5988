//! Executes a configuration and writes its CSV and JSON artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use topocrit::adiabatic::{self, BranchBasis, DifferenceOptions, RampShape, SurfaceOptions};
use topocrit::edgetheory::{self, LocalizationInput};
use topocrit::fit::ScalingFit;
use topocrit::invariants::{self, Axis};
use topocrit::metrology::{self, Edge, ProbeSelector, Sublattice};
use topocrit::models::{self, Boundary, CiParams, CouplingVector, LatticeSpec};
use topocrit::spectra;

use crate::config::*;
use crate::CliError;

/// One CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Null,
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            // 17 significant digits round-trip every f64.
            Cell::Float(x) => write!(out, "{x:.16e}").unwrap(),
            Cell::Int(i) => write!(out, "{i}").unwrap(),
            Cell::Null => out.push_str("null"),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

/// A fitted exponent judged against its reference value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub name: String,
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub residuals: Vec<f64>,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl FitReport {
    pub fn new(name: &str, fit: &ScalingFit, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            exponent: fit.exponent,
            prefactor: fit.prefactor,
            r_squared: fit.r_squared,
            xs: fit.xs.clone(),
            ys: fit.ys.clone(),
            residuals: fit.residuals.clone(),
            reference,
            tolerance,
            pass: (fit.exponent - reference).abs() <= tolerance,
        }
    }
}

/// Everything an experiment produces before it touches the filesystem.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub fits: Vec<FitReport>,
    pub extra: Value,
}

impl Artifacts {
    pub fn csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn all_pass(&self) -> bool {
        self.fits.iter().all(|f| f.pass)
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn couplings(values: &[f64]) -> Result<CouplingVector, CliError> {
    Ok(CouplingVector::new(values.to_vec())?)
}

fn probe(p: Probe) -> ProbeSelector {
    match p {
        Probe::PolarizedEdge => ProbeSelector::PolarizedEdge,
        Probe::NearestZero => ProbeSelector::NearestZero,
    }
}

/// Touching order at the global band minimum; errors if the couplings are gapped.
fn critical_order(c: &CouplingVector) -> Result<u32, CliError> {
    let t = spectra::locate_band_touching(c);
    let t = spectra::touching_order(c, t.k_c)?;
    Ok(t.order_p.expect("classified touching"))
}

/// Runs the experiment on the current rayon pool.
pub fn execute(experiment: &Experiment) -> Result<Artifacts, CliError> {
    match experiment {
        Experiment::Band(c) => band(c),
        Experiment::PhaseDiagram(c) => phase_diagram(c),
        Experiment::QfiScaling(c) => qfi_scaling(c),
        Experiment::GapScaling(c) => gap_scaling(c),
        Experiment::GhzSurface(c) => ghz_surface(c),
        Experiment::EdgeAnalysis(c) => edge_analysis(c),
        Experiment::HotiScaling(c) => hoti_scaling(c),
        Experiment::ChernScaling(c) => chern_scaling(c),
    }
}

fn band(c: &BandConfig) -> Result<Artifacts, CliError> {
    let cv = couplings(&c.couplings)?;
    let rows = spectra::band_energies_1d(&cv, c.n_k)?
        .into_iter()
        .map(|(k, e)| vec![k.into(), e.into()])
        .collect();
    let t = spectra::locate_band_touching(&cv);
    let extra = match spectra::touching_order(&cv, t.k_c) {
        Ok(t) => json!({
            "k_c": t.k_c,
            "e_min": t.e_min,
            "order_p": t.order_p,
            "fitted_exponent": t.fitted_exponent,
            "r_squared": t.fit_quality,
            "derivative_order": t.derivative_order,
            "mixed_order": t.mixed_order,
        }),
        Err(_) => json!({ "k_c": t.k_c, "e_min": t.e_min, "order_p": null }),
    };
    Ok(Artifacts {
        header: header(&["k", "energy"]),
        rows,
        fits: vec![],
        extra: json!({ "touching": extra }),
    })
}

fn phase_diagram(c: &PhaseDiagramConfig) -> Result<Artifacts, CliError> {
    let axis = |a: &AxisConfig| Axis::uniform(format!("p{}", a.index), a.start, a.end, a.points);
    let (a1, a2) = (axis(&c.axis1)?, axis(&c.axis2)?);
    let params = |x: f64, y: f64| {
        let mut p = c.base.clone();
        p[c.axis1.index] = x;
        p[c.axis2.index] = y;
        p
    };
    let diagram = match c.model {
        Model::Essh => invariants::phase_diagram(a1, a2, |x, y| {
            let cv = CouplingVector::new(params(x, y))?;
            invariants::winding_number(&cv, c.n_k.max(64 * (cv.range() + 1)))
        }),
        Model::Ci => invariants::phase_diagram(a1, a2, |x, y| {
            let p = params(x, y);
            invariants::chern_number(&CiParams::new(p[0], p[1])?, c.n_k)
        }),
        Model::Hoti => invariants::phase_diagram(a1, a2, |x, y| {
            let spec = LatticeSpec::hoti(CouplingVector::new(params(x, y))?, c.length, Boundary::Open)?;
            invariants::multipole_chiral_number(&spec)
        }),
    };
    let mut rows = Vec::with_capacity(diagram.cells.len());
    for (i, &x) in diagram.axis1.values.iter().enumerate() {
        for (j, &y) in diagram.axis2.values.iter().enumerate() {
            let cell = diagram.get(i, j).map_or(Cell::Null, Cell::Int);
            rows.push(vec![x.into(), y.into(), cell]);
        }
    }
    let rejections: Vec<Value> = diagram
        .rejections
        .iter()
        .map(|(i, j, why)| json!({ "row": i, "column": j, "reason": why }))
        .collect();
    Ok(Artifacts {
        header: vec![diagram.axis1.name.clone(), diagram.axis2.name.clone(), "invariant".into()],
        rows,
        fits: vec![],
        extra: json!({ "critical_cells": rejections }),
    })
}

fn size_rows(results: &[metrology::QfiResult], sizes: &[usize]) -> Vec<Vec<Cell>> {
    sizes
        .iter()
        .zip(results)
        .map(|(&l, r)| vec![l.into(), r.value.into(), r.excluded_terms.into()])
        .collect()
}

fn qfi_scaling(c: &QfiScalingConfig) -> Result<Artifacts, CliError> {
    let cv = couplings(&c.couplings)?;
    let reference = match c.reference_exponent {
        Some(r) => r,
        None => 2.0 * critical_order(&cv)? as f64,
    };
    let (fit, results) = metrology::qfi_scaling(|l| LatticeSpec::essh(cv.clone(), l, Boundary::Open), &c.sizes, probe(c.probe), c.driving)?;
    Ok(Artifacts {
        header: header(&["length", "qfi", "excluded_terms"]),
        rows: size_rows(&results, &c.sizes),
        fits: vec![FitReport::new("qfi_exponent", &fit, reference, c.tolerance)],
        extra: Value::Null,
    })
}

fn gap_scaling(c: &GapScalingConfig) -> Result<Artifacts, CliError> {
    let cv = couplings(&c.couplings)?;
    let reference = match c.reference_exponent {
        Some(r) => r,
        None => -(critical_order(&cv)? as f64),
    };
    let fit = spectra::gap_scaling(|l| LatticeSpec::essh(cv.clone(), l, Boundary::Open), &c.sizes)?;
    let rows = c.sizes.iter().zip(&fit.ys).map(|(&l, &g)| vec![l.into(), g.into()]).collect();
    Ok(Artifacts {
        header: header(&["length", "gap"]),
        rows,
        fits: vec![FitReport::new("gap_exponent", &fit, reference, c.tolerance)],
        extra: Value::Null,
    })
}

fn ghz_surface(c: &GhzSurfaceConfig) -> Result<Artifacts, CliError> {
    let cv = couplings(&c.couplings)?;
    let options = SurfaceOptions {
        lambda_end: c.lambda_end,
        shape: match c.shape {
            Shape::Linear => RampShape::Linear,
            Shape::Cubic => RampShape::Cubic,
        },
        time_constant: c.time_constant,
        time_exponent: c.time_exponent,
        steps: c.steps,
        basis: match c.basis {
            Basis::SublatticePolarized => BranchBasis::SublatticePolarized,
            Basis::ChiralPair => BranchBasis::ChiralPair(c.pair_index),
        },
        difference: DifferenceOptions {
            relative_delta: c.relative_delta,
            richardson: c.richardson,
        },
    };
    let surface = adiabatic::ghz_scaling_surface(|l| LatticeSpec::essh(cv.clone(), l, Boundary::Open), c.parameter, &c.sizes, &c.particles, &options)?;
    let rows = surface
        .rows
        .iter()
        .map(|r| vec![r.length.into(), r.qfi.n.into(), r.qfi.value.into(), r.qfi.interference.into(), r.qfi.eigenstate.into()])
        .collect();
    let joint = |name: &str, exponent: f64, reference: f64, tolerance: f64| FitReport {
        name: name.to_string(),
        exponent,
        prefactor: surface.fit.prefactor,
        r_squared: surface.fit.r_squared,
        xs: vec![],
        ys: vec![],
        residuals: surface.fit.residuals.clone(),
        reference,
        tolerance,
        pass: (exponent - reference).abs() <= tolerance,
    };
    let coefficients: Vec<Value> = surface
        .coefficients
        .iter()
        .map(|k| {
            json!({
                "length": k.length,
                "total_time": k.schedule.total_time,
                "steps": k.schedule.steps,
                "a_imag": [k.a[0].im, k.a[1].im],
                "b": k.b,
                "cross_check": k.cross_check,
                "delta": k.delta,
                "unitarity_defect": k.unitarity_defect,
            })
        })
        .collect();
    Ok(Artifacts {
        header: header(&["length", "particles", "qfi", "interference", "eigenstate"]),
        rows,
        fits: vec![
            joint("n_exponent", surface.fit.n_exponent, c.n_reference, c.n_tolerance),
            joint("l_exponent", surface.fit.l_exponent, c.l_reference, c.l_tolerance),
        ],
        extra: json!({ "branches": coefficients }),
    })
}

fn edge_analysis(c: &EdgeAnalysisConfig) -> Result<Artifacts, CliError> {
    let cv = couplings(&c.couplings)?;
    let roots = edgetheory::edge_roots(&cv)?;
    let modes = edgetheory::analytic_edge_modes(&roots, c.length)?;
    let spec = LatticeSpec::essh(cv.clone(), c.length, Boundary::Open)?;
    let spectrum = spectra::eigh(&models::hamiltonian(&spec)?)?;
    let numerical: Vec<Vec<topocrit::C64>> = match metrology::select_zero_modes(&spec, &spectrum) {
        Ok(m) => m
            .into_iter()
            .filter(|m| m.edge == Edge::Left && m.sublattice == Sublattice::A)
            .map(|m| m.state.into_iter().step_by(2).collect())
            .collect(),
        Err(_) => vec![],
    };
    let analytic: Vec<Vec<topocrit::C64>> = modes.iter().map(|m| m.amplitudes.clone()).collect();
    let angles = if numerical.is_empty() {
        vec![]
    } else {
        edgetheory::principal_angles(&analytic, &numerical)?
    };
    let localization = edgetheory::localization_length(LocalizationInput::Roots(&roots)).ok();
    let mut head = vec!["site".to_string()];
    head.extend((0..analytic.len()).map(|i| format!("analytic_{i}")));
    head.extend((0..numerical.len()).map(|i| format!("numerical_{i}")));
    let rows = (0..c.length)
        .map(|j| {
            let mut row = vec![Cell::from(j + 1)];
            row.extend(analytic.iter().chain(&numerical).map(|m| Cell::Float(m[j].norm())));
            row
        })
        .collect();
    let mut fits = vec![];
    if let Some(xi) = &c.xi {
        let base = couplings(&xi.base)?;
        let fit = edgetheory::xi_exponent(|d| base.with_entry(xi.index, base.get(xi.index) + d), &xi.deltas)?;
        fits.push(FitReport::new("xi_exponent", &fit, xi.reference_exponent, xi.tolerance));
    }
    let root_list: Vec<Value> = roots
        .roots
        .iter()
        .map(|r| json!({ "re": r.z.re, "im": r.z.im, "modulus": r.z.norm(), "multiplicity": r.multiplicity }))
        .collect();
    Ok(Artifacts {
        header: head,
        rows,
        fits,
        extra: json!({
            "roots": root_list,
            "inside_count": roots.inside_count,
            "on_circle_count": roots.on_circle_count,
            "localization_length": localization.map(|l| l.xi),
            "principal_angles": angles,
            "min_overlap": angles.iter().map(|a: &f64| a.cos().powi(2)).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x)))),
        }),
    })
}

fn hoti_scaling(c: &HotiScalingConfig) -> Result<Artifacts, CliError> {
    let cv = couplings(&c.couplings)?;
    let (fit, results) = metrology::qfi_scaling(|l| LatticeSpec::hoti(cv.clone(), l, Boundary::Open), &c.sizes, probe(c.probe), c.driving)?;
    Ok(Artifacts {
        header: header(&["length", "qfi", "excluded_terms"]),
        rows: size_rows(&results, &c.sizes),
        fits: vec![FitReport::new("qfi_exponent", &fit, c.reference_exponent, c.tolerance)],
        extra: Value::Null,
    })
}

fn chern_scaling(c: &ChernScalingConfig) -> Result<Artifacts, CliError> {
    let params = CiParams::new(c.m0, c.lambda0)?;
    let (fit, results) = metrology::qfi_scaling(|l| LatticeSpec::ci(params, l, Boundary::Open), &c.sizes, probe(c.probe), c.driving)?;
    Ok(Artifacts {
        header: header(&["length", "qfi", "excluded_terms"]),
        rows: size_rows(&results, &c.sizes),
        fits: vec![FitReport::new("qfi_exponent", &fit, c.reference_exponent, c.tolerance)],
        extra: Value::Null,
    })
}

/// Files written by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub artifacts: Artifacts,
    pub wall_time: f64,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.artifacts.all_pass()
    }
}

/// Executes on a dedicated pool of `workers` threads and writes
/// `<experiment>.csv` and `<experiment>.json` into `out_dir`.
pub fn run_experiment(config: &Config, workers: usize, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    let started = Instant::now();
    let artifacts = pool.install(|| execute(&config.experiment))?;
    let wall_time = started.elapsed().as_secs_f64();
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        context: format!("creating {}", out_dir.display()),
        source,
    })?;
    let stem = config.experiment.name().to_ascii_lowercase();
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let json_path = out_dir.join(format!("{stem}.json"));
    let write = |path: &Path, body: &str| {
        std::fs::write(path, body).map_err(|source| CliError::Io {
            context: format!("writing {}", path.display()),
            source,
        })
    };
    write(&csv_path, &artifacts.csv())?;
    let metadata = json!({
        "config": config.raw,
        "experiment": config.experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "workers": workers,
        "wall_time_seconds": wall_time,
        "fit_reports": artifacts.fits,
        "all_pass": artifacts.all_pass(),
        "details": artifacts.extra,
    });
    write(&json_path, &serde_json::to_string_pretty(&metadata).expect("serializable metadata"))?;
    Ok(RunOutcome {
        csv_path,
        json_path,
        artifacts,
        wall_time,
    })
}
