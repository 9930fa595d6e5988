//! Strict JSON experiment configuration.
//!
//! A document is an object with an `"experiment"` discriminator, the
//! experiment's own fields, and two optional runner keys, `"output"` and
//! `"workers"`. Any other key is an error.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Probe {
    PolarizedEdge,
    NearestZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Model {
    Essh,
    Hoti,
    Ci,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Shape {
    Linear,
    Cubic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Basis {
    SublatticePolarized,
    ChiralPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    /// Index into the model's parameter list.
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

fn default_n_k() -> usize {
    1024
}
fn default_phase_n_k() -> usize {
    512
}
fn default_one() -> usize {
    1
}
fn default_two() -> usize {
    2
}
fn default_polarized() -> Probe {
    Probe::PolarizedEdge
}
fn default_nearest() -> Probe {
    Probe::NearestZero
}
fn default_mcn_length() -> usize {
    10
}
fn default_linear() -> Shape {
    Shape::Linear
}
fn default_basis() -> Basis {
    Basis::SublatticePolarized
}
fn default_time_exponent() -> f64 {
    2.0
}
fn default_relative_delta() -> f64 {
    1e-4
}
fn default_qfi_tolerance() -> f64 {
    0.2
}
fn default_gap_tolerance() -> f64 {
    0.1
}
fn default_hoti_reference() -> f64 {
    4.09
}
fn default_ci_reference() -> f64 {
    4.03
}
fn default_two_d_tolerance() -> f64 {
    0.3
}
fn default_n_reference() -> f64 {
    2.0
}
fn default_n_tolerance() -> f64 {
    0.1
}
fn default_l_reference() -> f64 {
    4.0
}
fn default_l_tolerance() -> f64 {
    0.4
}
fn default_edge_length() -> usize {
    100
}
fn default_xi_tolerance() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub couplings: Vec<f64>,
    #[serde(default = "default_n_k")]
    pub n_k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub model: Model,
    /// Parameters before the axes are applied: couplings, or `[m0, lambda0]` for CI.
    pub base: Vec<f64>,
    pub axis1: AxisConfig,
    pub axis2: AxisConfig,
    #[serde(default = "default_phase_n_k")]
    pub n_k: usize,
    /// Flake size for the multipole chiral number.
    #[serde(default = "default_mcn_length")]
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfiScalingConfig {
    pub couplings: Vec<f64>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_one")]
    pub driving: usize,
    #[serde(default = "default_polarized")]
    pub probe: Probe,
    /// Defaults to `2p` with `p` the measured touching order.
    #[serde(default)]
    pub reference_exponent: Option<f64>,
    #[serde(default = "default_qfi_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapScalingConfig {
    pub couplings: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Defaults to `−p`.
    #[serde(default)]
    pub reference_exponent: Option<f64>,
    #[serde(default = "default_gap_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhzSurfaceConfig {
    /// Couplings at the start of the ramp.
    pub couplings: Vec<f64>,
    #[serde(default = "default_two")]
    pub parameter: usize,
    pub lambda_end: f64,
    pub sizes: Vec<usize>,
    pub particles: Vec<usize>,
    #[serde(default)]
    pub time_constant: Option<f64>,
    #[serde(default = "default_time_exponent")]
    pub time_exponent: f64,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "default_linear")]
    pub shape: Shape,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    /// Singular index for the chiral-pair basis.
    #[serde(default)]
    pub pair_index: usize,
    #[serde(default = "default_relative_delta")]
    pub relative_delta: f64,
    #[serde(default)]
    pub richardson: bool,
    #[serde(default = "default_n_reference")]
    pub n_reference: f64,
    #[serde(default = "default_n_tolerance")]
    pub n_tolerance: f64,
    #[serde(default = "default_l_reference")]
    pub l_reference: f64,
    #[serde(default = "default_l_tolerance")]
    pub l_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiConfig {
    /// Critical couplings the sweep starts from.
    pub base: Vec<f64>,
    /// Coupling index that receives the offset `δ`.
    pub index: usize,
    pub deltas: Vec<f64>,
    pub reference_exponent: f64,
    #[serde(default = "default_xi_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeAnalysisConfig {
    pub couplings: Vec<f64>,
    #[serde(default = "default_edge_length")]
    pub length: usize,
    #[serde(default)]
    pub xi: Option<XiConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotiScalingConfig {
    pub couplings: Vec<f64>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_two")]
    pub driving: usize,
    #[serde(default = "default_polarized")]
    pub probe: Probe,
    #[serde(default = "default_hoti_reference")]
    pub reference_exponent: f64,
    #[serde(default = "default_two_d_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernScalingConfig {
    pub m0: f64,
    pub lambda0: f64,
    pub sizes: Vec<usize>,
    /// `0` drives `m0`, `1` drives `lambda0`.
    #[serde(default = "default_one")]
    pub driving: usize,
    #[serde(default = "default_nearest")]
    pub probe: Probe,
    #[serde(default = "default_ci_reference")]
    pub reference_exponent: f64,
    #[serde(default = "default_two_d_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Experiment {
    Band(BandConfig),
    PhaseDiagram(PhaseDiagramConfig),
    QfiScaling(QfiScalingConfig),
    GapScaling(GapScalingConfig),
    GhzSurface(GhzSurfaceConfig),
    EdgeAnalysis(EdgeAnalysisConfig),
    HotiScaling(HotiScalingConfig),
    ChernScaling(ChernScalingConfig),
}

impl Experiment {
    pub const NAMES: [(&'static str, &'static str); 8] = [
        ("BAND", "upper band E+(k) of an eSSH chain and its touching point"),
        ("PHASE_DIAGRAM", "invariant over a two-parameter grid (winding, Chern or multipole chiral number)"),
        ("QFI_SCALING", "edge-probe QFI versus chain length at criticality"),
        ("GAP_SCALING", "bulk-edge gap versus chain length at criticality"),
        ("GHZ_SURFACE", "GHZ-probe QFI over particle number and size after a ramp to criticality"),
        ("EDGE_ANALYSIS", "boundary-polynomial roots, analytic edge modes and localization scaling"),
        ("HOTI_SCALING", "corner-probe QFI versus flake size for the higher-order insulator"),
        ("CHERN_SCALING", "QFI versus size for the Chern insulator at its transition"),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Band(_) => "BAND",
            Experiment::PhaseDiagram(_) => "PHASE_DIAGRAM",
            Experiment::QfiScaling(_) => "QFI_SCALING",
            Experiment::GapScaling(_) => "GAP_SCALING",
            Experiment::GhzSurface(_) => "GHZ_SURFACE",
            Experiment::EdgeAnalysis(_) => "EDGE_ANALYSIS",
            Experiment::HotiScaling(_) => "HOTI_SCALING",
            Experiment::ChernScaling(_) => "CHERN_SCALING",
        }
    }
}

/// A parsed configuration document.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub experiment: Experiment,
    pub output: Option<String>,
    pub workers: Option<usize>,
    /// The document as written, echoed into the metadata.
    pub raw: Value,
}

/// Line (1-based) of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.find(&needle).map(|pos| text[..pos].matches('\n').count() + 1)
}

/// Pulls the offending field name out of a serde message such as ``unknown field `x` ``.
fn quoted_field(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        let Value::Object(mut map) = raw.clone() else {
            return Err(CliError::Config("top level must be a JSON object".into()));
        };
        let output = take_string(&mut map, "output")?;
        let workers = take_workers(&mut map)?;
        let experiment: Experiment = serde_json::from_value(Value::Object(map)).map_err(|e| {
            let msg = e.to_string();
            match quoted_field(&msg).and_then(|f| line_of(text, f).map(|l| (f, l))) {
                Some((field, line)) => CliError::Config(format!("line {line}, field `{field}`: {msg}")),
                None => CliError::Config(msg),
            }
        })?;
        let config = Self {
            experiment,
            output,
            workers,
            raw,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("field `{field}`: {why}")));
        let sizes_ok = |field: &str, sizes: &[usize], min_len: usize, min_size: usize| -> Result<(), CliError> {
            if sizes.is_empty() {
                return bad(field, "must not be empty");
            }
            if sizes.len() < min_len {
                return bad(field, &format!("needs at least {min_len} entries for a fit"));
            }
            if sizes.windows(2).any(|w| w[1] <= w[0]) {
                return bad(field, "must be strictly increasing");
            }
            if sizes[0] < min_size {
                return bad(field, &format!("entries must be at least {min_size}"));
            }
            Ok(())
        };
        let couplings_ok = |c: &[f64]| -> Result<(), CliError> {
            if c.is_empty() || c.iter().any(|x| !x.is_finite()) {
                return bad("couplings", "must be a non-empty list of finite numbers");
            }
            Ok(())
        };
        let tolerance_ok = |field: &str, t: f64| if t > 0.0 && t.is_finite() { Ok(()) } else { bad(field, "must be positive") };
        if self.workers == Some(0) {
            return bad("workers", "must be at least 1");
        }
        match &self.experiment {
            Experiment::Band(c) => {
                couplings_ok(&c.couplings)?;
                if c.n_k < 2 * c.couplings.len() + 2 {
                    return bad("n_k", "must be at least 2R + 2");
                }
            }
            Experiment::PhaseDiagram(c) => {
                for (name, axis) in [("axis1", &c.axis1), ("axis2", &c.axis2)] {
                    if axis.points == 0 || !(axis.start.is_finite() && axis.end.is_finite()) {
                        return bad(name, "needs points ≥ 1 and finite bounds");
                    }
                    if axis.index >= c.base.len() {
                        return bad(name, "index is outside the parameter list");
                    }
                }
                if c.axis1.index == c.axis2.index {
                    return bad("axis2", "must vary a different parameter than axis1");
                }
                match c.model {
                    Model::Ci if c.base.len() != 2 => return bad("base", "CI takes [m0, lambda0]"),
                    Model::Hoti if c.base.len() != 3 => return bad("base", "HOTI takes three couplings"),
                    _ => couplings_ok(&c.base)?,
                }
                if c.n_k < 4 {
                    return bad("n_k", "must be at least 4");
                }
                if c.length < 3 {
                    return bad("length", "must be at least 3");
                }
            }
            Experiment::QfiScaling(c) => {
                couplings_ok(&c.couplings)?;
                sizes_ok("sizes", &c.sizes, 4, c.couplings.len())?;
                if c.driving >= c.couplings.len() {
                    return bad("driving", "is outside the coupling list");
                }
                tolerance_ok("tolerance", c.tolerance)?;
            }
            Experiment::GapScaling(c) => {
                couplings_ok(&c.couplings)?;
                sizes_ok("sizes", &c.sizes, 4, c.couplings.len())?;
                tolerance_ok("tolerance", c.tolerance)?;
            }
            Experiment::GhzSurface(c) => {
                couplings_ok(&c.couplings)?;
                sizes_ok("sizes", &c.sizes, 2, c.couplings.len())?;
                sizes_ok("particles", &c.particles, 2, 1)?;
                if c.parameter >= c.couplings.len() {
                    return bad("parameter", "is outside the coupling list");
                }
                if !c.lambda_end.is_finite() {
                    return bad("lambda_end", "must be finite");
                }
                if let Some(t) = c.time_constant {
                    tolerance_ok("time_constant", t)?;
                }
                if matches!(c.steps, Some(s) if s < 100) {
                    return bad("steps", "must be at least 100");
                }
                tolerance_ok("relative_delta", c.relative_delta)?;
                tolerance_ok("n_tolerance", c.n_tolerance)?;
                tolerance_ok("l_tolerance", c.l_tolerance)?;
            }
            Experiment::EdgeAnalysis(c) => {
                couplings_ok(&c.couplings)?;
                if c.length <= c.couplings.len() {
                    return bad("length", "must exceed the coupling range");
                }
                if let Some(xi) = &c.xi {
                    couplings_ok(&xi.base)?;
                    if xi.index >= xi.base.len() {
                        return bad("xi.index", "is outside the coupling list");
                    }
                    if xi.deltas.len() < 3 || xi.deltas.iter().any(|d| !(*d > 0.0)) || xi.deltas.windows(2).any(|w| w[1] <= w[0]) {
                        return bad("xi.deltas", "needs at least 3 positive, increasing values");
                    }
                    tolerance_ok("xi.tolerance", xi.tolerance)?;
                }
            }
            Experiment::HotiScaling(c) => {
                if c.couplings.len() != 3 {
                    return bad("couplings", "HOTI takes three couplings");
                }
                couplings_ok(&c.couplings)?;
                sizes_ok("sizes", &c.sizes, 4, 3)?;
                if c.driving >= 3 {
                    return bad("driving", "is outside the coupling list");
                }
                tolerance_ok("tolerance", c.tolerance)?;
            }
            Experiment::ChernScaling(c) => {
                if !(c.m0.is_finite() && c.lambda0.is_finite()) {
                    return bad("m0", "parameters must be finite");
                }
                sizes_ok("sizes", &c.sizes, 4, 3)?;
                if c.driving >= 2 {
                    return bad("driving", "must be 0 (m0) or 1 (lambda0)");
                }
                if c.probe == Probe::PolarizedEdge {
                    return bad("probe", "the Chern insulator has no sublattice structure; use NEAREST_ZERO");
                }
                tolerance_ok("tolerance", c.tolerance)?;
            }
        }
        Ok(())
    }
}

fn take_string(map: &mut Map<String, Value>, key: &str) -> Result<Option<String>, CliError> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(CliError::Config(format!("field `{key}`: expected a string, found {other}"))),
    }
}

fn take_workers(map: &mut Map<String, Value>) -> Result<Option<usize>, CliError> {
    match map.remove("workers") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| CliError::Config(format!("field `workers`: expected a positive integer, found {v}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_defaults() {
        let c = Config::parse(r#"{"experiment": "BAND", "couplings": [1, -1]}"#).unwrap();
        assert_eq!(
            c.experiment,
            Experiment::Band(BandConfig {
                couplings: vec![1.0, -1.0],
                n_k: 1024
            })
        );
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "{\n  \"experiment\": \"BAND\",\n  \"couplings\": [1, -1],\n  \"lamda\": 2\n}";
        let err = Config::parse(text).unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("lamda"), "{err}");
    }

    #[test]
    fn runner_keys_are_accepted() {
        let c = Config::parse(r#"{"experiment": "GAP_SCALING", "couplings": [1, -1], "sizes": [8, 16, 32, 64], "workers": 3, "output": "out"}"#).unwrap();
        assert_eq!(c.workers, Some(3));
        assert_eq!(c.output.as_deref(), Some("out"));
    }

    #[test]
    fn empty_sizes_rejected() {
        assert!(Config::parse(r#"{"experiment": "QFI_SCALING", "couplings": [1, -1], "sizes": []}"#).is_err());
    }

    #[test]
    fn unknown_experiment_rejected() {
        assert!(Config::parse(r#"{"experiment": "NOPE"}"#).is_err());
        assert!(Config::parse(r#"{"couplings": [1]}"#).is_err());
    }
}
