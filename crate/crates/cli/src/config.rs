//! Run configuration: JSON parsing, defaults, validation.

use std::path::{Path, PathBuf};

use gesp_core::{CoefficientLaw, CovarianceKernel, KernelKind, QuadratureRule};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

fn default_dimension() -> usize {
    1
}
fn default_halfwidth() -> f64 {
    20.0
}
fn default_points() -> usize {
    256
}
fn default_modes() -> usize {
    64
}
fn default_zero_tol() -> f64 {
    1e-10
}
fn default_bank() -> usize {
    8
}
fn default_realizations() -> usize {
    10_000
}
fn default_z() -> f64 {
    4.0
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default = "default_halfwidth")]
    pub halfwidth: f64,
    #[serde(default = "default_points")]
    pub points_per_axis: usize,
    #[serde(default)]
    pub rule: QuadratureRule,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { halfwidth: default_halfwidth(), points_per_axis: default_points(), rule: QuadratureRule::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureChoice {
    #[default]
    Weighted,
    Lebesgue,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_dimension")]
    dimension: usize,
    #[serde(default)]
    domain: DomainConfig,
    kernel: Value,
    #[serde(default, alias = "N")]
    regularity_order: u32,
    #[serde(default, alias = "M")]
    growth_order: Option<u32>,
    #[serde(default)]
    measure: MeasureChoice,
    #[serde(default = "default_modes")]
    modes: usize,
    #[serde(default = "default_zero_tol")]
    zero_tol: f64,
    #[serde(default = "default_bank")]
    bank_size: usize,
    #[serde(default = "default_realizations")]
    realizations: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    coefficient_law: CoefficientLaw,
    #[serde(default = "default_z")]
    z_threshold: f64,
    #[serde(default = "default_output")]
    output: PathBuf,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dimension: usize,
    pub domain: DomainConfig,
    pub kernel: KernelKind,
    pub regularity_order: u32,
    pub growth_order: u32,
    pub measure: MeasureChoice,
    pub modes: usize,
    pub zero_tol: f64,
    pub bank_size: usize,
    pub realizations: usize,
    pub seed: u64,
    pub coefficient_law: CoefficientLaw,
    pub z_threshold: f64,
    pub output: PathBuf,
}

/// Command-line values that beat the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub modes: Option<usize>,
    pub realizations: Option<usize>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses JSON text; relative kernel file paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text)
        .map_err(|e| CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    let mut kernel = kernel_kind(&raw.kernel)?;
    if let KernelKind::GridFile { path } = &mut kernel {
        let p = Path::new(path.as_str());
        if p.is_relative() {
            *path = base.join(p).to_string_lossy().into_owned();
        }
    }
    let growth_order = match raw.growth_order {
        Some(m) => m,
        None => match &kernel {
            KernelKind::GridFile { .. } => 0,
            k => CovarianceKernel::builtin(k.clone()).map(|c| c.growth_order()).map_err(invalid("InvalidParameter"))?,
        },
    };
    let cfg = RunConfig {
        dimension: raw.dimension,
        domain: raw.domain,
        kernel,
        regularity_order: raw.regularity_order,
        growth_order,
        measure: raw.measure,
        modes: raw.modes,
        zero_tol: raw.zero_tol,
        bank_size: raw.bank_size,
        realizations: raw.realizations,
        seed: raw.seed,
        coefficient_law: raw.coefficient_law,
        z_threshold: raw.z_threshold,
        output: raw.output,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn invalid(precondition: &'static str) -> impl Fn(gesp_core::Error) -> CliError {
    move |e| CliError::Validation { precondition: precondition.into(), message: e.to_string() }
}

fn unknown_kernel(name: &str) -> CliError {
    CliError::Validation {
        precondition: "UnknownKernel".into(),
        message: format!(
            "unknown kernel {name:?}; builtins are {} (or grid-file with a path)",
            KernelKind::BUILTIN_NAMES.join(", ")
        ),
    }
}

fn kernel_kind(v: &Value) -> Result<KernelKind, CliError> {
    let object = match v {
        Value::String(name) => serde_json::json!({ "name": name }),
        Value::Object(_) => v.clone(),
        _ => {
            return Err(CliError::Validation {
                precondition: "KernelSpec".into(),
                message: "kernel must be a name or an object with a \"name\" field".into(),
            })
        }
    };
    let name = object.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
    if !KernelKind::BUILTIN_NAMES.contains(&name.as_str()) && name != "grid-file" {
        return Err(unknown_kernel(&name));
    }
    serde_json::from_value(object)
        .map_err(|e| CliError::Validation { precondition: "KernelSpec".into(), message: e.to_string() })
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(v) = &o.output {
            self.output = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.modes {
            self.modes = v;
        }
        if let Some(v) = o.realizations {
            self.realizations = v;
        }
        self.validate()
    }

    pub fn node_count(&self) -> usize {
        self.domain.points_per_axis.saturating_pow(self.dimension as u32)
    }

    fn validate(&self) -> Result<(), CliError> {
        let fail = |precondition: &str, message: String| {
            Err(CliError::Validation { precondition: precondition.into(), message })
        };
        if !(1..=gesp_core::grid::MAX_DIMENSION).contains(&self.dimension) {
            return fail("DimensionUnsupported", format!("dimension {} must be 1, 2 or 3", self.dimension));
        }
        let d = &self.domain;
        if !(d.halfwidth.is_finite() && d.halfwidth > 0.0) || d.points_per_axis < 2 {
            return fail(
                "DegenerateGrid",
                format!("halfwidth {} must be positive and points_per_axis {} at least 2", d.halfwidth, d.points_per_axis),
            );
        }
        if self.modes == 0 || self.modes > self.node_count() {
            return fail("TooManyModes", format!("modes {} must be in 1..={}", self.modes, self.node_count()));
        }
        if !(self.zero_tol.is_finite() && self.zero_tol > 0.0 && self.zero_tol < 1.0) {
            return fail("ZeroTolerance", format!("zero_tol {} must lie in (0, 1)", self.zero_tol));
        }
        if self.bank_size == 0 {
            return fail("BankSize", "bank_size must be at least 1".into());
        }
        if self.realizations < 2 {
            return fail("InsufficientSamples", format!("realizations {} must be at least 2", self.realizations));
        }
        if !(self.z_threshold.is_finite() && self.z_threshold > 0.0) {
            return fail("ZThreshold", format!("z_threshold {} must be positive", self.z_threshold));
        }
        if self.regularity_order > 0 && d.rule != QuadratureRule::Trapezoid {
            return fail(
                "NonUniformGrid",
                format!("regularity_order {} needs the trapezoid rule for the Fourier multiplier", self.regularity_order),
            );
        }
        if let KernelKind::GridFile { path } = &self.kernel {
            if !Path::new(path).is_file() {
                return fail("KernelFileMissing", format!("kernel file {path} does not exist"));
            }
        }
        Ok(())
    }

    /// Instantiates the configured kernel with this config's growth order.
    pub fn load_kernel(&self) -> Result<CovarianceKernel, CliError> {
        match &self.kernel {
            KernelKind::GridFile { path } => {
                let samples = read_matrix(Path::new(path))?;
                if samples.nrows() != self.node_count() {
                    return Err(CliError::Validation {
                        precondition: "ShapeMismatch".into(),
                        message: format!("kernel file has {} rows, grid has {} nodes", samples.nrows(), self.node_count()),
                    });
                }
                CovarianceKernel::from_samples(path.clone(), samples, self.growth_order).map_err(invalid("ShapeMismatch"))
            }
            k => {
                let base = CovarianceKernel::builtin(k.clone()).map_err(invalid("InvalidParameter"))?;
                let bound = base.bound();
                Ok(base.with_growth(bound, self.growth_order))
            }
        }
    }
}

/// Headerless numeric CSV into a dense matrix.
fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Io(e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, s)| {
                s.parse::<f64>().map_err(|_| CliError::Parse {
                    line: line + 1,
                    column: col + 1,
                    message: format!("{}: {s:?} is not a number", path.display()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Validation {
            precondition: "ShapeMismatch".into(),
            message: format!("kernel file {} must be a square matrix", path.display()),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse(r#"{"kernel": "gaussian", "dimension": 1}"#).unwrap();
        assert_eq!(c.domain.halfwidth, 20.0);
        assert_eq!(c.domain.points_per_axis, 256);
        assert_eq!(c.domain.rule, QuadratureRule::GaussLegendre);
        assert_eq!((c.modes, c.bank_size, c.realizations), (64, 8, 10_000));
        assert_eq!(c.zero_tol, 1e-10);
        assert_eq!(c.coefficient_law, CoefficientLaw::Gaussian);
        assert_eq!(c.z_threshold, 4.0);
        assert_eq!(c.kernel, KernelKind::Gaussian { length_scale: 1.0 });
        assert_eq!(c.growth_order, 0);
    }

    #[test]
    fn too_many_modes() {
        let e = parse(r#"{"kernel": "gaussian", "domain": {"points_per_axis": 16}, "modes": 17}"#).unwrap_err();
        assert!(matches!(e, CliError::Validation { ref precondition, .. } if precondition == "TooManyModes"));
    }

    #[test]
    fn unknown_kernel_lists_builtins() {
        let e = parse(r#"{"kernel": "matern"}"#).unwrap_err();
        let msg = e.to_string();
        for name in KernelKind::BUILTIN_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = parse("{\n  \"kernel\": \"gaussian\",\n  \"modes\": ,\n}").unwrap_err();
        let CliError::Parse { line, .. } = e else { panic!("{e:?}") };
        assert_eq!(line, 3);
        let e = parse(r#"{"kernel": "gaussian", "colour": 1}"#).unwrap_err();
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn growth_order_follows_kernel() {
        let c = parse(r#"{"kernel": {"name": "polynomial-growth-demo"}}"#).unwrap();
        assert_eq!(c.growth_order, 2);
        let c = parse(r#"{"kernel": "gaussian", "M": 3, "N": 0}"#).unwrap();
        assert_eq!(c.growth_order, 3);
    }

    #[test]
    fn regularity_needs_uniform_grid() {
        let e = parse(r#"{"kernel": "gaussian", "regularity_order": 2}"#).unwrap_err();
        assert!(matches!(e, CliError::Validation { ref precondition, .. } if precondition == "NonUniformGrid"));
        assert!(parse(r#"{"kernel": "gaussian", "regularity_order": 2, "domain": {"rule": "trapezoid"}}"#).is_ok());
    }

    #[test]
    fn overrides_win() {
        let mut c = parse(r#"{"kernel": "gaussian", "seed": 1}"#).unwrap();
        c.apply(&Overrides { seed: Some(9), modes: Some(10), ..Default::default() }).unwrap();
        assert_eq!((c.seed, c.modes), (9, 10));
        assert!(c.apply(&Overrides { realizations: Some(1), ..Default::default() }).is_err());
    }

    #[test]
    fn missing_kernel_file() {
        let e = parse(r#"{"kernel": {"name": "grid-file", "path": "nope.csv"}}"#).unwrap_err();
        assert!(matches!(e, CliError::Validation { ref precondition, .. } if precondition == "KernelFileMissing"));
    }
}
