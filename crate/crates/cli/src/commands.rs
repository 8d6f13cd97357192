//! Subcommand bodies. Each returns its artifacts as bytes so that a run can
//! be written to disk or compared against an earlier one.

use std::path::Path;
use std::sync::Arc;

use gesp_core::factorization::MATRIX_TOL;
use gesp_core::{
    assemble_covariance_matrix, build_bank, build_grid, color_factorize, compare, empirical_covariance,
    nystrom_eigendecompose, roundtrip_check, whiten_factorize, CovarianceReport, FactorizationOptions,
    FactoredOperator, Grid, KlReport, RoundtripParams, RoundtripReport, WeightedMeasure,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{MeasureChoice, RunConfig};
use crate::CliError;

/// Relative trace-identity tolerance for the kl report.
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub pass: bool,
}

#[derive(Serialize, Deserialize)]
struct KlArtifact {
    command: String,
    config: RunConfig,
    report: KlReport,
    descending: bool,
    trace_tolerance: f64,
    trace_pass: bool,
    pass: bool,
}

#[derive(Serialize, Deserialize)]
struct ColorArtifact {
    command: String,
    config: RunConfig,
    coloring_error: f64,
    tolerance: f64,
    matrix_pass: bool,
    sample_identity_error: f64,
    monte_carlo: CovarianceReport,
    pass: bool,
}

#[derive(Serialize, Deserialize)]
struct WhitenArtifact {
    command: String,
    config: RunConfig,
    rank: usize,
    gamma: Vec<usize>,
    gram_error: f64,
    target_gram_deviation: f64,
    tolerance: f64,
    operator: FactoredOperator,
    monte_carlo: CovarianceReport,
    pass: bool,
}

#[derive(Serialize, Deserialize)]
struct RoundtripArtifact {
    command: String,
    config: RunConfig,
    report: RoundtripReport,
    pass: bool,
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn artifact(name: &str, bytes: Vec<u8>) -> Artifact {
    Artifact { name: name.into(), bytes }
}

fn grid_of(cfg: &RunConfig) -> Result<Arc<Grid>, CliError> {
    let d = &cfg.domain;
    Ok(Arc::new(build_grid(cfg.dimension, d.halfwidth, d.points_per_axis, d.rule)?))
}

fn options(cfg: &RunConfig) -> FactorizationOptions {
    FactorizationOptions {
        zero_tol: cfg.zero_tol,
        law: cfg.coefficient_law,
        lebesgue: cfg.measure == MeasureChoice::Lebesgue,
    }
}

/// Report file produced by each verifiable command.
pub fn report_name(command: &str) -> Option<&'static str> {
    match command {
        "kl" => Some("kl_report.json"),
        "color" => Some("cov_check.json"),
        "whiten" => Some("whiten_report.json"),
        "roundtrip" => Some("roundtrip_report.json"),
        _ => None,
    }
}

pub fn execute(command: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        "kl" => kl(cfg),
        "color" => color(cfg),
        "whiten" => whiten(cfg),
        "roundtrip" => roundtrip(cfg),
        "bank" => bank(cfg),
        other => Err(CliError::Validation { precondition: "Subcommand".into(), message: format!("unknown subcommand {other}") }),
    }
}

fn kl(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let kernel = cfg.load_kernel()?;
    let grid = grid_of(cfg)?;
    let measure = match cfg.measure {
        MeasureChoice::Weighted => WeightedMeasure::new(&grid, cfg.growth_order),
        MeasureChoice::Lebesgue => WeightedMeasure::lebesgue(&grid),
    };
    let k = assemble_covariance_matrix(&kernel, &grid, &measure)?;
    let d = nystrom_eigendecompose(&k, &grid, &measure, cfg.modes, cfg.zero_tol)?;

    let mut eigs = Vec::new();
    d.write_eigenvalues_csv(&mut eigs)?;
    let mut modes = Vec::new();
    d.write_modes_csv(&mut modes)?;

    let report = d.report();
    let descending = d.eigenvalues().windows(2).all(|w| w[0] >= w[1]);
    let trace_pass = report.trace_relative_error <= TRACE_TOL;
    let pass = descending && trace_pass;
    let out = KlArtifact {
        command: "kl".into(),
        config: cfg.clone(),
        report,
        descending,
        trace_tolerance: TRACE_TOL,
        trace_pass,
        pass,
    };
    Ok(Outcome {
        artifacts: vec![artifact("eigs.csv", eigs), artifact("modes.csv", modes), artifact("kl_report.json", json_bytes(&out)?)],
        pass,
    })
}

fn color(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let kernel = cfg.load_kernel()?;
    let grid = grid_of(cfg)?;
    let c = color_factorize(&kernel, cfg.regularity_order, cfg.growth_order, grid.clone(), cfg.modes, cfg.seed, &options(cfg))?;
    let bank = build_bank(cfg.bank_size, &grid)?;
    let coloring_error = c.coloring_error(&bank)?;
    let lw = c.white_noise.realize_through(&c.operator, &bank, cfg.realizations)?;
    let analytic = c.expansion.covariance_matrix(&bank)?;
    let monte_carlo = compare(&empirical_covariance(&lw)?, &analytic, cfg.z_threshold, cfg.seed)?;
    let sample_identity_error = c.sample_identity_error(&bank, cfg.seed, cfg.realizations)?;
    let matrix_pass = coloring_error <= MATRIX_TOL;
    let pass = matrix_pass && monte_carlo.pass;
    let check = ColorArtifact {
        command: "color".into(),
        config: cfg.clone(),
        coloring_error,
        tolerance: MATRIX_TOL,
        matrix_pass,
        sample_identity_error,
        monte_carlo,
        pass,
    };
    Ok(Outcome {
        artifacts: vec![
            artifact("operator.json", json_bytes(&c.operator)?),
            artifact("wn_model.json", json_bytes(&c.white_noise.metadata())?),
            artifact("cov_check.json", json_bytes(&check)?),
        ],
        pass,
    })
}

fn whiten(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let kernel = cfg.load_kernel()?;
    let grid = grid_of(cfg)?;
    let c = color_factorize(&kernel, cfg.regularity_order, cfg.growth_order, grid.clone(), cfg.modes, cfg.seed, &options(cfg))?;
    let w = whiten_factorize(&c, cfg.bank_size, cfg.zero_tol)?;
    let gram_error = w.gram_error(cfg.bank_size)?;
    let bank = build_bank(cfg.bank_size, &grid)?;
    let batch = w.expansion.realize(cfg.seed, &bank, cfg.realizations)?;
    let k = cfg.bank_size;
    let monte_carlo = compare(&empirical_covariance(&batch.evaluations)?, &DMatrix::identity(k, k), cfg.z_threshold, cfg.seed)?;
    let pass = gram_error <= MATRIX_TOL && monte_carlo.pass;
    let report = WhitenArtifact {
        command: "whiten".into(),
        config: cfg.clone(),
        rank: w.rkhs.len(),
        gamma: w.rkhs.gamma().to_vec(),
        gram_error,
        target_gram_deviation: w.target_gram_deviation(),
        tolerance: MATRIX_TOL,
        operator: w.operator.clone(),
        monte_carlo,
        pass,
    };
    Ok(Outcome { artifacts: vec![artifact("whiten_report.json", json_bytes(&report)?)], pass })
}

fn roundtrip(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let kernel = cfg.load_kernel()?;
    let grid = grid_of(cfg)?;
    let params = RoundtripParams {
        regularity_order: cfg.regularity_order,
        growth_order: cfg.growth_order,
        n_modes: cfg.modes,
        k_target: cfg.bank_size,
        seed: cfg.seed,
        realizations: cfg.realizations,
        z_threshold: cfg.z_threshold,
    };
    let report = roundtrip_check(&kernel, grid, &params, &options(cfg))?;
    let pass = report.pass;
    let out = RoundtripArtifact { command: "roundtrip".into(), config: cfg.clone(), report, pass };
    Ok(Outcome { artifacts: vec![artifact("roundtrip_report.json", json_bytes(&out)?)], pass })
}

fn bank(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = grid_of(cfg)?;
    let bank = build_bank(cfg.bank_size, &grid)?;
    let mut bytes = Vec::new();
    bank.write_csv(&mut bytes)?;
    Ok(Outcome { artifacts: vec![artifact("bank.csv", bytes)], pass: true })
}

/// Re-executes the command recorded in `report` and compares its bytes.
pub fn verify(report: &Path) -> Result<Value, CliError> {
    let original = std::fs::read(report).map_err(|e| CliError::Io(format!("{}: {e}", report.display())))?;
    let value: Value = serde_json::from_slice(&original)
        .map_err(|e| CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    let command = value["command"].as_str().unwrap_or_default().to_string();
    let name = report_name(&command).ok_or_else(|| CliError::Validation {
        precondition: "VerifiableReport".into(),
        message: format!("{} does not name a verifiable command", report.display()),
    })?;
    let cfg: RunConfig = serde_json::from_value(value["config"].clone())
        .map_err(|e| CliError::Validation { precondition: "EmbeddedConfig".into(), message: e.to_string() })?;
    let outcome = execute(&command, &cfg)?;
    let regenerated = outcome
        .artifacts
        .iter()
        .find(|a| a.name == name)
        .map(|a| a.bytes.as_slice())
        .unwrap_or_default();
    let bit_identical = regenerated == original.as_slice();
    let recorded_pass = value["pass"].as_bool() == Some(true);
    Ok(serde_json::json!({
        "command": "verify",
        "report": report.to_string_lossy(),
        "replayed": command,
        "seed": cfg.seed,
        "bit_identical": bit_identical,
        "recorded_pass": recorded_pass,
        "pass": bit_identical && recorded_pass && outcome.pass,
    }))
}
