//! Batch front-end for the `gesp-core` pipelines.
//!
//! Every subcommand reads a JSON [`RunConfig`], produces its artifacts in
//! memory and then writes them to the output directory. `verify` rebuilds a
//! report from the config embedded in it and compares bytes.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use commands::{execute, Artifact, Outcome};
pub use config::{parse_config, parse_config_str, Overrides, RunConfig};

/// Exit code for configuration and precondition failures.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for numerical failures and failed pass flags.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("validation error ({precondition}): {message}")]
    Validation { precondition: String, message: String },
    #[error("{0}")]
    Core(#[from] gesp_core::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Core(e) => match e.kind() {
                "DimensionUnsupported" | "DegenerateGrid" | "ShapeMismatch" | "TooManyModes"
                | "NonUniformGrid" | "InvalidParameter" | "Io" => EXIT_VALIDATION,
                _ => EXIT_NUMERIC,
            },
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let code = self.exit_code();
        match self {
            CliError::Parse { line, column, message } => json!({
                "error": "ParseError", "line": line, "column": column, "message": message, "exit_code": code,
            }),
            CliError::Validation { precondition, message } => json!({
                "error": "ValidationError", "precondition": precondition, "message": message, "exit_code": code,
            }),
            CliError::Core(e) => json!({
                "error": e.kind(), "module": e.module(), "message": e.to_string(), "exit_code": code,
            }),
            CliError::Io(message) => json!({ "error": "IoError", "message": message, "exit_code": code }),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "gesp", version, about = "Color and whiten discretized generalized stochastic processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Karhunen-Loeve decomposition: eigs.csv, modes.csv, kl_report.json.
    Kl(RunArgs),
    /// Coloring factorization: operator.json, wn_model.json, cov_check.json.
    Color(RunArgs),
    /// Whitening factorization: whiten_report.json.
    Whiten(RunArgs),
    /// Coloring then whitening with all checks: roundtrip_report.json.
    Roundtrip(RunArgs),
    /// Hermite test-function bank: bank.csv.
    Bank(RunArgs),
    /// Regenerate a report from its embedded config and compare bytes.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub realizations: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// A report written by kl, color, whiten or roundtrip.
    #[arg(long)]
    pub report: PathBuf,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides { output: self.out.clone(), seed: self.seed, modes: self.modes, realizations: self.realizations }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            if summary["pass"].as_bool() == Some(true) {
                0
            } else {
                EXIT_NUMERIC
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let (name, args) = match &cli.command {
        Command::Kl(a) => ("kl", a),
        Command::Color(a) => ("color", a),
        Command::Whiten(a) => ("whiten", a),
        Command::Roundtrip(a) => ("roundtrip", a),
        Command::Bank(a) => ("bank", a),
        Command::Verify(v) => return commands::verify(&v.report),
    };
    let mut cfg = parse_config(&args.config)?;
    cfg.apply(&args.overrides())?;
    let outcome = execute(name, &cfg)?;
    std::fs::create_dir_all(&cfg.output)?;
    let mut written = Vec::new();
    for a in &outcome.artifacts {
        let path = cfg.output.join(&a.name);
        std::fs::write(&path, &a.bytes)?;
        written.push(path.to_string_lossy().into_owned());
    }
    Ok(json!({ "command": name, "pass": outcome.pass, "artifacts": written }))
}
