//! Batch driver for ground-state, Lagrangian and Parisi experiments.
//!
//! Tables go out as CSV (one [`record::ResultRecord`] per row), parameter
//! documents as JSON. Exit codes: 0 ok, 1 config error, 2 numeric failure,
//! 3 verification failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod record;

use clap::{Parser, Subcommand};
use config::{ExperimentConfig, Overrides};
use error::{CliError, CliResult};
use lpgroth::parisi::ParisiDocument;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "lpgroth", version, about = "Ground states, Lagrangians and Parisi functionals of vector-spin Grothendieck problems")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sphere maxima over the N, p, kappa grids with replica means.
    GroundState,
    /// Lagrangian values over the t grid with the recovered ground-state energy.
    Lagrangian,
    /// Evaluate or minimize the Parisi functional.
    Parisi {
        #[command(subcommand)]
        action: ParisiAction,
    },
    /// Large-N limit constants for each p.
    Asymptotics,
    /// Run property suites: linalg, model, terminals, pde, ac, asymptotics or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ParisiAction {
    /// Evaluate at the parameters stored in a JSON document.
    Eval { document: PathBuf },
    /// Minimize over r = 1..=r-max and write the best parameters as JSON.
    Min {
        /// Document path; defaults to the CSV path with a .json extension,
        /// or stdout after the table.
        #[arg(long)]
        doc: Option<PathBuf>,
    },
}

fn emit_csv(cfg: &ExperimentConfig, records: &[record::ResultRecord]) -> CliResult<()> {
    match &cfg.out {
        Some(path) => record::write_csv(records, std::fs::File::create(path)?),
        None => record::write_csv(records, std::io::stdout().lock()),
    }
}

fn emit_json<T: serde::Serialize>(value: &T, path: Option<PathBuf>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(format!("json: {e}")))?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = ExperimentConfig::resolve(&cli.flags)?;
    let json_beside_csv = || cfg.out.as_ref().map(|p| p.with_extension("json"));
    match cli.command {
        Command::GroundState => {
            let out = commands::ground_state(&cfg)?;
            emit_csv(&cfg, &out.records)?;
            if let Some(path) = json_beside_csv() {
                emit_json(&out.records, Some(path))?;
            }
        }
        Command::Lagrangian => emit_csv(&cfg, &commands::lagrangian(&cfg)?.records)?,
        Command::Asymptotics => emit_csv(&cfg, &commands::asymptotics(&cfg)?.records)?,
        Command::Parisi { action: ParisiAction::Eval { document } } => {
            let text = std::fs::read_to_string(&document).map_err(|e| CliError::config("document", format!("{}: {e}", document.display())))?;
            let doc: ParisiDocument = serde_json::from_str(&text).map_err(|e| CliError::config("document", e))?;
            emit_csv(&cfg, &commands::parisi_eval(&cfg, &doc)?.records)?;
        }
        Command::Parisi { action: ParisiAction::Min { doc } } => {
            let out = commands::parisi_min(&cfg)?;
            emit_csv(&cfg, &out.records)?;
            emit_json(&out.document, doc.or_else(json_beside_csv))?;
        }
        Command::Verify { suite } => {
            let (checks, out) = commands::verify(&cfg, &suite)?;
            {
                let mut so = std::io::stdout().lock();
                for c in &checks {
                    writeln!(so, "{c}")?;
                }
            }
            if cfg.out.is_some() {
                emit_csv(&cfg, &out.records)?;
            }
            let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{}/{}", c.suite, c.name)).collect();
            if !failed.is_empty() {
                return Err(CliError::Verification(failed.join(", ")));
            }
        }
    }
    Ok(())
}
