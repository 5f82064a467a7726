//! Command-line front end: reads a JSON scenario, runs one model and writes
//! plot-ready CSV or JSON tables.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use output::Format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{file}:{line}:{column}: field `{field}`: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("table {path}: {message}")]
    Table { path: PathBuf, message: String },

    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] isrs_core::Error),

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        source: Box<CliError>,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Io { .. } | CliError::Table { .. } => 2,
            CliError::Output { .. } => 2,
            CliError::Core(e) => {
                if e.is_config() {
                    2
                } else {
                    3
                }
            }
            CliError::Scenario { source, .. } => source.exit_code(),
        }
    }

    pub(crate) fn in_scenario(self, scenario: &str) -> Self {
        match self {
            CliError::Scenario { .. } => self,
            other => CliError::Scenario {
                scenario: scenario.to_string(),
                source: Box::new(other),
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "isrs",
    version,
    about = "ISRS power profiles, pre-emphasis and OSNR targeting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for result tables (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub output: PathBuf,

    /// RK4 steps per span, overriding the config.
    #[arg(long, global = true)]
    pub steps: Option<usize>,

    /// Closed-form approximation order n, overriding the config.
    #[arg(long, global = true)]
    pub order: Option<u32>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Numerical (RK4) propagation over the configured link.
    Solve,
    /// Closed-form single-span profiles.
    ClosedForm,
    /// Closed-form multi-span profiles.
    Multispan,
    /// Order sweep comparing the closed form against RK4.
    Sweep,
    /// Launch pre-emphasis for a target output spectrum.
    Preemph,
    /// Launch producing a target OSNR shape.
    OsnrTarget,
    /// Parse and check a config without running it.
    ValidateConfig,
}

impl Cli {
    /// Parses a full command line (program name first).
    pub fn from_args<I, T>(args: I) -> Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        Self::try_parse_from(args)
    }
}

/// Runs a command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::from_args(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; returns the summary lines for stdout.
pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let config_path = cli.config.as_deref().ok_or_else(|| {
        CliError::Core(isrs_core::Error::Config("--config PATH is required".into()))
    })?;
    let config = config::load_config(config_path)?;
    let name = config.scenario.clone();
    let base = config_path.parent().unwrap_or(Path::new("."));
    let overrides = config::Overrides {
        steps: cli.steps,
        order: cli.order,
    };
    let scenario =
        config::Scenario::resolve(config, base, overrides).map_err(|e| e.in_scenario(&name))?;
    commands::dispatch(cli.command, &scenario, &cli.output, cli.format)
        .map_err(|e| e.in_scenario(&name))
}
