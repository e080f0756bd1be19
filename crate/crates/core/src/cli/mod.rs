//! The `ufest` batch driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 budget cap, 4 numerical
//! failure (including a failed verify-circuit check). Errors are reported
//! as a JSON object on stderr.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use config::{Command, ExperimentConfig, Format, Options};
use report::{Experiment, Report, SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Budget(_) => 3,
            Self::Numerical(_) | Self::Verification(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Budget(_) => "budget",
            Self::Numerical(_) => "numerical",
            Self::Verification(_) => "verification",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "schema": SCHEMA,
            "error": { "kind": self.kind(), "message": self.to_string() },
            "exit-code": self.exit_code(),
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::ShotBudget { .. } | Error::DimensionCap { .. } => Self::Budget(msg),
            Error::InvalidArgument(_) | Error::Unsupported(_) | Error::Shape(_) | Error::EmptyIsotypic { .. } => {
                Self::Config(msg)
            }
            Error::Evaluation { source, .. } => match Self::from(*source) {
                Self::Config(_) => Self::Config(msg),
                Self::Budget(_) => Self::Budget(msg),
                _ => Self::Numerical(msg),
            },
            _ => Self::Numerical(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ufest", version, about = "Estimate functions of an unknown unitary from controlled queries")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// PAC estimate of f(g) at Haar-random g.
    Estimate(Options),
    /// Averaged bias of each degree truncation of f.
    BiasScan(Options),
    /// Rep_ε(f) and the PAC query count.
    Rep(Options),
    /// Circuit-vs-formula, query-count, and unbiasedness checks.
    VerifyCircuit(Options),
    /// Monte-Carlo ∫|f(g)|² dg (default family: monomial).
    Moments(Options),
    /// Run the experiment(s) in a JSON config file.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// A config object, or an array of them run in order.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

/// Where and how a report is written.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sink {
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Runs each experiment in order and collects the report. A failed
/// verification check yields the report alongside the error.
pub fn execute(configs: &[ExperimentConfig]) -> Result<(Report, Option<CliError>), CliError> {
    let settings = configs.iter().map(|c| c.resolve()).collect::<Result<Vec<_>, _>>()?;
    let mut experiments = Vec::with_capacity(configs.len());
    let mut failure = None;
    for (cfg, s) in configs.iter().zip(&settings) {
        let rows = commands::run(s)?;
        if cfg.command == Command::VerifyCircuit && failure.is_none() {
            if let Some(bad) = rows.iter().find(|r| r.passed == Some(false)) {
                failure = Some(CliError::Verification(format!("check failed: {}", bad.family)));
            }
        }
        experiments.push(Experiment {
            command: cfg.command,
            options: cfg.options.echo(),
            rows,
        });
    }
    Ok((Report::new(experiments), failure))
}

fn parse(args: Vec<OsString>) -> Result<Option<(Vec<ExperimentConfig>, Sink)>, CliError> {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(None);
        }
        Err(e) => return Err(CliError::Config(e.render().to_string().trim_end().to_string())),
    };
    let single = |command: Command, options: Options| {
        let sink = Sink {
            output: options.output.clone(),
            format: options.format.unwrap_or_default(),
        };
        (vec![ExperimentConfig { command, options }], sink)
    };
    Ok(Some(match cli.command {
        Sub::Estimate(o) => single(Command::Estimate, o),
        Sub::BiasScan(o) => single(Command::BiasScan, o),
        Sub::Rep(o) => single(Command::Rep, o),
        Sub::VerifyCircuit(o) => single(Command::VerifyCircuit, o),
        Sub::Moments(o) => single(Command::Moments, o),
        Sub::Run(r) => {
            let configs = load_config(&r.config)?;
            let sink = run_sink(&configs, r.output, r.format)?;
            (configs, sink)
        }
    }))
}

/// Reads a config file holding one experiment object or an array of them.
pub fn load_config(path: &std::path::Path) -> Result<Vec<ExperimentConfig>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    let entries = match value {
        serde_json::Value::Array(items) if items.is_empty() => {
            return Err(CliError::Config("config array is empty".into()));
        }
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    entries.into_iter().map(ExperimentConfig::from_json_value).collect()
}

/// Command-line sink flags win; otherwise every entry naming an output or
/// format must agree.
fn run_sink(configs: &[ExperimentConfig], output: Option<PathBuf>, format: Option<Format>) -> Result<Sink, CliError> {
    fn agree<T: Clone + PartialEq>(vals: impl Iterator<Item = Option<T>>, key: &str) -> Result<Option<T>, CliError> {
        let mut seen: Option<T> = None;
        for v in vals.flatten() {
            match &seen {
                Some(s) if *s != v => {
                    return Err(CliError::Config(format!("config entries disagree on \"{key}\"")));
                }
                _ => seen = Some(v),
            }
        }
        Ok(seen)
    }
    let output = match output {
        Some(o) => Some(o),
        None => agree(configs.iter().map(|c| c.options.output.clone()), "output")?,
    };
    let format = match format {
        Some(f) => f,
        None => agree(configs.iter().map(|c| c.options.format), "format")?.unwrap_or_default(),
    };
    Ok(Sink { output, format })
}

fn write_report(report: &Report, sink: &Sink) -> Result<(), CliError> {
    let body = match sink.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &sink.output {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Config(format!("cannot write report: {e}"))),
    }
}

/// Parses `args` (including the program name), runs, writes the report,
/// and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let result = parse(args.into_iter().map(Into::into).collect()).and_then(|parsed| {
        let Some((configs, sink)) = parsed else {
            return Ok(());
        };
        let (report, failure) = execute(&configs)?;
        write_report(&report, &sink)?;
        failure.map_or(Ok(()), Err)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
