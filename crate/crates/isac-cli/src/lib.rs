//! Command-line front end: parse a scenario configuration, execute runs and
//! quantization sweeps, serialize traces for external plotting, and validate
//! configurations.
//!
//! Exit codes: 0 on success, 2 on configuration errors (with key and
//! location diagnostics), 3 on numerical aborts.

use std::fmt;

pub mod config;
pub mod output;

pub use config::{resolve, Settings};

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation, unreadable config, invalid key or value. Exit 2.
    Config(String),
    /// The solver produced a non-finite value. Exit 3.
    Numerical(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical abort: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<isac_core::runner::RunError> for CliError {
    fn from(err: isac_core::runner::RunError) -> Self {
        match err {
            isac_core::runner::RunError::Config(e) => CliError::Config(e.to_string()),
            e @ isac_core::runner::RunError::NonFinite { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

/// Output format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// A parsed command line.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config_path: Option<String>,
    pub overrides: Vec<(String, String)>,
    pub output_path: Option<String>,
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Validate,
}

pub const USAGE: &str = "\
isac - joint reflecting-surface and precoder design runs

USAGE:
  isac run      --config FILE [--override KEY=VALUE]... [--output FILE] [--format csv|json]
  isac sweep    --config FILE [--override KEY=VALUE]... [--output FILE] [--format csv|json]
  isac validate [--config FILE] [--override KEY=VALUE]...

COMMANDS:
  run       execute one design run and emit the per-iteration trace
  sweep     run every configured quantization level over the seed list and
            emit the median/quartile summary of the final weighted SNR
  validate  resolve and check a configuration, echoing the resolved values

All keys are optional in the file; defaults are documented via 'validate'.
Overrides use dotted keys, e.g. --override quantization.m=8
";

/// Parse argv (without the program name).
pub fn parse_invocation(args: &[String]) -> Result<Invocation, CliError> {
    let mut it = args.iter();
    let command = match it.next().map(String::as_str) {
        Some("run") => Command::Run,
        Some("sweep") => Command::Sweep,
        Some("validate") => Command::Validate,
        Some(other) => {
            return Err(CliError::config(format!("unknown command {other:?}\n{USAGE}")));
        }
        None => return Err(CliError::config(format!("missing command\n{USAGE}"))),
    };
    let mut invocation = Invocation {
        command,
        config_path: None,
        overrides: Vec::new(),
        output_path: None,
        format: Format::Csv,
    };
    while let Some(flag) = it.next() {
        let mut value_for = |name: &str| -> Result<String, CliError> {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::config(format!("flag {name} needs a value")))
        };
        match flag.as_str() {
            "--config" => invocation.config_path = Some(value_for("--config")?),
            "--override" => {
                let raw = value_for("--override")?;
                let Some((key, value)) = raw.split_once('=') else {
                    return Err(CliError::config(format!(
                        "--override expects KEY=VALUE, got {raw:?}"
                    )));
                };
                invocation
                    .overrides
                    .push((key.trim().to_string(), value.trim().to_string()));
            }
            "--output" => invocation.output_path = Some(value_for("--output")?),
            "--format" => {
                invocation.format = match value_for("--format")?.to_ascii_lowercase().as_str() {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    other => {
                        return Err(CliError::config(format!(
                            "--format expects csv or json, got {other:?}"
                        )));
                    }
                };
            }
            other => return Err(CliError::config(format!("unknown flag {other:?}\n{USAGE}"))),
        }
    }
    Ok(invocation)
}

/// Execute a parsed invocation, returning the text that goes to the output
/// target (file or stdout).
pub fn execute(invocation: &Invocation) -> Result<String, CliError> {
    let settings = resolve(invocation.config_path.as_deref(), &invocation.overrides)?;
    settings
        .scenario
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    match invocation.command {
        Command::Validate => {
            let mut out = String::from("configuration ok\n");
            for (key, value) in config::echo_pairs(&settings) {
                out.push_str(&format!("{key} = {value}\n"));
            }
            Ok(out)
        }
        Command::Run => {
            let result = isac_core::runner::run(&settings.scenario)?;
            Ok(match invocation.format {
                Format::Csv => output::trace_csv(&result, &settings),
                Format::Json => output::trace_json(&result, &settings),
            })
        }
        Command::Sweep => {
            let summary = isac_core::runner::sweep_quantization(
                &settings.scenario,
                &settings.sweep.levels,
                &settings.seed_list(),
            )?;
            Ok(match invocation.format {
                Format::Csv => output::sweep_csv(&summary, &settings),
                Format::Json => output::sweep_json(&summary, &settings),
            })
        }
    }
}

/// Full front end: parse, execute, write, map errors to exit codes.
pub fn parse_and_run(args: &[String]) -> i32 {
    let outcome = parse_invocation(args).and_then(|invocation| {
        let body = execute(&invocation)?;
        match &invocation.output_path {
            Some(path) => std::fs::write(path, &body)
                .map_err(|e| CliError::config(format!("cannot write output file {path}: {e}")))?,
            None => print!("{body}"),
        }
        Ok(())
    });
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{err}");
            err.exit_code()
        }
    }
}
