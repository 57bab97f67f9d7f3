//! Command-line front end: `dampdet --config run.json --command spectrum|det|verify`.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 usage or config error, 3 numerical failure.
//! Errors are reported on stderr as a one-line JSON object.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::json;
use thiserror::Error;

pub use config::{Format, OutputConfig, RunConfig};
pub use output::canonical_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Spectrum,
    Det,
    Verify,
}

#[derive(Debug, Parser)]
#[command(name = "dampdet", version, about = "Spectra and determinants of the damped wave operator")]
pub struct Args {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides out.dir)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Command::Spectrum)]
    pub command: Command,
    /// Suppress the summary on stdout
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    ConfigParse(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Usage(_) | CliError::ConfigParse(_) | CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Numerical(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::ConfigParse(_) => "config parse",
            CliError::Config(_) => "config validation",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical failure",
            CliError::Invariant(_) => "invariant failure",
        }
    }

    pub fn to_json(&self) -> String {
        json!({"error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code()}).to_string()
    }
}

/// Runs one command and returns the process exit code.
pub fn run(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let config = RunConfig::parse(&text)?;
    let dir = args.out.clone().or_else(|| config.out.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let summary = match args.command {
        Command::Spectrum => commands::spectrum(&config, &dir)?,
        Command::Det => commands::det(&config, &dir)?,
        Command::Verify => commands::verify(&config, &dir)?,
    };
    if !args.quiet {
        println!("{summary}");
    }
    Ok(())
}

/// Parses arguments, runs, and reports errors; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(CliError::Invariant("x".into()).exit_code(), 1);
        assert_eq!(CliError::ConfigParse("x".into()).exit_code(), 2);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 3);
        assert_eq!(CliError::Io("x".into()).exit_code(), 3);
    }

    #[test]
    fn error_json_shape() {
        let v: serde_json::Value = serde_json::from_str(&CliError::ConfigParse("bad \"T\"".into()).to_json()).unwrap();
        assert_eq!(v, json!({"error": "config parse", "message": "bad \"T\"", "exit_code": 2}));
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(main_with_args(["dampdet", "--config", "x.json", "--frobnicate"]), 2);
        assert_eq!(main_with_args(["dampdet", "--config", "x.json", "--command", "plot"]), 2);
        assert_eq!(main_with_args(["dampdet", "--version"]), 0);
    }
}
