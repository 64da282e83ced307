//! dmm — run, inspect, and demo dataflow matrix machine networks.
//!
//! ## Commands
//! - `run`: step a network file, streaming line-delimited trace records
//! - `inspect`: report the weight structure of a network file
//! - `demo`: run a built-in scenario and verify its invariants
//!
//! Exit codes: 0 success, 2 parse/validation error, 3 runtime engine error,
//! 4 demo verdict failure.

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd_demo;
mod cmd_inspect;
mod cmd_run;

#[derive(Parser)]
#[command(name = "dmm", version, about = "Dataflow matrix machine runtime")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run a network file and stream trace records
    Run(cmd_run::RunArgs),
    /// Report the matrix structure of a network file
    Inspect(cmd_inspect::InspectArgs),
    /// Run a built-in scenario and print a pass/fail verdict
    Demo(cmd_demo::DemoArgs),
}

#[derive(Debug)]
pub(crate) enum CliError {
    Validation(String),
    Runtime(String),
    Verdict(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Verdict(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "error[validation]: {msg}"),
            CliError::Runtime(msg) => write!(f, "error[runtime]: {msg}"),
            CliError::Verdict(msg) => write!(f, "error[verdict]: {msg}"),
        }
    }
}

/// Seed precedence: explicit flag, then the DMM_SEED environment variable,
/// then the network file, then 0.
pub(crate) fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Ok(text) = std::env::var("DMM_SEED") {
        return text
            .parse()
            .map_err(|_| CliError::Validation(format!("DMM_SEED is not an integer: `{text}`")));
    }
    Ok(file.unwrap_or(0))
}

fn main() -> ExitCode {
    // exit quietly when a downstream pipe closes, like other stream tools
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Commands::Run(args) => cmd_run::run(args),
        Commands::Inspect(args) => cmd_inspect::run(args),
        Commands::Demo(args) => cmd_demo::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
