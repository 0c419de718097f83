mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CommonArgs;

/// Capability-aware swarm assignment simulator.
///
/// Exit codes: 0 success, 1 configuration error, 2 runtime failure,
/// 3 oracle failure in `verify`.
#[derive(Debug, Parser)]
#[command(name = "dotswarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one engagement under the requested policies.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Paired Monte Carlo over several swarm sizes.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated swarm sizes
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Runs per size
        #[arg(long)]
        runs: Option<usize>,
        /// Also write per-run wall-clock timings (not reproducible)
        #[arg(long)]
        timings: bool,
    },
    /// Run the built-in oracle suite.
    Verify {
        #[arg(long)]
        json: bool,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, hide = true, value_parser = ["care-residual"])]
        inject_fault: Option<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    OracleFailed(Vec<String>),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::OracleFailed(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
            CliError::OracleFailed(names) => write!(f, "oracle failure: {}", names.join(", ")),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common } => commands::run(&common),
        Command::Sweep {
            common,
            sizes,
            runs,
            timings,
        } => commands::sweep(&common, sizes, runs, timings),
        Command::Verify {
            json,
            jobs,
            inject_fault,
        } => commands::verify(json, jobs, inject_fault.is_some()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dotswarm: {e}");
            ExitCode::from(e.code())
        }
    }
}
