#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod io;
mod report;

/// Exit status 1: a domain or verification failure. Exit status 2: a usage,
/// parse or file error.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "idewave",
    version,
    about = "Spreading speeds and traveling waves of a partially sedentary integrodifference model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check model parameters and fecundity; exit 1 if any check fails.
    Validate {
        config: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for config lists.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compute the spreading speed c*.
    Speed {
        config: PathBuf,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the (mu, c(mu)) scan as CSV.
        #[arg(long)]
        scan_out: Option<PathBuf>,
        /// Worker threads for config lists.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Construct and verify a traveling wave.
    Wave {
        config: PathBuf,
        /// Wave speed: a number, `cstar`, or a multiple such as `1.5cstar`.
        #[arg(long = "c")]
        speed: Option<String>,
        /// Write the profile as CSV (x,W).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Iterate the model from an initial density and track the front.
    Simulate {
        config: PathBuf,
        /// Number of generations.
        #[arg(long)]
        n_gen: Option<usize>,
        /// Write the trajectory as CSV (x,gen_0,...).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the front trace JSON here instead of stdout.
        #[arg(long)]
        front_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config, out, jobs } => {
            commands::validate(&config, out.as_deref(), jobs)
        }
        Command::Speed {
            config,
            out,
            scan_out,
            jobs,
        } => commands::speed(&config, out.as_deref(), scan_out.as_deref(), jobs),
        Command::Wave {
            config,
            speed,
            out,
            report,
        } => commands::wave(&config, speed.as_deref(), out.as_deref(), report.as_deref()),
        Command::Simulate {
            config,
            n_gen,
            out,
            front_out,
        } => commands::simulate(&config, n_gen, out.as_deref(), front_out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
