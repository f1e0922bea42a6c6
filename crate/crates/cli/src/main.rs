//! `hbrbf`: generate node sets, solve RBF interpolation problems in the
//! hierarchical basis, and run the conditioning, decay and kriging
//! experiments. Reports are CSV; exit code 0 is success, 1 a numerical or I/O
//! failure, 2 a usage error.

mod commands;
mod config;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Defaults, Flags, Merged};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] hbrbf::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Run(hbrbf::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hbrbf", version, about = "Hierarchical-basis RBF interpolation and kriging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Write a test-case node set as CSV.
    Generate,
    /// Solve the interpolation problem and append a report row.
    Solve,
    /// Condition numbers of the scaled saddle system and of K_W.
    Condition,
    /// Fit simulated observations and write prediction and MSE grids.
    Kriging,
    /// Entry magnitudes of one level of K_W binned by box distance.
    Decay,
}

fn defaults(cmd: Command) -> Defaults {
    match cmd {
        Command::Kriging => Defaults {
            case: "bimodal",
            n: 1000,
            kernel: "imq",
            scale: None,
            tol: 1e-8,
            ..Defaults::default()
        },
        Command::Condition => Defaults {
            m: 3,
            ..Defaults::default()
        },
        _ => Defaults::default(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = Merged::new(cli.flags)?.resolve(&defaults(cli.command))?;
    match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Condition => commands::condition(&cfg),
        Command::Kriging => commands::kriging(&cfg),
        Command::Decay => commands::decay(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
