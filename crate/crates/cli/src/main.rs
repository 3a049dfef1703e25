//! `photodet`: moving-detector single-photon readout from the command line.
//!
//! Subcommands `povm`, `map`, `clicks` and `selfcheck`. Parameters come from
//! flags or from a JSON file given with `--config` whose keys are the flag
//! names in snake_case; flags win over the file.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;
use crate::config::{ClicksArgs, MapArgs, PovmArgs};

#[derive(Debug, Parser)]
#[command(
    name = "photodet",
    version,
    about = "Velocity-dependent single-photon photodetection"
)]
struct Cli {
    /// Worker threads for map cells and record generation; output does not
    /// depend on it [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detection amplitudes, visibility, bias and Bloch analyzer for one setup
    Povm(PovmArgs),
    /// Observed-visibility map over (beta Q, beta omega T) as CSV + JSON
    Map(MapArgs),
    /// Simulate click records and estimate beat, visibility and bias
    Clicks(ClicksArgs),
    /// Run the invariant suite at reduced scale
    Selfcheck,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Povm(args) => commands::povm(args),
        Command::Map(args) => commands::map(args),
        Command::Clicks(args) => commands::clicks(args),
        Command::Selfcheck => commands::selfcheck(),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
