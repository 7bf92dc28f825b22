//! `hdivflow` command-line driver.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "hdivflow", version, about = "Divergence-free H(div) flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key after the file is read; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; replaces `out_dir` from the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time-dependent run: series CSV, spectra, snapshots, checkpoint, summary.
    Run,
    /// Mesh-refinement study against a manufactured solution.
    Convergence,
    /// Energy spectrum of a checkpointed state on a fully periodic mesh.
    Spectrum {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Sampling grid size; defaults to `spectrum_grid`.
        #[arg(long)]
        grid: Option<usize>,
        /// Snapshot time to analyse; defaults to the last snapshot.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Stokes projection of the case's initial velocity.
    Project,
    /// Print the resolved configuration and discretisation sizes.
    Info,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match std::env::var("HDIVFLOW_THREADS") {
        Err(_) => 0,
        Ok(v) if v.trim().is_empty() => 0,
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => return fail(&CliError::Usage(format!("HDIVFLOW_THREADS must be a non-negative integer, got {v:?}"))),
        },
    };
    hdivflow::set_worker_threads(threads);
    let result = match &cli.command {
        Command::Run => commands::run(&cli.common),
        Command::Convergence => commands::convergence(&cli.common),
        Command::Spectrum { checkpoint, grid, time } => commands::spectrum(&cli.common, checkpoint, *grid, *time),
        Command::Project => commands::project(&cli.common),
        Command::Info => commands::info(&cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
