//! `attnboot`: bootstrap uncertainty and shrinkage for attention maps.
//!
//! Every command writes into `--out` (default from `ATTNBOOT_OUT`) and leaves
//! a `run.json` with its resolved settings there. Failures print one JSON
//! record on stderr and exit with 2 (input), 3 (I/O) or 4 (degenerate
//! statistics).

mod analyze;
mod error;
mod nullgen;
mod options;
mod output;
mod regularize;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "attnboot", version, about = "Bootstrap uncertainty and regularization of attention maps")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "ATTNBOOT_OUT", default_value = "attnboot-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write bootstrap null images as PNG and image dumps.
    Nullgen(nullgen::NullgenArgs),
    /// Compute z-statistics, p-values, local FDR and pi0 for one image.
    Analyze(analyze::AnalyzeArgs),
    /// Shrink an analyzed attention map.
    Regularize(regularize::RegularizeArgs),
    /// Run the noise-injection study over a corpus.
    Simulate(simulate::SimulateArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Nullgen(args) => nullgen::run(&args, &cli.out),
        Command::Analyze(args) => analyze::run(&args, &cli.out),
        Command::Regularize(args) => regularize::run(&args, &cli.out),
        Command::Simulate(args) => simulate::run(&args, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.kind.code())
        }
    }
}
