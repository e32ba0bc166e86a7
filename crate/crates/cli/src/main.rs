//! `shaprank` command-line tool: Shapley rankings of layer units, oracle
//! benchmarks and mask-based pruning.

mod commands;
mod error;
mod method;
mod report;
mod source;

use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{make_fig2, oracle, prune, rank, train_toy};
use error::{CliError, CliResult};
use report::Context;

#[derive(Debug, Parser)]
#[command(
    name = "shaprank",
    version,
    about = "Shapley-value rankings of network units"
)]
struct Cli {
    /// Worker threads for parallel evaluation
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Add wall-clock seconds to reports
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank the units of one layer by estimated Shapley value
    Rank(rank::RankArgs),
    /// Find oracle subsets and score rankings against them
    Oracle(oracle::OracleArgs),
    /// Mask part of a layer according to a ranking
    Prune(prune::PruneArgs),
    /// Train the small dense classifier used in examples and tests
    TrainToy(train_toy::TrainToyArgs),
    /// Write the three-player example game
    MakeFig2(make_fig2::MakeFig2Args),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let ctx = Context {
        timing: cli.timing,
        started: Instant::now(),
        workers: cli.workers,
    };
    if let Some(w) = ctx.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {w} workers: {e}")))?;
    }
    match &cli.command {
        Command::Rank(a) => rank::run(a, &ctx),
        Command::Oracle(a) => oracle::run(a, &ctx),
        Command::Prune(a) => prune::run(a, &ctx),
        Command::TrainToy(a) => train_toy::run(a, &ctx),
        Command::MakeFig2(a) => make_fig2::run(a),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return fail(&CliError::Usage(
                e.render().to_string().trim_end().to_string(),
            ))
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
