//! `stw`: train, evaluate and benchmark tree-Wasserstein document distances.

mod commands;
mod config;
mod error;
mod providers;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "stw", version, about = "Supervised tree-Wasserstein document distances")]
struct Cli {
    /// JSON file with one object per command name; its values override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic instrument corpus.
    Synth(SynthFlags),
    /// Learn a tree from labeled documents.
    Train(TrainFlags),
    /// Turn a training checkpoint into a tree file.
    Harden(HardenFlags),
    /// kNN test error of one or more distance providers.
    Eval(EvalFlags),
    /// Time batched distance queries.
    Bench(BenchFlags),
    /// Build a quadtree over word embeddings.
    BuildQuadtree(QuadtreeFlags),
    /// Sample a set of clustering trees over word embeddings.
    BuildTsw(TswFlags),
    /// Check a corpus and split.
    Validate(ValidateFlags),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let file = cli.config.as_deref();
    match &cli.command {
        Command::Synth(f) => synth(f, file),
        Command::Train(f) => train_cmd(f, file),
        Command::Harden(f) => harden_cmd(f, file),
        Command::Eval(f) => eval_cmd(f, file),
        Command::Bench(f) => bench_cmd(f, file),
        Command::BuildQuadtree(f) => build_quadtree(f, file),
        Command::BuildTsw(f) => build_tsw(f, file),
        Command::Validate(f) => validate_cmd(f, file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(move || run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("internal error: unexpected panic");
            ExitCode::from(3)
        }
    }
}
