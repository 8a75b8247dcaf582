//! `agreesearch`: train, evaluate, sweep, query and serve.
//!
//! Exit codes: 0 on success, 2 for usage errors and missing inputs (the
//! message names the flag), 1 for any other failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig, UsageError};

#[derive(Debug, Parser)]
#[command(name = "agreesearch", version, about = "Agreement-aware article search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the relatedness and agreement models and write them to --model-dir.
    Train,
    /// Score saved models on --stances-test and write reports.
    Eval,
    /// Train and evaluate over a grid of key-sentence counts, epochs and seeds.
    Sweep,
    /// Answer one question from the command line.
    Query {
        /// Question text.
        question: String,
    },
    /// Run the HTTP service.
    Serve,
    /// Write a small synthetic corpus and vector file to a directory.
    Synth {
        /// Output directory.
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = RunConfig::from_flags(&cli.flags)?;
    match cli.command {
        Command::Train => commands::train(&config),
        Command::Eval => commands::eval(&config),
        Command::Sweep => commands::sweep(&config),
        Command::Query { question } => commands::query(&config, &question),
        Command::Serve => commands::serve(&config),
        Command::Synth { dir } => commands::synth(&config, &dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
