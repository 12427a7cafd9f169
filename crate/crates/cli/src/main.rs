//! `manifold-mtf`: generate, cluster, evaluate, sweep and time.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.

mod cluster;
mod eval;
mod grid;
mod scale;
mod sweep;
mod synth;

use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "manifold-mtf", version, about = "Diverse-manifold tri-factorization clustering of multi-type relational data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-partition dataset.
    Synth(synth::SynthArgs),
    /// Cluster every type of a dataset.
    Cluster(cluster::ClusterArgs),
    /// Score predicted labels against ground truth.
    Eval(eval::EvalArgs),
    /// Run a parameter grid and write a CSV of metrics.
    Sweep(sweep::SweepArgs),
    /// Time graph construction and iterations on growing synthetic data.
    Scale(scale::ScaleArgs),
}

/// Reported as a usage error (exit code 2) instead of a runtime failure.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => synth::run(&args),
        Command::Cluster(args) => cluster::run(&args),
        Command::Eval(args) => eval::run(&args),
        Command::Sweep(args) => sweep::run(&args),
        Command::Scale(args) => scale::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => match err.downcast_ref::<UsageError>() {
            Some(UsageError(msg)) => Cli::command()
                .error(clap::error::ErrorKind::ValueValidation, msg)
                .exit(),
            None => {
                eprintln!("error: {err:#}");
                ExitCode::FAILURE
            }
        },
    }
}
