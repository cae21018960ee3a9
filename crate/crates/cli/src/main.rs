//! `dcae` command-line driver.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "dcae",
    version,
    about = "Deconfounding autoencoders for cross-domain expression transfer"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel (method, seed) jobs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a confounded two-domain synthetic dataset.
    Synth(SynthArgs),
    /// Pretrain every configured autoencoder variant.
    Pretrain,
    /// Fine-tune pretrained encoders with the first fold held out.
    Finetune,
    /// Run the full cross-validated protocol and write the report.
    Protocol,
    /// Summarize a saved report.
    Report {
        /// `report.json` or the directory holding it.
        path: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Samples per domain.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    rank: usize,
    /// Confounder strength.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    gamma: f64,
    /// Noise level.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    sigma: f64,
    /// Number of sample types.
    #[arg(long, default_value_t = 4)]
    strata: usize,
}

fn init_logging() -> Result<(), String> {
    let level = match std::env::var("DCAE_LOG").as_deref() {
        Err(_) | Ok("") => log::LevelFilter::Warn,
        Ok("quiet") => log::LevelFilter::Error,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => return Err(format!("DCAE_LOG must be quiet, info or debug, got {other:?}")),
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error: {first}");
            return ExitCode::from(1);
        }
    };
    if let Err(msg) = init_logging() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for line in e.to_string().lines().map(str::trim).filter(|l| !l.is_empty()) {
                eprintln!("error: {line}");
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
