use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod features;

use error::CliError;

#[derive(Parser)]
#[command(name = "cofac", version, about = "Interpretable co-facilitation toolkit")]
struct Cli {
    /// Settings file (JSON); for `serve` a service config. Flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log verbosity for stderr (`RUST_LOG` overrides).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// Cut labeled 60 s segments from transcripts and a coding sheet.
    BuildDataset(commands::dataset::Args),
    /// Score every segment of a dataset into concept vectors.
    Extract(commands::extract::Args),
    /// Fit the intervention classifier on extracted features.
    Train(commands::train::Args),
    /// Report metrics, optionally with stratified cross-validation.
    Evaluate(commands::evaluate::Args),
    /// Re-run predictions over a stored session, optionally applying edits.
    Replay(commands::replay::Args),
    /// Start the HTTP service.
    Serve(commands::serve::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(&cli.log));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    let result = std::panic::catch_unwind(|| {
        let run_config = || config::RunConfig::load(cli.config.as_deref());
        match cli.command {
            Command::BuildDataset(a) => commands::dataset::run(a),
            Command::Extract(a) => commands::extract::run(a, &run_config()?),
            Command::Train(a) => commands::train::run(a, &run_config()?),
            Command::Evaluate(a) => commands::evaluate::run(a, &run_config()?),
            Command::Replay(a) => commands::replay::run(a, &run_config()?),
            Command::Serve(a) => commands::serve::run(a, cli.config.as_deref()),
        }
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("{}", CliError::Internal("unexpected panic".into()));
            ExitCode::from(2)
        }
    }
}
