//! Command-line interface: dataset generation, training, evaluation,
//! property verification, and parameter/timing benchmarks.
//!
//! Exit codes: 0 success, 1 property/test failure, 2 usage error, 3 I/O
//! error.

mod bench;
mod config;
mod eval;
mod gen;
mod train;
mod verify_cmd;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "surreal",
    about = "Complex-valued learning on the scaling-rotation manifold",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic CVDS dataset.
    Gen(gen::GenArgs),
    /// Train a network and write metrics plus a checkpoint.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(eval::EvalArgs),
    /// Run the property verification suites.
    Verify(verify_cmd::VerifyArgs),
    /// Report parameter counts and per-layer timings.
    Bench(bench::BenchArgs),
}

/// CLI failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, incompatible inputs, internal validation: exit 2.
    Usage(String),
    /// Missing/corrupt/unwritable files: exit 3.
    Io(String),
    /// A verification property failed: exit 1.
    Check(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Check(m) => m,
        }
    }
}

impl From<surreal_core::Error> for CliError {
    fn from(e: surreal_core::Error) -> Self {
        use surreal_core::Error::*;
        match e {
            Io(_) | NotCvds | Truncated | UnsupportedVersion(_) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() {
    surreal_core::init_threads_from_env();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => gen::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Verify(args) => verify_cmd::run(args),
        Command::Bench(args) => bench::run(args),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}
