//! `randcert`: command-line driver for steering-based and device-independent
//! randomness certification, chain inequalities and measurement compatibility.

mod chain_cmd;
mod compat_cmd;
mod grid;
mod inputs;
mod nl;
mod run;
mod sink;
mod steer;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randcert::conic::SolveOptions;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_PRECONDITION: u8 = 4;
pub const EXIT_CAP: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(EXIT_PARSE, message)
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self::new(EXIT_PRECONDITION, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::parse(format!("{}: {e}", path.display()))
    }

    pub fn write(e: std::io::Error) -> Self {
        Self::new(EXIT_FAILURE, format!("cannot write output: {e}"))
    }

    pub fn cancelled() -> Self {
        Self::new(EXIT_FAILURE, "cancelled")
    }
}

impl From<randcert::Error> for CliError {
    fn from(e: randcert::Error) -> Self {
        use randcert::Error as E;
        let code = match &e {
            E::InvalidInput(_) | E::DimensionMismatch(_) | E::Json(_) | E::Io(_) => EXIT_PARSE,
            E::Solver(_) => EXIT_SOLVER,
            E::Precondition(_) | E::InfeasibleData(_) => EXIT_PRECONDITION,
            E::CapExceeded { .. } => EXIT_CAP,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "randcert", version, about = "Randomness certification from steering and Bell data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Guessing probability and steering-weight bounds for an assemblage or a state family grid.
    SteerRand(steer::SteerRandArgs),
    /// Chain inequality bounds and values for a box, a behavior file or a random sweep.
    Chain(chain_cmd::ChainArgs),
    /// Decomposition of a behavior with a deterministic Alice input into chain boxes.
    Decompose(chain_cmd::DecomposeArgs),
    /// Compatibility hypergraph and star containment for a measurement set.
    Compat(compat_cmd::CompatArgs),
    /// Device-independent guessing probability from a behavior file.
    NlRand(nl::NlRandArgs),
}

/// Options shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Output file; `.json`/`.jsonl` selects JSON lines, anything else CSV. Defaults to CSV on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solver tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Worker threads for grid sweeps; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl Common {
    pub fn solve_options(&self) -> Result<SolveOptions, CliError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(CliError::parse(format!("--eps must lie in (0, 1), got {}", self.eps)));
        }
        Ok(SolveOptions { eps: self.eps, ..SolveOptions::default() })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SteerRand(a) => steer::run(a),
        Command::Chain(a) => chain_cmd::run_chain(a),
        Command::Decompose(a) => chain_cmd::run_decompose(a),
        Command::Compat(a) => compat_cmd::run(a),
        Command::NlRand(a) => nl::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("randcert: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
