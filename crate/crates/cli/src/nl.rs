use std::path::PathBuf;

use clap::Args;
use randcert::npa::{p_guess_nl, p_guess_nl_local, Level, MomentRelaxation};

use crate::inputs;
use crate::sink::{Cell, Sink};
use crate::{CliError, Common};

const COLUMNS: [&str; 7] = ["xstar", "ystar", "level", "moment_size", "p_guess", "h_min", "status"];

#[derive(Args, Debug)]
pub struct NlRandArgs {
    /// Behavior file.
    #[arg(long)]
    behavior: PathBuf,
    /// Alice's designated input (1-based).
    #[arg(long, default_value_t = 1)]
    xstar: usize,
    /// Bob's designated input; guesses the outcome pair when given.
    #[arg(long)]
    ystar: Option<usize>,
    /// Relaxation level: `1` or `1+AB`.
    #[arg(long, default_value = "1+AB")]
    level: String,
    #[command(flatten)]
    common: Common,
}

pub fn run(args: NlRandArgs) -> Result<(), CliError> {
    let opts = args.common.solve_options()?;
    let level = Level::parse(&args.level)?;
    let b = inputs::behavior_file(&args.behavior)?;
    let rel = MomentRelaxation::new(level, b.shape())?;
    let r = match args.ystar {
        Some(y) => p_guess_nl(&b, args.xstar, y, &rel, opts)?,
        None => p_guess_nl_local(&b, args.xstar, &rel, opts)?,
    };
    let mut sink = Sink::open(args.common.out.as_deref(), "nl-rand", &COLUMNS)?;
    sink.write(&[
        Cell::Int(args.xstar),
        args.ystar.map_or(Cell::Empty, Cell::Int),
        Cell::Text(r.level.label().into()),
        Cell::Int(rel.size()),
        Cell::Float(r.p_guess),
        Cell::Float(r.h_min),
        Cell::Text(format!("{:?}", r.status).to_lowercase()),
    ])
}
