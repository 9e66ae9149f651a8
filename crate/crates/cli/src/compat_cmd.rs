use std::path::PathBuf;

use clap::Args;
use randcert::compat::{compatibility_structure, contains_block_star, contains_star};
use randcert::io;

use crate::grid::parse_list;
use crate::inputs;
use crate::sink::{Cell, Sink};
use crate::{CliError, Common};

const COLUMNS: [&str; 4] = ["kind", "target", "holds", "margin"];

#[derive(Args, Debug)]
pub struct CompatArgs {
    /// Pauli axes (`XYZ`, `X@0.5,Z@0.5`) or a measurement file.
    #[arg(long)]
    meas: String,
    /// Also report block-star containment for this input set.
    #[arg(long)]
    xset: Option<String>,
    /// Hypergraph JSON output.
    #[arg(long)]
    hypergraph: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

/// Rows: every tested subset with its margin, the maximal hyperedges, then star containment per input.
pub fn run(args: CompatArgs) -> Result<(), CliError> {
    let opts = args.common.solve_options()?;
    let meas = inputs::measurements(&args.meas)?;
    let xset: Option<Vec<usize>> = args.xset.as_deref().map(parse_list).transpose()?;
    let s = compatibility_structure(&meas, opts)?;
    let h = &s.hypergraph;
    if let Some(path) = &args.hypergraph {
        std::fs::write(path, io::hypergraph_to_json(h)?).map_err(CliError::write)?;
    }
    let mut sink = Sink::open(args.common.out.as_deref(), "compat", &COLUMNS)?;
    for (set, margin) in &s.margins {
        sink.write(&[Cell::Text("subset".into()), Cell::ints(set), Cell::Bool(*margin >= 0.0), Cell::Float(*margin)])?;
    }
    for edge in &h.hyperedges {
        sink.write(&[Cell::Text("hyperedge".into()), Cell::ints(edge), Cell::Bool(true), Cell::Empty])?;
    }
    for x in 1..=h.vertices {
        sink.write(&[Cell::Text("star".into()), Cell::ints(&[x]), Cell::Bool(contains_star(h, x)?), Cell::Empty])?;
    }
    if let Some(set) = xset {
        let holds = contains_block_star(h, &set)?;
        sink.write(&[Cell::Text("block_star".into()), Cell::ints(&set), Cell::Bool(holds), Cell::Empty])?;
    }
    Ok(())
}
