use std::path::PathBuf;

use clap::Args;
use randcert::conic::SolveOptions;
use randcert::randomness::{p_guess_steering, p_guess_steering_set, RandomnessResult};
use randcert::scenario::{assemblage_from_state, Assemblage};
use randcert::steering::{
    guess_bound_from_psw, guess_bound_from_sw, partial_steering_weight_for_guess, steering_weight_for_guess,
};

use crate::grid::{parse_grid, parse_list};
use crate::inputs::{self, StateFamily};
use crate::run::run_ordered;
use crate::sink::{Cell, Sink};
use crate::{CliError, Common};

const COLUMNS: [&str; 11] =
    ["source", "p", "theta", "target", "p_guess", "h_min", "psw_bound", "sw_bound", "psw", "sw", "status"];

#[derive(Args, Debug)]
pub struct SteerRandArgs {
    /// Assemblage file.
    #[arg(long, conflicts_with_all = ["state", "p", "theta", "meas"])]
    assemblage: Option<PathBuf>,
    /// State family measured by Alice on the first qubit.
    #[arg(long, value_enum, requires = "meas")]
    state: Option<StateFamily>,
    /// Mixing parameter: `a:b:n`, comma list or single value.
    #[arg(long)]
    p: Option<String>,
    /// Angle in radians: `a:b:n`, comma list or single value.
    #[arg(long)]
    theta: Option<String>,
    /// Pauli axes (`XYZ`, `X@0.5,Z`) or a measurement file.
    #[arg(long)]
    meas: Option<String>,
    /// Designated input (1-based); defaults to 1.
    #[arg(long, conflicts_with = "xset")]
    xstar: Option<usize>,
    /// Designated input set, comma separated.
    #[arg(long)]
    xset: Option<String>,
    /// Weights over `--xset`; uniform when omitted.
    #[arg(long, requires = "xset")]
    weights: Option<String>,
    #[command(flatten)]
    common: Common,
}

enum Target {
    Single(usize),
    Set(Vec<(usize, f64)>),
}

impl Target {
    fn cell(&self) -> Cell {
        match self {
            Target::Single(x) => Cell::ints(&[*x]),
            Target::Set(w) => Cell::ints(&w.iter().map(|p| p.0).collect::<Vec<_>>()),
        }
    }
}

struct Point {
    source: String,
    p: Option<f64>,
    theta: Option<f64>,
    assemblage: Assemblage,
}

pub fn run(args: SteerRandArgs) -> Result<(), CliError> {
    let opts = args.common.solve_options()?;
    let target = target(&args)?;
    let points = points(&args)?;
    let mut sink = Sink::open(args.common.out.as_deref(), "steer-rand", &COLUMNS)?;
    run_ordered(args.common.jobs, &points, |pt| Ok(vec![evaluate(pt, &target, opts)?]), &mut sink)
}

fn target(args: &SteerRandArgs) -> Result<Target, CliError> {
    let Some(xset) = &args.xset else {
        return Ok(Target::Single(args.xstar.unwrap_or(1)));
    };
    let inputs: Vec<usize> = parse_list(xset)?;
    let weights: Vec<f64> = match &args.weights {
        Some(w) => parse_list(w)?,
        None => vec![1.0 / inputs.len() as f64; inputs.len()],
    };
    if weights.len() != inputs.len() {
        return Err(CliError::parse(format!("{} weights for {} inputs", weights.len(), inputs.len())));
    }
    Ok(Target::Set(inputs.into_iter().zip(weights).collect()))
}

fn points(args: &SteerRandArgs) -> Result<Vec<Point>, CliError> {
    if let Some(path) = &args.assemblage {
        let assemblage = inputs::assemblage_file(path)?;
        return Ok(vec![Point { source: path.display().to_string(), p: None, theta: None, assemblage }]);
    }
    let (Some(family), Some(meas)) = (args.state, &args.meas) else {
        return Err(CliError::parse("give either --assemblage or --state with --meas"));
    };
    let meas = inputs::measurements(meas)?;
    let axis = |flag: &str, value: &Option<String>, used: bool| -> Result<Vec<Option<f64>>, CliError> {
        match (value, used) {
            (Some(v), true) => Ok(parse_grid(v)?.into_iter().map(Some).collect()),
            (None, true) => Err(CliError::parse(format!("--state {} needs {flag}", family.name()))),
            (Some(_), false) => Err(CliError::parse(format!("--state {} takes no {flag}", family.name()))),
            (None, false) => Ok(vec![None]),
        }
    };
    let ps = axis("--p", &args.p, family.uses_p())?;
    let thetas = axis("--theta", &args.theta, family.uses_theta())?;
    let mut out = Vec::with_capacity(ps.len() * thetas.len());
    for &p in &ps {
        for &theta in &thetas {
            let rho = family.state(p.unwrap_or(1.0), theta.unwrap_or(std::f64::consts::FRAC_PI_4))?;
            let assemblage = assemblage_from_state(&rho, &meas)?;
            out.push(Point { source: family.name().into(), p, theta, assemblage });
        }
    }
    Ok(out)
}

fn evaluate(pt: &Point, target: &Target, opts: SolveOptions) -> Result<Vec<Cell>, CliError> {
    let a = &pt.assemblage;
    let (r, bounds): (RandomnessResult, Option<[f64; 4]>) = match target {
        Target::Single(x) => {
            let r = p_guess_steering(a, *x, opts)?;
            let psw = partial_steering_weight_for_guess(a, *x, opts)?;
            let sw = steering_weight_for_guess(a, *x, opts)?;
            let b = [guess_bound_from_psw(&psw, *x)?, guess_bound_from_sw(&sw, *x)?, psw.weight, sw.weight];
            (r, Some(b))
        }
        Target::Set(w) => (p_guess_steering_set(a, w, opts)?, None),
    };
    let b = |k: usize| Cell::opt(bounds.map(|b| b[k]));
    Ok(vec![
        Cell::Text(pt.source.clone()),
        Cell::opt(pt.p),
        Cell::opt(pt.theta),
        target.cell(),
        Cell::Float(r.p_guess),
        Cell::Float(r.h_min),
        b(0),
        b(1),
        b(2),
        b(3),
        Cell::Text(format!("{:?}", r.status).to_lowercase()),
    ])
}
