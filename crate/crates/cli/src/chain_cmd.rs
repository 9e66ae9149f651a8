use std::path::PathBuf;

use clap::Args;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use randcert::chain::{
    chain_value, classical_bound_bruteforce, classical_bound_dp, decompose_partially_deterministic, ns_box,
    partially_deterministic_box, verify_no_chain_violation, ChainCheck, ChainInequality, ChainOffsetVector,
    BRUTE_FORCE_CAP,
};
use randcert::random;
use randcert::scenario::{behavior_from_state, Behavior, DeterministicStrategy};
use randcert::qmath::MeasurementSet;

use crate::grid::parse_list;
use crate::inputs;
use crate::run::run_ordered;
use crate::sink::{Cell, Sink};
use crate::{CliError, Common};

const CHAIN_COLUMNS: [&str; 11] =
    ["source", "d", "m", "alpha", "xstar", "e", "value", "bound_dp", "bound_bruteforce", "margin", "verdict"];

const DECOMPOSE_COLUMNS: [&str; 6] = ["xstar", "e", "q", "weight", "reconstruction_residual", "support_consistent"];

#[derive(Args, Debug)]
pub struct ChainArgs {
    /// Outcomes per party.
    #[arg(long)]
    d: Option<usize>,
    /// Inputs per party.
    #[arg(long)]
    m: Option<usize>,
    /// Coefficients α_0..α_{d-1}, comma separated; defaults to (1, 0, …, 0), random in sweeps.
    #[arg(long)]
    alpha: Option<String>,
    /// Built-in box; `ns` is the chain box with the given `--offsets` (all zero by default).
    #[arg(long, value_parser = ["ns"], conflicts_with_all = ["behavior", "sweep_partially_deterministic"])]
    r#box: Option<String>,
    /// The 2m offsets of the `ns` box, comma separated.
    #[arg(long, requires = "box")]
    offsets: Option<String>,
    /// Behavior file with mA = mB and dA = dB.
    #[arg(long, conflicts_with = "sweep_partially_deterministic")]
    behavior: Option<PathBuf>,
    /// Sample random no-signaling behaviors with one deterministic Alice input.
    #[arg(long)]
    sweep_partially_deterministic: bool,
    /// Sweep size.
    #[arg(long, default_value_t = 200, requires = "sweep_partially_deterministic")]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// Behavior file with mA = mB and dA = dB.
    #[arg(long)]
    behavior: PathBuf,
    /// Deterministic Alice input (1-based); found automatically when omitted.
    #[arg(long)]
    xstar: Option<usize>,
    #[command(flatten)]
    common: Common,
}

struct Case {
    source: String,
    behavior: Behavior,
    ineq: ChainInequality<f64>,
    designated: Option<(usize, usize)>,
}

pub fn run_chain(args: ChainArgs) -> Result<(), CliError> {
    let cases = if args.sweep_partially_deterministic {
        sweep(&args)?
    } else if let Some(path) = &args.behavior {
        let behavior = inputs::behavior_file(path)?;
        let (m, d) = chain_shape(&behavior)?;
        check_shape(&args, m, d)?;
        vec![Case { source: path.display().to_string(), ineq: inequality(&args, d, m)?, behavior, designated: None }]
    } else if args.r#box.is_some() {
        let (Some(d), Some(m)) = (args.d, args.m) else {
            return Err(CliError::parse("--box needs --d and --m"));
        };
        let ineq = inequality(&args, d, m)?;
        let offsets = match &args.offsets {
            Some(s) => ChainOffsetVector::unconstrained(d, parse_list(s)?)?,
            None => ChainOffsetVector::zero(d, m),
        };
        let behavior = ns_box(d, &offsets)?;
        let source = format!("ns:{}", offsets.values().iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" "));
        vec![Case { source, behavior, ineq, designated: None }]
    } else {
        let (Some(d), Some(m)) = (args.d, args.m) else {
            return Err(CliError::parse("give --d and --m, --behavior, or --sweep-partially-deterministic"));
        };
        let ineq = inequality(&args, d, m)?;
        let row = bounds_row("bounds".into(), &ineq, None, None)?;
        let mut sink = Sink::open(args.common.out.as_deref(), "chain", &CHAIN_COLUMNS)?;
        return sink.write(&row);
    };
    let mut sink = Sink::open(args.common.out.as_deref(), "chain", &CHAIN_COLUMNS)?;
    run_ordered(args.common.jobs, &cases, |c| Ok(vec![evaluate(c)?]), &mut sink)?;
    if args.sweep_partially_deterministic {
        eprintln!("swept {} samples with seed {}", sink.rows(), args.seed);
    }
    Ok(())
}

fn chain_shape(b: &Behavior) -> Result<(usize, usize), CliError> {
    let (m_a, m_b, d_a, d_b) = b.shape();
    if m_a != m_b || d_a != d_b {
        return Err(CliError::parse(format!("chain inequalities need mA = mB and dA = dB, got {:?}", b.shape())));
    }
    Ok((m_a, d_a))
}

fn check_shape(args: &ChainArgs, m: usize, d: usize) -> Result<(), CliError> {
    if args.d.is_some_and(|x| x != d) || args.m.is_some_and(|x| x != m) {
        return Err(CliError::parse(format!("behavior has d = {d}, m = {m}, which contradicts --d/--m")));
    }
    Ok(())
}

fn inequality(args: &ChainArgs, d: usize, m: usize) -> Result<ChainInequality<f64>, CliError> {
    let alpha = match &args.alpha {
        Some(s) => parse_list(s)?,
        None => (0..d).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
    };
    Ok(ChainInequality::new(d, m, alpha)?)
}

fn bounds_row(source: String, ineq: &ChainInequality<f64>, value: Option<f64>, designated: Option<(usize, usize)>) -> Result<Vec<Cell>, CliError> {
    let dp = classical_bound_dp(ineq);
    let brute = match classical_bound_bruteforce(ineq, BRUTE_FORCE_CAP) {
        Ok(v) => Some(v),
        Err(randcert::Error::CapExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(vec![
        Cell::Text(source),
        Cell::Int(ineq.outcomes()),
        Cell::Int(ineq.inputs()),
        Cell::Text(ineq.alpha().iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")),
        designated.map_or(Cell::Empty, |p| Cell::Int(p.0)),
        designated.map_or(Cell::Empty, |p| Cell::Int(p.1)),
        Cell::opt(value),
        Cell::Float(dp),
        Cell::opt(brute),
        Cell::opt(value.map(|v| dp - v)),
        Cell::Empty,
    ])
}

fn evaluate(c: &Case) -> Result<Vec<Cell>, CliError> {
    let value = chain_value(&c.behavior, &c.ineq)?;
    let check = verify_no_chain_violation(&c.behavior, &c.ineq)?;
    let mut row = bounds_row(c.source.clone(), &c.ineq, Some(value), c.designated)?;
    row[9] = Cell::Float(check.margin());
    row[10] = Cell::Text(match check {
        ChainCheck::Ok { .. } => "ok".into(),
        ChainCheck::Violated { .. } => "violated".into(),
    });
    Ok(row)
}

fn sweep(args: &ChainArgs) -> Result<Vec<Case>, CliError> {
    if args.samples == 0 {
        return Err(CliError::parse("--samples must be positive"));
    }
    let mut rng = StdRng::seed_from_u64(args.seed);
    (0..args.samples)
        .map(|k| {
            let d = args.d.unwrap_or_else(|| rng.random_range(2..=3));
            let m = args.m.unwrap_or_else(|| rng.random_range(2..=3));
            let base = random_ns_behavior(&mut rng, m, d)?;
            let (x_star, e) = (rng.random_range(1..=m), rng.random_range(0..d));
            let behavior = partially_deterministic_box(&base, x_star, e)?;
            let ineq = match &args.alpha {
                Some(_) => inequality(args, d, m)?,
                None => ChainInequality::new(d, m, (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())?,
            };
            Ok(Case { source: format!("sample {k}"), behavior, ineq, designated: Some((x_star, e)) })
        })
        .collect()
}

/// Mixture of deterministic points, qudit quantum behaviors and chain boxes with arbitrary offsets.
fn random_ns_behavior(rng: &mut StdRng, m: usize, d: usize) -> Result<Behavior, CliError> {
    let count = rng.random_range(1..=4);
    let weights = random::simplex(count, rng);
    let mut parts = Vec::with_capacity(count);
    for _ in 0..count {
        parts.push(match rng.random_range(0..3) {
            0 => {
                let mut s = || DeterministicStrategy::new((0..m).map(|_| rng.random_range(0..d)).collect());
                let (a, b) = (s(), s());
                Behavior::deterministic(&a, &b, d, d)?
            }
            1 => {
                let rho = random::density_matrix(d * d, rng.random_range(1..=d * d), rng);
                let alice = MeasurementSet::new((0..m).map(|_| random::povm(d, d, rng)).collect())?;
                let bob = MeasurementSet::new((0..m).map(|_| random::povm(d, d, rng)).collect())?;
                behavior_from_state(&rho, &alice, &bob)?
            }
            _ => {
                let q = (0..2 * m).map(|_| rng.random_range(0..d)).collect();
                ns_box(d, &ChainOffsetVector::unconstrained(d, q)?)?
            }
        });
    }
    let refs: Vec<(f64, &Behavior)> = weights.into_iter().zip(parts.iter()).collect();
    Ok(Behavior::mixture(&refs)?)
}

pub fn run_decompose(args: DecomposeArgs) -> Result<(), CliError> {
    let b = inputs::behavior_file(&args.behavior)?;
    let (m, d) = chain_shape(&b)?;
    let x_star = match args.xstar {
        Some(x) => x,
        None => (1..=m)
            .find(|&x| (0..d).any(|a| b.marginal_a(a, x, 1) > 1.0 - 1e-10))
            .ok_or_else(|| CliError::precondition("no input of Alice has a deterministic outcome"))?,
    };
    let dec = decompose_partially_deterministic(&b, x_star)?;
    let mut sink = Sink::open(args.common.out.as_deref(), "decompose", &DECOMPOSE_COLUMNS)?;
    let support = dec.weights.support();
    for (q, w) in &support {
        sink.write(&[
            Cell::Int(dec.x_star),
            Cell::Int(dec.e),
            Cell::ints(q),
            Cell::Float(*w),
            Cell::Float(dec.reconstruction_residual),
            Cell::Bool(dec.support_consistent),
        ])?;
    }
    eprintln!(
        "{} components, reconstruction residual {:.3e}",
        support.len(),
        dec.reconstruction_residual
    );
    Ok(())
}
