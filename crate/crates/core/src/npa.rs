//! Device-independent guessing probabilities over a moment-matrix outer
//! approximation of the quantum set.
//!
//! Outcome operators are projectors in Collins-Gisin form: the last outcome of
//! every input is eliminated through completeness. Moment matrices are real
//! symmetric, which is enough for real-valued functionals of the behavior.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chain::ChainInequality;
use crate::conic::{ConicProgram, LinExpr, SolveOptions, SolveStatus, VarId};
use crate::error::{Error, Result};
use crate::randomness::{min_entropy, DATA_TOL};
use crate::scenario::Behavior;

/// Largest moment matrix the relaxation will build.
pub const MAX_MOMENT_SIZE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    /// Words of length at most one.
    One,
    /// Level one plus the products `E_{a|x} F_{b|y}`.
    OneAB,
}

impl Level {
    pub fn label(self) -> &'static str {
        match self {
            Self::One => "1",
            Self::OneAB => "1+AB",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Self::One),
            "1+AB" | "1+ab" => Ok(Self::OneAB),
            other => Err(Error::InvalidInput(format!("unknown relaxation level {other:?}; use 1 or 1+AB"))),
        }
    }
}

/// Projector `(input, outcome)`, input 1-based, outcome below `d - 1`.
type Op = (usize, usize);

/// Operator word split by party; Alice's and Bob's operators commute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    pub alice: Vec<Op>,
    pub bob: Vec<Op>,
}

impl Word {
    fn identity() -> Self {
        Self { alice: vec![], bob: vec![] }
    }

    fn len(&self) -> usize {
        self.alice.len() + self.bob.len()
    }
}

fn reduce_party(ops: impl IntoIterator<Item = Op>) -> Option<Vec<Op>> {
    let mut out: Vec<Op> = Vec::new();
    for op in ops {
        match out.last() {
            Some(&top) if top == op => {}
            Some(&top) if top.0 == op.0 => return None,
            _ => out.push(op),
        }
    }
    Some(out)
}

/// Canonical form of `u† v`, or `None` when the product vanishes.
fn product(u: &Word, v: &Word) -> Option<Word> {
    let alice = reduce_party(u.alice.iter().rev().chain(&v.alice).copied())?;
    let bob = reduce_party(u.bob.iter().rev().chain(&v.bob).copied())?;
    let w = Word { alice, bob };
    // real moments: ⟨w⟩ = ⟨w†⟩
    let rev = Word { alice: w.alice.iter().rev().copied().collect(), bob: w.bob.iter().rev().copied().collect() };
    Some(w.min(rev))
}

/// Monomial basis of the relaxation for a Bell scenario `(mA, mB, dA, dB)`.
#[derive(Debug, Clone)]
pub struct MomentRelaxation {
    pub level: Level,
    pub scenario: (usize, usize, usize, usize),
    pub basis: Vec<Word>,
    /// Representative entry `(i, j)`, `i ≤ j`, of every nonzero moment.
    moments: BTreeMap<Word, (usize, usize)>,
    /// Entries tied to a representative; the first is the representative itself.
    classes: Vec<Vec<(usize, usize)>>,
    zeros: Vec<(usize, usize)>,
}

impl MomentRelaxation {
    pub fn new(level: Level, scenario: (usize, usize, usize, usize)) -> Result<Self> {
        let (ma, mb, da, db) = scenario;
        if ma == 0 || mb == 0 || da < 2 || db < 2 {
            return Err(Error::InvalidInput(format!("scenario {scenario:?} needs inputs ≥ 1 and outcomes ≥ 2")));
        }
        let a_ops: Vec<Op> = (1..=ma).flat_map(|x| (0..da - 1).map(move |a| (x, a))).collect();
        let b_ops: Vec<Op> = (1..=mb).flat_map(|y| (0..db - 1).map(move |b| (y, b))).collect();
        let mut basis = vec![Word::identity()];
        basis.extend(a_ops.iter().map(|&o| Word { alice: vec![o], bob: vec![] }));
        basis.extend(b_ops.iter().map(|&o| Word { alice: vec![], bob: vec![o] }));
        if level == Level::OneAB {
            for &a in &a_ops {
                for &b in &b_ops {
                    basis.push(Word { alice: vec![a], bob: vec![b] });
                }
            }
        }
        if basis.len() > MAX_MOMENT_SIZE {
            return Err(Error::CapExceeded { requested: basis.len() as u128, cap: MAX_MOMENT_SIZE as u128 });
        }
        let mut moments = BTreeMap::new();
        let mut classes: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut class_of: BTreeMap<Word, usize> = BTreeMap::new();
        let mut zeros = Vec::new();
        for i in 0..basis.len() {
            for j in i..basis.len() {
                match product(&basis[i], &basis[j]) {
                    None => zeros.push((i, j)),
                    Some(w) => match class_of.get(&w) {
                        Some(&k) => classes[k].push((i, j)),
                        None => {
                            class_of.insert(w.clone(), classes.len());
                            moments.insert(w, (i, j));
                            classes.push(vec![(i, j)]);
                        }
                    },
                }
            }
        }
        Ok(Self { level, scenario, basis, moments, classes, zeros })
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    /// Number of distinct nonzero moments.
    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    /// Length of the longest basis word.
    pub fn max_word_length(&self) -> usize {
        self.basis.iter().map(Word::len).max().unwrap_or(0)
    }

    fn declare(&self, prog: &mut ConicProgram) -> VarId {
        let v = prog.add_symmetric(self.size(), true);
        for class in &self.classes {
            let (i0, j0) = class[0];
            for &(i, j) in &class[1..] {
                prog.add_eq(prog.re(v, i, j) - prog.re(v, i0, j0), 0.0);
            }
        }
        for &(i, j) in &self.zeros {
            prog.add_eq(prog.re(v, i, j), 0.0);
        }
        v
    }

    fn moment(&self, prog: &ConicProgram, v: VarId, w: &Word) -> LinExpr {
        match self.moments.get(w) {
            Some(&(i, j)) => prog.re(v, i, j),
            None => LinExpr::zero(),
        }
    }

    /// `⟨Ê_a⟩` over the CG words, where `Ê_last = 1 - Σ E`.
    fn expand(&self, op: Option<(usize, usize)>, d: usize) -> Vec<(Option<Op>, f64)> {
        match op {
            None => vec![(None, 1.0)],
            Some((x, a)) if a + 1 < d => vec![(Some((x, a)), 1.0)],
            Some((x, _)) => std::iter::once((None, 1.0)).chain((0..d - 1).map(|a| (Some((x, a)), -1.0))).collect(),
        }
    }

    /// `p(a,b|x,y)` for the moment matrix `v`; `None` marginalizes that party.
    fn prob(&self, prog: &ConicProgram, v: VarId, alice: Option<(usize, usize)>, bob: Option<(usize, usize)>) -> LinExpr {
        let (_, _, da, db) = self.scenario;
        let mut e = LinExpr::zero();
        for (ea, ca) in self.expand(alice, da) {
            for (eb, cb) in self.expand(bob, db) {
                let w = Word { alice: ea.into_iter().collect(), bob: eb.into_iter().collect() };
                e += self.moment(prog, v, &w).scaled(ca * cb);
            }
        }
        e
    }

    fn observed_words(&self) -> Vec<Word> {
        let (ma, mb, da, db) = self.scenario;
        let mut out = vec![Word::identity()];
        for x in 1..=ma {
            for a in 0..da - 1 {
                out.push(Word { alice: vec![(x, a)], bob: vec![] });
            }
        }
        for y in 1..=mb {
            for b in 0..db - 1 {
                out.push(Word { alice: vec![], bob: vec![(y, b)] });
            }
        }
        for x in 1..=ma {
            for a in 0..da - 1 {
                for y in 1..=mb {
                    for b in 0..db - 1 {
                        out.push(Word { alice: vec![(x, a)], bob: vec![(y, b)] });
                    }
                }
            }
        }
        out
    }

    fn observed_value(word: &Word, b: &Behavior) -> f64 {
        match (word.alice.first(), word.bob.first()) {
            (None, None) => 1.0,
            (Some(&(x, a)), None) => average(b.inputs_b(), |y| b.marginal_a(a, x, y)),
            (None, Some(&(y, bb))) => average(b.inputs_a(), |x| b.marginal_b(bb, y, x)),
            (Some(&(x, a)), Some(&(y, bb))) => *b.prob(a, bb, x, y),
        }
    }
}

fn average(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    (1..=n).map(f).sum::<f64>() / n as f64
}

/// Certificate of a device-independent guessing probability.
#[derive(Debug, Clone, Serialize)]
pub struct NlRandomnessResult {
    pub p_guess: f64,
    pub h_min: f64,
    pub level: Level,
    pub status: SolveStatus,
    /// Weight Eve assigns to each guess, in lexicographic guess order.
    pub guess_weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuessTarget {
    /// Eve guesses Alice's outcome of `x*`.
    Alice { x_star: usize },
    /// Eve guesses the pair of outcomes of `(x*, y*)`.
    Joint { x_star: usize, y_star: usize },
}

fn check_behavior(b: &Behavior, rel: &MomentRelaxation) -> Result<()> {
    if b.shape() != rel.scenario {
        return Err(Error::DimensionMismatch(format!("behavior {:?} vs relaxation {:?}", b.shape(), rel.scenario)));
    }
    let defect = b.signaling_defect().max(b.normalization_defect());
    if defect > DATA_TOL {
        return Err(Error::InfeasibleData(format!("behavior is not a normalized no-signaling box (defect {defect:.3e})")));
    }
    Ok(())
}

/// `max Σ_{ee'} p^{ee'}(a=e, b=e'|x*, y*)` subject to `Σ_{ee'} p^{ee'} = p` with each
/// piece in the relaxation.
pub fn p_guess_nl(b: &Behavior, x_star: usize, y_star: usize, rel: &MomentRelaxation, opts: SolveOptions) -> Result<NlRandomnessResult> {
    p_guess_nl_target(b, GuessTarget::Joint { x_star, y_star }, rel, opts)
}

/// Guessing probability for Alice's outcome alone.
pub fn p_guess_nl_local(b: &Behavior, x_star: usize, rel: &MomentRelaxation, opts: SolveOptions) -> Result<NlRandomnessResult> {
    p_guess_nl_target(b, GuessTarget::Alice { x_star }, rel, opts)
}

pub fn p_guess_nl_target(b: &Behavior, target: GuessTarget, rel: &MomentRelaxation, opts: SolveOptions) -> Result<NlRandomnessResult> {
    check_behavior(b, rel)?;
    let (ma, mb, da, db) = rel.scenario;
    let guesses: Vec<(usize, Option<usize>)> = match target {
        GuessTarget::Alice { x_star } => {
            if x_star == 0 || x_star > ma {
                return Err(Error::InvalidInput(format!("x* = {x_star} out of range 1..={ma}")));
            }
            (0..da).map(|e| (e, None)).collect()
        }
        GuessTarget::Joint { x_star, y_star } => {
            if x_star == 0 || x_star > ma || y_star == 0 || y_star > mb {
                return Err(Error::InvalidInput(format!("(x*, y*) = ({x_star}, {y_star}) out of range")));
            }
            (0..da).flat_map(|e| (0..db).map(move |f| (e, Some(f)))).collect()
        }
    };
    let mut prog = ConicProgram::new();
    let mats: Vec<VarId> = guesses.iter().map(|_| rel.declare(&mut prog)).collect();
    for w in rel.observed_words() {
        let total: LinExpr = mats.iter().map(|&v| rel.moment(&prog, v, &w)).sum();
        prog.add_eq(total, MomentRelaxation::observed_value(&w, b));
    }
    let mut objective = LinExpr::zero();
    for (&v, &(e, f)) in mats.iter().zip(&guesses) {
        objective += match target {
            GuessTarget::Alice { x_star } => rel.prob(&prog, v, Some((x_star, e)), None),
            GuessTarget::Joint { x_star, y_star } => rel.prob(&prog, v, Some((x_star, e)), f.map(|f| (y_star, f))),
        };
    }
    prog.maximize(objective);
    let report = prog.solve(opts);
    let value = report.require_value()?;
    let p_guess = value.clamp(f64::MIN_POSITIVE, 1.0);
    let guess_weights = mats.iter().map(|&v| report.eval(&prog.re(v, 0, 0))).collect();
    Ok(NlRandomnessResult { p_guess, h_min: min_entropy(p_guess)?, level: rel.level, status: report.status, guess_weights })
}

/// Linear functional `Σ c(a,b,x,y) p(ab|xy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    pub scenario: (usize, usize, usize, usize),
    /// Dense coefficients in the same `(x, y, a, b)` order as [`Behavior`].
    pub coefficients: Vec<f64>,
}

impl BellFunctional {
    pub fn from_fn(scenario: (usize, usize, usize, usize), f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let (ma, mb, da, db) = scenario;
        let mut coefficients = Vec::with_capacity(ma * mb * da * db);
        for x in 1..=ma {
            for y in 1..=mb {
                for a in 0..da {
                    for b in 0..db {
                        coefficients.push(f(a, b, x, y));
                    }
                }
            }
        }
        Self { scenario, coefficients }
    }

    pub fn coefficient(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        let (_, mb, da, db) = self.scenario;
        self.coefficients[(((x - 1) * mb + (y - 1)) * da + a) * db + b]
    }

    /// CHSH as `Σ_{xy} (-1)^{(x-1)(y-1)} ⟨A_x B_y⟩`, classical bound 2.
    pub fn chsh() -> Self {
        Self::from_fn((2, 2, 2, 2), |a, b, x, y| {
            let corr = if a == b { 1.0 } else { -1.0 };
            if x == 2 && y == 2 { -corr } else { corr }
        })
    }

    pub fn from_chain(ineq: &ChainInequality<f64>) -> Self {
        let (d, m) = (ineq.outcomes(), ineq.inputs());
        let alpha = ineq.alpha().to_vec();
        Self::from_fn((m, m, d, d), move |a, b, x, y| {
            let mut c = 0.0;
            if x == y {
                c += alpha[(a + d - b) % d];
            }
            if y < m && x == y + 1 {
                c += alpha[(b + d - a) % d];
            }
            if y == m && x == 1 {
                c += alpha[(b + 2 * d - a - 1) % d];
            }
            c
        })
    }

    pub fn evaluate(&self, b: &Behavior) -> Result<f64> {
        if b.shape() != self.scenario {
            return Err(Error::DimensionMismatch(format!("behavior {:?} vs functional {:?}", b.shape(), self.scenario)));
        }
        Ok(self.coefficients.iter().zip(b.as_slice()).map(|(c, p)| c * p).sum())
    }
}

/// Upper bound on the quantum value of `expr` over the relaxation.
pub fn bell_value_bound(expr: &BellFunctional, rel: &MomentRelaxation, opts: SolveOptions) -> Result<f64> {
    if expr.scenario != rel.scenario {
        return Err(Error::DimensionMismatch(format!("functional {:?} vs relaxation {:?}", expr.scenario, rel.scenario)));
    }
    let (ma, mb, da, db) = rel.scenario;
    let mut prog = ConicProgram::new();
    let v = rel.declare(&mut prog);
    prog.add_eq(prog.re(v, 0, 0), 1.0);
    let mut objective = LinExpr::zero();
    for x in 1..=ma {
        for y in 1..=mb {
            for a in 0..da {
                for b in 0..db {
                    let c = expr.coefficient(a, b, x, y);
                    if c != 0.0 {
                        objective += rel.prob(&prog, v, Some((x, a)), Some((y, b))).scaled(c);
                    }
                }
            }
        }
    }
    prog.maximize(objective);
    prog.solve(opts).require_value()
}
