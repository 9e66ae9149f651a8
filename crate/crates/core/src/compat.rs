//! Joint measurability and compatibility hypergraphs.
//!
//! A set of POVMs is jointly measurable when a parent POVM `{G_λ}` with
//! deterministic post-processing reproduces every effect,
//! `M_{a|x} = Σ_λ δ_{a,λ(x)} G_λ`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::conic::{ConicProgram, MatrixTerm, SolveOptions, VarId};
use crate::error::{Error, Result};
use crate::qmath::{self, ComplexMatrix, MeasurementSet, Povm};
use crate::scenario::{DeterministicStrategy, STRATEGY_CAP};

/// Feasibility margin above which a subset counts as compatible.
pub const COMPAT_MARGIN: f64 = -1e-7;

/// Largest measurement set accepted by [`compatibility_structure`].
pub const MAX_VERTICES: usize = 5;

/// Parent POVM indexed by outcome assignments to the tested measurements.
#[derive(Debug, Clone)]
pub struct ParentPovm {
    pub outcomes: Vec<usize>,
    pub effects: Vec<(DeterministicStrategy, ComplexMatrix)>,
}

impl ParentPovm {
    /// Child effects `Σ_λ δ_{a,λ(x)} G_λ` for the `k`-th tested measurement (0-based).
    pub fn child(&self, k: usize) -> Vec<ComplexMatrix> {
        let n = self.effects.first().map_or(0, |(_, g)| g.nrows());
        let mut out = vec![ComplexMatrix::zeros(n, n); self.outcomes[k]];
        for (lambda, g) in &self.effects {
            out[lambda.assignment()[k]] += g;
        }
        out
    }

    /// Largest entry of `child - M` over all tested measurements.
    pub fn max_residual(&self, children: &[Povm]) -> f64 {
        children
            .iter()
            .enumerate()
            .flat_map(|(k, povm)| {
                self.child(k).into_iter().zip(povm.effects()).map(|(g, m)| qmath::max_abs(&(g - m))).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.effects.iter().map(|(_, g)| qmath::min_eigenvalue(g)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub enum JointMeasurability {
    Compatible { parent: ParentPovm, margin: f64 },
    Incompatible { margin: f64 },
}

impl JointMeasurability {
    pub fn is_compatible(&self) -> bool {
        matches!(self, Self::Compatible { .. })
    }

    /// Optimal `t` in `G_λ = P_λ + t·I`, `P_λ ⪰ 0`.
    pub fn margin(&self) -> f64 {
        match self {
            Self::Compatible { margin, .. } | Self::Incompatible { margin } => *margin,
        }
    }
}

fn mixed_radix(mut index: usize, radix: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for (slot, &r) in out.iter_mut().zip(radix).rev() {
        *slot = index % r;
        index /= r;
    }
    out
}

/// Decides joint measurability of `subset` by maximizing the eigenvalue margin of a parent POVM.
pub fn joint_measurability(subset: &[Povm], opts: SolveOptions) -> Result<JointMeasurability> {
    let Some(first) = subset.first() else {
        return Err(Error::InvalidInput("empty measurement subset".into()));
    };
    let n = first.dim();
    if let Some(p) = subset.iter().find(|p| p.dim() != n) {
        return Err(Error::DimensionMismatch(format!("POVMs act on dimensions {n} and {}", p.dim())));
    }
    let outcomes: Vec<usize> = subset.iter().map(Povm::outcomes).collect();
    let count = outcomes.iter().try_fold(1u128, |acc, &o| acc.checked_mul(o as u128)).unwrap_or(u128::MAX);
    crate::error::check_cap(count, STRATEGY_CAP)?;
    let lambdas: Vec<Vec<usize>> = (0..count as usize).map(|i| mixed_radix(i, &outcomes)).collect();

    let mut prog = ConicProgram::new();
    let slack: Vec<VarId> = lambdas.iter().map(|_| prog.add_hermitian(n, true)).collect();
    let t = prog.add_scalar(false);
    for (k, povm) in subset.iter().enumerate() {
        // The last outcome of every later measurement is implied by normalization.
        let used = if k == 0 { povm.outcomes() } else { povm.outcomes() - 1 };
        for a in 0..used {
            let hits = lambdas.iter().filter(|l| l[k] == a).count();
            let mut terms: Vec<MatrixTerm> =
                lambdas.iter().zip(&slack).filter(|(l, _)| l[k] == a).map(|(_, &v)| MatrixTerm::Var(v, 1.0)).collect();
            terms.push(MatrixTerm::ScalarTimes(t, qmath::identity::<f64>(n).scale(hits as f64)));
            prog.add_matrix_eq(&terms, povm.effect(a))?;
        }
    }
    prog.maximize(prog.scalar(t));
    let report = prog.solve(opts);
    let margin = report.require_value()?;
    if margin < COMPAT_MARGIN {
        return Ok(JointMeasurability::Incompatible { margin });
    }
    let shift = qmath::identity::<f64>(n).scale(report.scalar(t));
    let effects = lambdas
        .into_iter()
        .zip(&slack)
        .map(|(l, &v)| (DeterministicStrategy::new(l), qmath::hermitian_part(&(report.matrix(v) + &shift))))
        .collect();
    Ok(JointMeasurability::Compatible { parent: ParentPovm { outcomes, effects }, margin })
}

/// Hypergraph on vertices `1..=m` whose hyperedges are maximal compatible sets of size ≥ 2.
/// Singletons are always compatible and not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatHypergraph {
    pub vertices: usize,
    pub hyperedges: Vec<Vec<usize>>,
}

impl CompatHypergraph {
    /// Validates vertex labels and reduces the edge list to its maximal sets.
    pub fn new(vertices: usize, hyperedges: Vec<Vec<usize>>) -> Result<Self> {
        let mut sets: Vec<BTreeSet<usize>> = Vec::new();
        for e in hyperedges {
            if let Some(&v) = e.iter().find(|&&v| v == 0 || v > vertices) {
                return Err(Error::InvalidInput(format!("vertex {v} not in 1..={vertices}")));
            }
            let s: BTreeSet<usize> = e.into_iter().collect();
            if s.len() >= 2 {
                sets.push(s);
            }
        }
        let mut maximal: Vec<BTreeSet<usize>> = Vec::new();
        for (i, s) in sets.iter().enumerate() {
            let dominated = sets.iter().enumerate().any(|(j, t)| i != j && s.is_subset(t) && (s != t || j < i));
            if !dominated {
                maximal.push(s.clone());
            }
        }
        let mut hyperedges: Vec<Vec<usize>> = maximal.into_iter().map(|s| s.into_iter().collect()).collect();
        hyperedges.sort();
        Ok(Self { vertices, hyperedges })
    }

    /// Whether `set` is compatible under downward closure.
    pub fn is_compatible(&self, set: &[usize]) -> bool {
        let s: BTreeSet<usize> = set.iter().copied().collect();
        if s.iter().any(|&v| v == 0 || v > self.vertices) {
            return false;
        }
        s.len() <= 1 || self.hyperedges.iter().any(|e| s.iter().all(|v| e.contains(v)))
    }

    /// Quotient hypergraph with `block` merged into vertex 1 and the remaining vertices relabelled in order.
    pub fn contract(&self, block: &[usize]) -> Result<Self> {
        let block: BTreeSet<usize> = block.iter().copied().collect();
        self.check_vertices(&block)?;
        let rest: Vec<usize> = (1..=self.vertices).filter(|v| !block.contains(v)).collect();
        let label = |v: usize| rest.iter().position(|&r| r == v).map(|p| p + 2);
        let mut edges = Vec::new();
        for e in &self.hyperedges {
            let others: Vec<usize> = e.iter().filter_map(|&v| label(v)).collect();
            if block.iter().all(|v| e.contains(v)) {
                edges.push(std::iter::once(1).chain(others).collect());
            } else {
                edges.push(others);
            }
        }
        Self::new(rest.len() + 1, edges)
    }

    fn check_vertices(&self, set: &BTreeSet<usize>) -> Result<()> {
        if set.is_empty() {
            return Err(Error::InvalidInput("vertex set is empty".into()));
        }
        match set.iter().find(|&&v| v == 0 || v > self.vertices) {
            Some(v) => Err(Error::InvalidInput(format!("unknown vertex {v}"))),
            None => Ok(()),
        }
    }
}

/// Whether `x*` is compatible with every other measurement.
pub fn contains_star(h: &CompatHypergraph, x_star: usize) -> Result<bool> {
    contains_block_star(h, &[x_star])
}

/// Whether `X ∪ {x'}` is compatible for every `x' ∉ X`.
pub fn contains_block_star(h: &CompatHypergraph, block: &[usize]) -> Result<bool> {
    let set: BTreeSet<usize> = block.iter().copied().collect();
    h.check_vertices(&set)?;
    let base: Vec<usize> = set.iter().copied().collect();
    if base.len() == h.vertices {
        return Ok(h.is_compatible(&base));
    }
    Ok((1..=h.vertices).filter(|v| !set.contains(v)).all(|v| {
        let mut s = base.clone();
        s.push(v);
        h.is_compatible(&s)
    }))
}

/// Hypergraph together with the feasibility margin of every subset that was tested.
#[derive(Debug, Clone)]
pub struct CompatStructure {
    pub hypergraph: CompatHypergraph,
    pub margins: Vec<(Vec<usize>, f64)>,
}

/// Builds the compatibility hypergraph, testing subsets by increasing size and
/// skipping any subset with an incompatible proper subset.
pub fn compatibility_structure(meas: &MeasurementSet, opts: SolveOptions) -> Result<CompatStructure> {
    let m = meas.inputs();
    if m > MAX_VERTICES {
        return Err(Error::CapExceeded { requested: 1u128 << m, cap: 1u128 << MAX_VERTICES });
    }
    let mut compatible: Vec<u32> = (0..m).map(|i| 1u32 << i).collect();
    let mut margins = Vec::new();
    for size in 2..=m {
        let mut found = false;
        for mask in 1u32..(1u32 << m) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let closed = (0..m).filter(|i| mask & (1 << i) != 0).all(|i| compatible.contains(&(mask & !(1 << i))));
            if !closed {
                continue;
            }
            let inputs: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect();
            let povms: Vec<Povm> = inputs.iter().map(|&x| meas.povm(x).clone()).collect();
            let verdict = joint_measurability(&povms, opts)?;
            margins.push((inputs, verdict.margin()));
            if verdict.is_compatible() {
                compatible.push(mask);
                found = true;
            }
        }
        if !found {
            break;
        }
    }
    let edges = compatible
        .into_iter()
        .filter(|mask| mask.count_ones() >= 2)
        .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect())
        .collect();
    Ok(CompatStructure { hypergraph: CompatHypergraph::new(m, edges)?, margins })
}
