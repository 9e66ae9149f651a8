//! Local-hidden-state models, steering weight and partial steering weight.
//!
//! Hidden variables are deterministic response functions. The weight programs
//! are solved in linearized form: subnormalized local pieces `σ̃_μ` and a
//! remainder `γ̃_{a|x} = σ_{a|x} - Σ_μ D(a|x,μ) σ̃_μ ⪰ 0`, maximizing the local
//! trace `Σ_μ Tr σ̃_μ = 1 - p`.

use serde::Serialize;

use crate::conic::{ConicProgram, LinExpr, MatrixTerm, SolveOptions, SolveStatus, VarId};
use crate::error::{check_cap, checked_pow, Error, Result};
use crate::qmath::{self, ComplexMatrix, DensityMatrix, MeasurementSet, Povm, Tolerances};
use crate::randomness::check_no_signaling;
use crate::scenario::{assemblage_from_state, Assemblage, DeterministicStrategy, STRATEGY_CAP};

/// Margin at or above which a feasibility program counts as feasible.
pub const FEASIBILITY_MARGIN: f64 = -1e-7;

/// Default threshold for [`two_setting_screen`].
pub const SCREEN_THRESHOLD: f64 = 1e-5;

/// Hidden states indexed by deterministic strategies over an ordered list of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateEnsemble {
    /// Inputs the strategies respond to (1-based, in strategy-digit order).
    pub inputs: Vec<usize>,
    pub d: usize,
    /// `states[μ]` for `μ` in lexicographic strategy order.
    pub states: Vec<ComplexMatrix>,
}

impl HiddenStateEnsemble {
    pub fn new(inputs: Vec<usize>, d: usize, states: Vec<ComplexMatrix>) -> Result<Self> {
        let expected = checked_pow(d, inputs.len());
        if states.len() as u128 != expected {
            return Err(Error::DimensionMismatch(format!("expected {expected} hidden states, got {}", states.len())));
        }
        Ok(Self { inputs, d, states })
    }

    /// Ensemble over all of `1..=m`.
    pub fn full(m: usize, d: usize, states: Vec<ComplexMatrix>) -> Result<Self> {
        Self::new((1..=m).collect(), d, states)
    }

    pub fn total_trace(&self) -> f64 {
        self.states.iter().map(qmath::trace_re).sum()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if let Some(k) = self.states.iter().position(|s| !qmath::is_psd(s, tol)) {
            return Err(Error::InvalidInput(format!("hidden state {k} is not PSD")));
        }
        let tr = self.total_trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!("hidden states have total trace {tr}")));
        }
        Ok(())
    }

    pub fn covers(&self, x: usize) -> bool {
        self.inputs.contains(&x)
    }

    /// `Σ_μ δ_{a,μ(x)} σ_μ`.
    pub fn conditional(&self, a: usize, x: usize) -> ComplexMatrix {
        let pos = self.inputs.iter().position(|&y| y == x).expect("input covered by ensemble");
        let n = self.states.first().map_or(0, |s| s.nrows());
        let k = self.inputs.len();
        self.states
            .iter()
            .enumerate()
            .filter(|(mu, _)| DeterministicStrategy::from_index(*mu, k, self.d).assignment()[pos] == a)
            .fold(ComplexMatrix::zeros(n, n), |acc, (_, s)| acc + s)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { inputs: self.inputs.clone(), d: self.d, states: self.states.iter().map(|s| s.scale(k)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Full,
    Partial,
}

/// A split `σ = p·γ + (1-p)·σ^{LHS}` of an assemblage.
#[derive(Debug, Clone)]
pub struct SteeringWeightResult {
    pub kind: WeightKind,
    pub weight: f64,
    /// Normalized steerable part `γ_{a|x}`.
    pub gamma: Assemblage,
    /// Normalized local part: one ensemble for the full weight, one per star edge for the partial weight.
    pub lhs_parts: Vec<HiddenStateEnsemble>,
    pub x_star: Option<usize>,
    pub status: SolveStatus,
    pub max_residual: f64,
}

impl SteeringWeightResult {
    /// `p·γ + (1-p)·LHS`; for the partial weight, `x*` uses the first edge ensemble.
    pub fn reconstruct(&self) -> Result<Assemblage> {
        let (m, d) = (self.gamma.inputs(), self.gamma.outcomes());
        let w = self.weight;
        Assemblage::from_fn(m, d, |a, x| {
            let part = self.lhs_parts.iter().find(|e| e.covers(x)).expect("every input covered");
            self.gamma.sigma(a, x).scale(w) + part.conditional(a, x).scale(1.0 - w)
        })
    }

    /// Largest entry of `reconstruct() - original`.
    pub fn reconstruction_error(&self, original: &Assemblage) -> Result<f64> {
        let r = self.reconstruct()?;
        Ok(r.sigmas().iter().zip(original.sigmas()).map(|(a, b)| qmath::max_abs(&(a - b))).fold(0.0, f64::max))
    }

    /// `p·max_a Tr γ_{a|x*} + 1 - p`.
    pub fn guess_bound(&self, x_star: usize) -> f64 {
        let best = (0..self.gamma.outcomes())
            .map(|a| self.gamma.outcome_probability(a, x_star))
            .fold(f64::NEG_INFINITY, f64::max);
        (self.weight * best + 1.0 - self.weight).min(1.0)
    }
}

/// Lower bound on `P_guess(x*)` from a steering-weight split.
pub fn guess_bound_from_sw(r: &SteeringWeightResult, x_star: usize) -> Result<f64> {
    if r.kind != WeightKind::Full {
        return Err(Error::InvalidInput("expected a steering-weight result".into()));
    }
    Ok(r.guess_bound(x_star))
}

/// Lower bound on `P_guess(x*)` from a partial-steering-weight split.
pub fn guess_bound_from_psw(r: &SteeringWeightResult, x_star: usize) -> Result<f64> {
    if r.kind != WeightKind::Partial {
        return Err(Error::InvalidInput("expected a partial-steering-weight result".into()));
    }
    if r.x_star.is_some_and(|x| x != x_star) {
        return Err(Error::InvalidInput(format!("result was computed for x* = {}", r.x_star.unwrap_or(0))));
    }
    Ok(r.guess_bound(x_star))
}

/// LHS decision.
#[derive(Debug, Clone)]
pub enum LhsVerdict {
    Unsteerable { ensemble: HiddenStateEnsemble, margin: f64 },
    Steerable { margin: f64 },
}

impl LhsVerdict {
    pub fn is_unsteerable(&self) -> bool {
        matches!(self, Self::Unsteerable { .. })
    }

    pub fn margin(&self) -> f64 {
        match self {
            Self::Unsteerable { margin, .. } | Self::Steerable { margin } => *margin,
        }
    }
}

/// Decides whether `σ_{a|x} = Σ_μ D(a|x,μ) σ_μ` has a PSD solution by maximizing
/// the eigenvalue floor `t` of the hidden states.
pub fn lhs_feasibility(a: &Assemblage, opts: SolveOptions) -> Result<LhsVerdict> {
    let (m, d, n) = (a.inputs(), a.outcomes(), a.dim_b());
    check_cap(checked_pow(d, m), STRATEGY_CAP)?;
    check_no_signaling(a)?;
    let count = d.pow(m as u32);
    let mut prog = ConicProgram::new();
    let slack: Vec<VarId> = (0..count).map(|_| prog.add_hermitian(n, true)).collect();
    let t = prog.add_scalar(false);
    let per_outcome = count / d;
    let id = qmath::identity::<f64>(n).scale(per_outcome as f64);
    for x in 1..=m {
        // For x ≥ 2 the last outcome follows from normalization.
        let outcomes = if x == 1 { d } else { d - 1 };
        for out in 0..outcomes {
            let mut terms: Vec<MatrixTerm> = (0..count)
                .filter(|&mu| DeterministicStrategy::from_index(mu, m, d).outcome(x) == out)
                .map(|mu| MatrixTerm::Var(slack[mu], 1.0))
                .collect();
            terms.push(MatrixTerm::ScalarTimes(t, id.clone()));
            prog.add_matrix_eq(&terms, a.sigma(out, x))?;
        }
    }
    prog.maximize(prog.scalar(t));
    let report = prog.solve(opts);
    let margin = report.require_value()?;
    if margin < FEASIBILITY_MARGIN {
        return Ok(LhsVerdict::Steerable { margin });
    }
    let shift = qmath::identity::<f64>(n).scale(report.scalar(t));
    let states = slack.iter().map(|&v| report.matrix(v) + &shift).collect();
    Ok(LhsVerdict::Unsteerable { ensemble: HiddenStateEnsemble::full(m, d, states)?, margin })
}

struct WeightProgram {
    prog: ConicProgram,
    gamma: Vec<VarId>,
    edges: Vec<(Vec<usize>, Vec<VarId>)>,
    local_trace: LinExpr,
}

fn weight_program(a: &Assemblage, edges: Vec<Vec<usize>>) -> Result<WeightProgram> {
    let (m, d, n) = (a.inputs(), a.outcomes(), a.dim_b());
    let mut prog = ConicProgram::new();
    let gamma: Vec<VarId> = (0..m * d).map(|_| prog.add_hermitian(n, true)).collect();
    let mut built = Vec::with_capacity(edges.len());
    for inputs in edges {
        let count = checked_pow(d, inputs.len());
        check_cap(count, STRATEGY_CAP)?;
        let states: Vec<VarId> = (0..count as usize).map(|_| prog.add_hermitian(n, true)).collect();
        built.push((inputs, states));
    }
    for x in 1..=m {
        for (inputs, states) in built.iter().filter(|(inputs, _)| inputs.contains(&x)) {
            let pos = inputs.iter().position(|&y| y == x).expect("covered");
            for out in 0..d {
                let mut terms = vec![MatrixTerm::Var(gamma[out * m + (x - 1)], 1.0)];
                for (mu, &v) in states.iter().enumerate() {
                    if DeterministicStrategy::from_index(mu, inputs.len(), d).assignment()[pos] == out {
                        terms.push(MatrixTerm::Var(v, 1.0));
                    }
                }
                prog.add_matrix_eq(&terms, a.sigma(out, x))?;
            }
        }
    }
    let local_trace = built[0].1.iter().map(|&v| prog.trace(v)).sum();
    Ok(WeightProgram { prog, gamma, edges: built, local_trace })
}

fn weight_result(
    a: &Assemblage,
    wp: &WeightProgram,
    report: &crate::conic::SolveReport,
    kind: WeightKind,
    x_star: Option<usize>,
) -> Result<SteeringWeightResult> {
    let (m, d, n) = (a.inputs(), a.outcomes(), a.dim_b());
    let local = report.eval(&wp.local_trace).clamp(0.0, 1.0);
    let weight = 1.0 - local;
    let gamma = if weight > 1e-12 {
        Assemblage::from_fn(m, d, |out, x| report.matrix(wp.gamma[out * m + (x - 1)]).unscale(weight))?
    } else {
        a.clone()
    };
    let lhs_parts = wp
        .edges
        .iter()
        .map(|(inputs, states)| {
            let mats: Vec<ComplexMatrix> = if local > 1e-12 {
                states.iter().map(|&v| report.matrix(v).unscale(local)).collect()
            } else {
                let k = states.len() as f64;
                states.iter().map(|_| qmath::identity::<f64>(n).unscale(k * n as f64)).collect()
            };
            HiddenStateEnsemble::new(inputs.clone(), d, mats)
        })
        .collect::<Result<_>>()?;
    Ok(SteeringWeightResult { kind, weight, gamma, lhs_parts, x_star, status: report.status, max_residual: report.max_residual })
}

fn trivial_weight(a: &Assemblage, kind: WeightKind, x_star: Option<usize>) -> Result<SteeringWeightResult> {
    let states = (0..a.outcomes()).map(|out| a.sigma(out, 1).clone()).collect();
    Ok(SteeringWeightResult {
        kind,
        weight: 0.0,
        gamma: a.clone(),
        lhs_parts: vec![HiddenStateEnsemble::full(1, a.outcomes(), states)?],
        x_star,
        status: SolveStatus::Optimal,
        max_residual: 0.0,
    })
}

fn solve_weight(
    a: &Assemblage,
    edges: Vec<Vec<usize>>,
    kind: WeightKind,
    x_star: Option<usize>,
    opts: SolveOptions,
) -> Result<SteeringWeightResult> {
    check_no_signaling(a)?;
    let mut wp = weight_program(a, edges)?;
    wp.prog.maximize(wp.local_trace.clone());
    let report = wp.prog.solve(opts);
    report.require_value()?;
    weight_result(a, &wp, &report, kind, x_star)
}

/// Among near-optimal splits, picks the one whose steerable part is most predictable at `x*`.
fn solve_weight_for_guess(
    a: &Assemblage,
    edges: Vec<Vec<usize>>,
    kind: WeightKind,
    x_star: usize,
    opts: SolveOptions,
) -> Result<SteeringWeightResult> {
    let first = solve_weight(a, edges.clone(), kind, Some(x_star), opts)?;
    let m = a.inputs();
    let floor = (1.0 - first.weight) - 10.0 * opts.eps;
    let mut best = first.guess_bound(x_star);
    let mut chosen = first;
    for out in 0..a.outcomes() {
        let mut wp = weight_program(a, edges.clone())?;
        wp.prog.add_le(-wp.local_trace.clone(), -floor);
        let objective = wp.prog.trace(wp.gamma[out * m + (x_star - 1)]);
        wp.prog.maximize(objective);
        let report = wp.prog.solve(opts);
        if report.require_value().is_err() {
            continue;
        }
        let candidate = weight_result(a, &wp, &report, kind, Some(x_star))?;
        let bound = candidate.guess_bound(x_star);
        if bound > best {
            best = bound;
            chosen = candidate;
        }
    }
    Ok(chosen)
}

fn star_edges(m: usize, x_star: usize) -> Vec<Vec<usize>> {
    (1..=m).filter(|&x| x != x_star).map(|x| vec![x_star, x]).collect()
}

fn check_input(a: &Assemblage, x: usize) -> Result<()> {
    if x == 0 || x > a.inputs() {
        return Err(Error::InvalidInput(format!("input {x} out of range 1..={}", a.inputs())));
    }
    Ok(())
}

/// Minimal weight of a generic no-signaling part against an LHS part.
pub fn steering_weight(a: &Assemblage, opts: SolveOptions) -> Result<SteeringWeightResult> {
    if a.inputs() == 1 {
        return trivial_weight(a, WeightKind::Full, None);
    }
    solve_weight(a, vec![(1..=a.inputs()).collect()], WeightKind::Full, None, opts)
}

/// Minimal weight against a part that is local on every edge of the star centred at `x*`.
pub fn partial_steering_weight(a: &Assemblage, x_star: usize, opts: SolveOptions) -> Result<SteeringWeightResult> {
    check_input(a, x_star)?;
    if a.inputs() == 1 {
        return trivial_weight(a, WeightKind::Partial, Some(x_star));
    }
    solve_weight(a, star_edges(a.inputs(), x_star), WeightKind::Partial, Some(x_star), opts)
}

/// [`steering_weight`] with the split chosen to maximize the `x*` guess bound.
pub fn steering_weight_for_guess(a: &Assemblage, x_star: usize, opts: SolveOptions) -> Result<SteeringWeightResult> {
    check_input(a, x_star)?;
    if a.inputs() == 1 {
        return trivial_weight(a, WeightKind::Full, Some(x_star));
    }
    solve_weight_for_guess(a, vec![(1..=a.inputs()).collect()], WeightKind::Full, x_star, opts)
}

/// [`partial_steering_weight`] with the split chosen to maximize the `x*` guess bound.
pub fn partial_steering_weight_for_guess(a: &Assemblage, x_star: usize, opts: SolveOptions) -> Result<SteeringWeightResult> {
    check_input(a, x_star)?;
    if a.inputs() == 1 {
        return trivial_weight(a, WeightKind::Partial, Some(x_star));
    }
    solve_weight_for_guess(a, star_edges(a.inputs(), x_star), WeightKind::Partial, x_star, opts)
}

/// Assemblage local on every star edge at `x*`: input `x ≠ x*` is explained by
/// `tau[k]`, where `x` is the `k`-th non-`x*` input in ascending order.
pub fn construct_partially_unsteerable(tau: &[HiddenStateEnsemble], x_star: usize, m: usize) -> Result<Assemblage> {
    if x_star == 0 || x_star > m {
        return Err(Error::InvalidInput(format!("x* = {x_star} out of range 1..={m}")));
    }
    let others: Vec<usize> = (1..=m).filter(|&x| x != x_star).collect();
    let needed = others.len().max(1);
    if tau.len() != needed {
        return Err(Error::DimensionMismatch(format!("expected {needed} edge ensembles, got {}", tau.len())));
    }
    let d = tau[0].d;
    for (k, e) in tau.iter().enumerate() {
        let covers = e.covers(x_star) && others.get(k).is_none_or(|&x| e.covers(x));
        if e.d != d || !covers {
            return Err(Error::InvalidInput(format!("ensemble {k} does not cover its star edge")));
        }
    }
    let tol = Tolerances::default().id.max(1e-9);
    for out in 0..d {
        let base = tau[0].conditional(out, x_star);
        for (k, e) in tau.iter().enumerate().skip(1) {
            let defect = qmath::max_abs(&(e.conditional(out, x_star) - &base));
            if defect > tol {
                return Err(Error::Precondition(format!(
                    "ensemble {k} disagrees with ensemble 0 at x* (defect {defect:.3e})"
                )));
            }
        }
    }
    Assemblage::from_fn(m, d, |out, x| {
        if x == x_star {
            tau[0].conditional(out, x)
        } else {
            let k = others.iter().position(|&y| y == x).expect("non-x* input");
            tau[k].conditional(out, x)
        }
    })
}

/// Result of [`two_setting_screen`].
#[derive(Debug, Clone)]
pub enum ScreenOutcome {
    Witness { pair: usize, weight: f64 },
    NoneFound { max_weight: f64 },
}

/// Returns the first pair whose two-setting assemblage has steering weight above `threshold`.
/// Finding nothing is not a proof that no pair works.
pub fn two_setting_screen(
    rho: &DensityMatrix,
    pairs: &[(Povm, Povm)],
    threshold: f64,
    opts: SolveOptions,
) -> Result<ScreenOutcome> {
    let mut max_weight = 0.0f64;
    for (k, (p, q)) in pairs.iter().enumerate() {
        let meas = MeasurementSet::new(vec![p.clone(), q.clone()])?;
        let a = assemblage_from_state(rho, &meas)?;
        let w = steering_weight(&a, opts)?.weight;
        if w > threshold {
            return Ok(ScreenOutcome::Witness { pair: k, weight: w });
        }
        max_weight = max_weight.max(w);
    }
    Ok(ScreenOutcome::NoneFound { max_weight })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{pauli_projectors, PauliAxis};
    use crate::random;
    use rand::{rngs::StdRng, SeedableRng};

    fn paulis(axes: &str) -> MeasurementSet {
        MeasurementSet::new(axes.chars().map(|c| pauli_projectors(PauliAxis::from_char(c).unwrap())).collect()).unwrap()
    }

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn product_state_is_unsteerable() {
        let mut rng = StdRng::seed_from_u64(20);
        let rho = random::density_matrix(2, 2, &mut rng).tensor(&random::density_matrix(2, 2, &mut rng));
        let a = assemblage_from_state(&rho, &paulis("XYZ")).unwrap();
        match lhs_feasibility(&a, opts()).unwrap() {
            LhsVerdict::Unsteerable { ensemble, .. } => {
                let rebuilt = Assemblage::from_fn(3, 2, |o, x| ensemble.conditional(o, x)).unwrap();
                for (u, v) in rebuilt.sigmas().iter().zip(a.sigmas()) {
                    assert!(qmath::max_abs(&(u - v)) < 1e-7);
                }
            }
            LhsVerdict::Steerable { margin } => panic!("steerable with margin {margin}"),
        }
        assert!(steering_weight(&a, opts()).unwrap().weight < 1e-6);
    }

    #[test]
    fn phi_plus_xz_is_steerable() {
        let a = assemblage_from_state(&qmath::phi_plus(), &paulis("XZ")).unwrap();
        assert!(!lhs_feasibility(&a, opts()).unwrap().is_unsteerable());
        let r = steering_weight(&a, opts()).unwrap();
        assert!(r.weight > 0.9, "{}", r.weight);
        assert!(r.reconstruction_error(&a).unwrap() < 1e-7);
    }

    #[test]
    fn single_input_is_trivial() {
        let a = assemblage_from_state(&qmath::phi_plus(), &paulis("X")).unwrap();
        assert_eq!(steering_weight(&a, opts()).unwrap().weight, 0.0);
        let r = partial_steering_weight(&a, 1, opts()).unwrap();
        assert_eq!(r.weight, 0.0);
        assert!(r.reconstruction_error(&a).unwrap() < 1e-15);
        assert_eq!(guess_bound_from_psw(&r, 1).unwrap(), 1.0);
    }

    #[test]
    fn two_settings_psw_equals_sw() {
        let rho = qmath::rho_p_theta(0.9, 0.5).unwrap();
        let a = assemblage_from_state(&rho, &paulis("XZ")).unwrap();
        let sw = steering_weight(&a, opts()).unwrap().weight;
        for x in 1..=2 {
            let psw = partial_steering_weight(&a, x, opts()).unwrap().weight;
            assert!((psw - sw).abs() < 1e-6, "{psw} vs {sw}");
        }
    }

    #[test]
    fn bound_formula() {
        let a = assemblage_from_state(&qmath::phi_plus(), &paulis("XZ")).unwrap();
        let mut r = steering_weight(&a, opts()).unwrap();
        r.weight = 0.0;
        assert_eq!(guess_bound_from_sw(&r, 1).unwrap(), 1.0);
        r.weight = 1.0;
        assert!((guess_bound_from_sw(&r, 1).unwrap() - 0.5).abs() < 1e-12);
        assert!(guess_bound_from_psw(&r, 1).is_err());
    }

    #[test]
    fn inconsistent_edge_ensembles_are_rejected() {
        let mut rng = StdRng::seed_from_u64(21);
        let make = |rng: &mut StdRng| {
            let w = random::simplex(8, rng);
            HiddenStateEnsemble::full(3, 2, w.iter().map(|&p| random::density_matrix(2, 2, rng).into_matrix().scale(p)).collect())
                .unwrap()
        };
        let tau = vec![make(&mut rng), make(&mut rng)];
        assert!(matches!(construct_partially_unsteerable(&tau, 1, 3), Err(Error::Precondition(_))));
    }
}
