//! Steering-based guessing probabilities.
//!
//! Eve splits the observed assemblage into no-signaling pieces `σ^γ_{a|x}`,
//! one per guess `γ`, and scores when her guess matches Alice's outcome on the
//! designated inputs.

use serde::Serialize;

use crate::conic::{ConicProgram, LinExpr, MatrixTerm, SolveOptions, SolveStatus, VarId};
use crate::error::{check_cap, checked_pow, Error, Result};
use crate::qmath::{self, ComplexMatrix, Tolerances};
use crate::scenario::{Assemblage, DeterministicStrategy};

/// Hard cap on the number of guess strings `d^{|X|}`.
pub const GUESS_CAP: u128 = 4096;

/// Tolerance used to reject signaling input data before solving.
pub const DATA_TOL: f64 = 1e-7;

/// Eve's guess `γ: X → [d]` over an ordered input subset `X` (1-based inputs).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GuessString {
    pub inputs: Vec<usize>,
    pub gamma: Vec<usize>,
}

impl GuessString {
    /// `γ(x)` if `x ∈ X`.
    pub fn guess(&self, x: usize) -> Option<usize> {
        self.inputs.iter().position(|&y| y == x).map(|k| self.gamma[k])
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Residuals {
    /// Largest entry of `Σ_γ σ^γ_{a|x} - σ_{a|x}`.
    pub reconstruction: f64,
    /// Largest no-signaling defect over the pieces.
    pub signaling: f64,
    /// Smallest eigenvalue over all pieces.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomnessResult {
    pub p_guess: f64,
    pub h_min: f64,
    pub status: SolveStatus,
    #[serde(skip)]
    pub guesses: Vec<GuessString>,
    /// Subnormalized pieces `σ^γ`, aligned with `guesses`.
    #[serde(skip)]
    pub decomposition: Vec<Assemblage>,
    pub residuals: Residuals,
}

/// `-log₂ p` for `p ∈ (0, 1]`.
pub fn min_entropy(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!("min-entropy needs p in (0, 1], got {p}")));
    }
    Ok(-p.log2())
}

pub(crate) fn check_no_signaling(a: &Assemblage) -> Result<()> {
    let defect = a.signaling_defect();
    if defect > DATA_TOL {
        return Err(Error::InfeasibleData(format!("assemblage is signaling (defect {defect:.3e})")));
    }
    a.validate(Tolerances { id: f64::INFINITY, ..Tolerances::uniform(DATA_TOL) })
        .map_err(|e| Error::InfeasibleData(e.to_string()))
}

/// `P^S_guess(x*)`: Eve guesses Alice's outcome for the single input `x*`.
pub fn p_guess_steering(a: &Assemblage, x_star: usize, opts: SolveOptions) -> Result<RandomnessResult> {
    p_guess_steering_set(a, &[(x_star, 1.0)], opts)
}

/// `P^S_guess(X) = max Σ_{x∈X} p(x) Σ_γ Tr σ^γ_{γ(x)|x}` with one decomposition shared by all `x ∈ X`.
pub fn p_guess_steering_set(a: &Assemblage, x_weights: &[(usize, f64)], opts: SolveOptions) -> Result<RandomnessResult> {
    let (m, d, n) = (a.inputs(), a.outcomes(), a.dim_b());
    if x_weights.is_empty() {
        return Err(Error::InvalidInput("input set X is empty".into()));
    }
    let mut inputs: Vec<usize> = Vec::with_capacity(x_weights.len());
    for &(x, w) in x_weights {
        if x == 0 || x > m {
            return Err(Error::InvalidInput(format!("input {x} out of range 1..={m}")));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidInput(format!("weight for input {x} must be positive, got {w}")));
        }
        if inputs.contains(&x) {
            return Err(Error::InvalidInput(format!("input {x} listed twice")));
        }
        inputs.push(x);
    }
    let total: f64 = x_weights.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("input weights sum to {total}, expected 1")));
    }
    let count = checked_pow(d, inputs.len());
    check_cap(count, GUESS_CAP)?;
    check_no_signaling(a)?;

    let guesses: Vec<GuessString> = (0..count as usize)
        .map(|i| GuessString {
            inputs: inputs.clone(),
            gamma: DeterministicStrategy::from_index(i, inputs.len(), d).assignment().to_vec(),
        })
        .collect();

    let mut prog = ConicProgram::new();
    // vars[g][a*m + x-1]
    let vars: Vec<Vec<VarId>> =
        guesses.iter().map(|_| (0..m * d).map(|_| prog.add_hermitian(n, true)).collect()).collect();
    let at = |g: usize, outcome: usize, x: usize| vars[g][outcome * m + (x - 1)];

    for x in 1..=m {
        for outcome in 0..d {
            let terms: Vec<MatrixTerm> = (0..guesses.len()).map(|g| MatrixTerm::Var(at(g, outcome, x), 1.0)).collect();
            prog.add_matrix_eq(&terms, a.sigma(outcome, x))?;
        }
    }
    // No-signaling per piece; the last piece follows from the data.
    for g in 0..guesses.len().saturating_sub(1) {
        for x in 2..=m {
            let mut terms = Vec::with_capacity(2 * d);
            for outcome in 0..d {
                terms.push(MatrixTerm::Var(at(g, outcome, x), 1.0));
                terms.push(MatrixTerm::Var(at(g, outcome, 1), -1.0));
            }
            prog.add_matrix_eq(&terms, &ComplexMatrix::zeros(n, n))?;
        }
    }
    let mut objective = LinExpr::zero();
    for &(x, w) in x_weights {
        for (g, guess) in guesses.iter().enumerate() {
            let e = guess.guess(x).expect("x in X");
            objective += prog.trace(at(g, e, x)).scaled(w);
        }
    }
    prog.maximize(objective);

    let report = prog.solve(opts);
    let value = report.require_value()?;
    let p_guess = value.clamp(f64::MIN_POSITIVE, 1.0);

    let decomposition: Vec<Assemblage> = (0..guesses.len())
        .map(|g| Assemblage::from_fn(m, d, |outcome, x| report.matrix(at(g, outcome, x)).clone()))
        .collect::<Result<_>>()?;
    let mut residuals = Residuals { min_eigenvalue: f64::INFINITY, ..Residuals::default() };
    for x in 1..=m {
        for outcome in 0..d {
            let sum = decomposition.iter().fold(ComplexMatrix::zeros(n, n), |acc, s| acc + s.sigma(outcome, x));
            residuals.reconstruction = residuals.reconstruction.max(qmath::max_abs(&(sum - a.sigma(outcome, x))));
        }
    }
    for piece in &decomposition {
        residuals.signaling = residuals.signaling.max(piece.signaling_defect());
        for s in piece.sigmas() {
            residuals.min_eigenvalue = residuals.min_eigenvalue.min(qmath::min_eigenvalue(s));
        }
    }
    Ok(RandomnessResult {
        p_guess,
        h_min: min_entropy(p_guess)?,
        status: report.status,
        guesses,
        decomposition,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{pauli_projectors, MeasurementSet, PauliAxis};
    use crate::random;
    use crate::scenario::assemblage_from_state;
    use rand::{rngs::StdRng, SeedableRng};

    fn paulis(axes: &str) -> MeasurementSet {
        MeasurementSet::new(axes.chars().map(|c| pauli_projectors(PauliAxis::from_char(c).unwrap())).collect()).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(min_entropy(1.0).unwrap(), 0.0);
        assert!((min_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((min_entropy(0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!(min_entropy(0.0).is_err());
        assert!(min_entropy(1.5).is_err());
    }

    #[test]
    fn lhs_assemblage_gives_no_randomness() {
        let mut rng = StdRng::seed_from_u64(11);
        let w = random::simplex(8, &mut rng);
        let states: Vec<_> = w.iter().map(|&p| random::density_matrix(2, 2, &mut rng).into_matrix().scale(p)).collect();
        let a = Assemblage::from_hidden_states(3, 2, &states).unwrap();
        for x in 1..=3 {
            let r = p_guess_steering(&a, x, SolveOptions::default()).unwrap();
            assert!((r.p_guess - 1.0).abs() < 1e-6, "x={x}: {}", r.p_guess);
            assert!(r.residuals.reconstruction < 1e-7);
        }
    }

    #[test]
    fn phi_plus_xz_is_random() {
        let a = assemblage_from_state(&qmath::phi_plus(), &paulis("XZ")).unwrap();
        let r = p_guess_steering(&a, 1, SolveOptions::default()).unwrap();
        assert!(r.p_guess > 0.5 - 1e-6 && r.p_guess < 1.0 - 1e-3, "{}", r.p_guess);
        assert!((r.h_min + r.p_guess.log2()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights_and_caps() {
        let a = assemblage_from_state(&qmath::phi_plus(), &paulis("XZ")).unwrap();
        let opts = SolveOptions::default();
        assert!(p_guess_steering_set(&a, &[(1, 0.5)], opts).is_err());
        assert!(p_guess_steering_set(&a, &[(1, 1.0), (2, 0.0)], opts).is_err());
        assert!(p_guess_steering_set(&a, &[(3, 1.0)], opts).is_err());
    }

    #[test]
    fn signaling_data_is_reported() {
        let a = assemblage_from_state(&qmath::phi_plus(), &paulis("XZ")).unwrap();
        let mut sigma = a.sigmas().to_vec();
        sigma[0] = sigma[0].scale(1.5);
        let bad = Assemblage::new(2, 2, sigma).unwrap();
        assert!(matches!(p_guess_steering(&bad, 1, SolveOptions::default()), Err(Error::InfeasibleData(_))));
    }
}
