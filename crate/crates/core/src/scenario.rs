//! Assemblages, Bell behaviors, deterministic strategies and input-pair projections.
//!
//! Inputs are 1-based (`x ∈ {1,…,m}`), outcomes 0-based (`a ∈ {0,…,d-1}`).

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::RealField;

use crate::error::{check_cap, checked_pow, Error, Result};
use crate::qmath::{self, ComplexMatrix, DensityMatrix, MeasurementSet, Subsystem, Tolerances};
use crate::scalar::Real;

/// Default cap on `d^m` strategy enumerations.
pub const STRATEGY_CAP: u128 = 1_000_000;

/// Conditional states `σ_{a|x}` on Bob's side, stored by `(a, x)` lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Assemblage<T: RealField = f64> {
    m: usize,
    d: usize,
    dim_b: usize,
    sigma: Vec<ComplexMatrix<T>>,
}

impl<T: RealField> Assemblage<T> {
    /// Builds an assemblage from `d·m` matrices ordered `(a, x)` lexicographically.
    /// Only shapes are checked here; see [`Assemblage::validate`].
    pub fn new(m: usize, d: usize, sigma: Vec<ComplexMatrix<T>>) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::InvalidInput("assemblage needs m ≥ 1 and d ≥ 1".into()));
        }
        if sigma.len() != m * d {
            return Err(Error::DimensionMismatch(format!(
                "expected {} conditional states, got {}",
                m * d,
                sigma.len()
            )));
        }
        let dim_b = sigma[0].nrows();
        if sigma.iter().any(|s| s.nrows() != dim_b || s.ncols() != dim_b) {
            return Err(Error::DimensionMismatch("conditional states differ in shape".into()));
        }
        if sigma.iter().any(|s| !qmath::is_finite(s)) {
            return Err(Error::InvalidInput("conditional states must be finite".into()));
        }
        Ok(Self { m, d, dim_b, sigma })
    }

    /// Builds from a closure over `(a, x)` with 1-based `x`.
    pub fn from_fn(m: usize, d: usize, f: impl Fn(usize, usize) -> ComplexMatrix<T>) -> Result<Self> {
        let mut sigma = Vec::with_capacity(m * d);
        for a in 0..d {
            for x in 1..=m {
                sigma.push(f(a, x));
            }
        }
        Self::new(m, d, sigma)
    }

    pub fn inputs(&self) -> usize {
        self.m
    }

    pub fn outcomes(&self) -> usize {
        self.d
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    /// `σ_{a|x}`, `x` 1-based.
    pub fn sigma(&self, a: usize, x: usize) -> &ComplexMatrix<T> {
        &self.sigma[a * self.m + (x - 1)]
    }

    pub fn sigmas(&self) -> &[ComplexMatrix<T>] {
        &self.sigma
    }

    /// `Σ_a σ_{a|x}`.
    pub fn reduced(&self, x: usize) -> ComplexMatrix<T> {
        (0..self.d).fold(ComplexMatrix::zeros(self.dim_b, self.dim_b), |acc, a| acc + self.sigma(a, x))
    }

    /// `Tr σ_{a|x}`.
    pub fn outcome_probability(&self, a: usize, x: usize) -> f64 {
        qmath::trace_re(self.sigma(a, x))
    }

    /// Largest deviation of `Σ_a σ_{a|x}` from `Σ_a σ_{a|1}` over `x`.
    pub fn signaling_defect(&self) -> f64 {
        let base = self.reduced(1);
        (2..=self.m).map(|x| qmath::max_abs(&(self.reduced(x) - &base))).fold(0.0, f64::max)
    }

    pub fn validate(&self, tol: Tolerances) -> Result<()> {
        for x in 1..=self.m {
            for a in 0..self.d {
                let s = self.sigma(a, x);
                let herm = qmath::hermiticity_defect(s);
                if herm > tol.herm {
                    return Err(Error::InvalidInput(format!("σ_{{{a}|{x}}} not Hermitian ({herm:.3e})")));
                }
                let lo = qmath::min_eigenvalue(s);
                if lo < -tol.psd {
                    return Err(Error::InvalidInput(format!("σ_{{{a}|{x}}} not PSD ({lo:.3e})")));
                }
            }
        }
        let ns = self.signaling_defect();
        if ns > tol.id {
            return Err(Error::InvalidInput(format!("assemblage is signaling (defect {ns:.3e})")));
        }
        let tr = qmath::trace_re(&self.reduced(1));
        if (tr - 1.0).abs() > tol.tr {
            return Err(Error::InvalidInput(format!("assemblage trace {tr} != 1")));
        }
        Ok(())
    }

    /// Sub-assemblage on the given 1-based inputs, relabelled `1..=inputs.len()` in order.
    pub fn restrict(&self, inputs: &[usize]) -> Result<Self> {
        if let Some(&x) = inputs.iter().find(|&&x| x == 0 || x > self.m) {
            return Err(Error::InvalidInput(format!("input {x} out of range 1..={}", self.m)));
        }
        Self::from_fn(inputs.len(), self.d, |a, k| self.sigma(a, inputs[k - 1]).clone())
    }

    /// `λ·self + (1-λ)·other`.
    pub fn mix(&self, lambda: f64, other: &Self) -> Result<Self> {
        if (self.m, self.d, self.dim_b) != (other.m, other.d, other.dim_b) {
            return Err(Error::DimensionMismatch("mixed assemblages differ in shape".into()));
        }
        let l: T = qmath::real(lambda);
        let r: T = qmath::real(1.0 - lambda);
        let sigma = self
            .sigma
            .iter()
            .zip(&other.sigma)
            .map(|(s, o)| s.scale(l.clone()) + o.scale(r.clone()))
            .collect();
        Self::new(self.m, self.d, sigma)
    }

    /// LHS assemblage `σ_{a|x} = Σ_μ δ_{a,μ(x)} σ_μ` from hidden states indexed by strategy.
    pub fn from_hidden_states(m: usize, d: usize, states: &[ComplexMatrix<T>]) -> Result<Self> {
        let strategies = enumerate_strategies(m, d, STRATEGY_CAP)?;
        if states.len() != strategies.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} hidden states, got {}",
                strategies.len(),
                states.len()
            )));
        }
        let n = states.first().map_or(0, |s| s.nrows());
        Self::from_fn(m, d, |a, x| {
            strategies
                .iter()
                .zip(states)
                .filter(|(mu, _)| mu.outcome(x) == a)
                .fold(ComplexMatrix::zeros(n, n), |acc, (_, s)| acc + s)
        })
    }
}

/// `σ_{a|x} = Tr_A[(M_{a|x} ⊗ I) ρ]`.
pub fn assemblage_from_state<T: RealField>(
    rho: &DensityMatrix<T>,
    meas: &MeasurementSet<T>,
) -> Result<Assemblage<T>> {
    let da = meas.dim();
    if rho.dim() % da != 0 {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} is not a multiple of the measurement dimension {da}",
            rho.dim()
        )));
    }
    let db = rho.dim() / da;
    let id_b = qmath::identity::<T>(db);
    let mut sigma = Vec::with_capacity(meas.inputs() * meas.outcomes());
    for a in 0..meas.outcomes() {
        for x in 1..=meas.inputs() {
            let op = qmath::kron(meas.povm(x).effect(a), &id_b);
            let s = qmath::partial_trace(&(op * rho.matrix()), (da, db), Subsystem::B)?;
            sigma.push(qmath::hermitian_part(&s));
        }
    }
    Assemblage::new(meas.inputs(), meas.outcomes(), sigma)
}

/// A deterministic response function `μ: {1,…,m} → [d]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeterministicStrategy {
    assignment: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn new(assignment: Vec<usize>) -> Self {
        Self { assignment }
    }

    /// `μ(x)` for 1-based `x`.
    pub fn outcome(&self, x: usize) -> usize {
        self.assignment[x - 1]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn inputs(&self) -> usize {
        self.assignment.len()
    }

    /// Position in the lexicographic enumeration (input 1 most significant).
    pub fn index(&self, d: usize) -> usize {
        self.assignment.iter().fold(0, |acc, &a| acc * d + a)
    }

    pub fn from_index(mut index: usize, m: usize, d: usize) -> Self {
        let mut assignment = vec![0; m];
        for slot in assignment.iter_mut().rev() {
            *slot = index % d;
            index /= d;
        }
        Self { assignment }
    }
}

/// All `d^m` strategies in lexicographic order.
pub fn enumerate_strategies(m: usize, d: usize, cap: u128) -> Result<Vec<DeterministicStrategy>> {
    let count = checked_pow(d, m);
    check_cap(count, cap)?;
    Ok((0..count as usize).map(|i| DeterministicStrategy::from_index(i, m, d)).collect())
}

/// Joint distribution `p(ab|xy)`, stored densely in `(x, y, a, b)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior<T: Real = f64> {
    m_a: usize,
    m_b: usize,
    d_a: usize,
    d_b: usize,
    p: Vec<T>,
}

impl<T: Real> Behavior<T> {
    /// Wraps a dense tensor in `(x, y, a, b)` order. Only shape and sign are checked.
    pub fn new(m_a: usize, m_b: usize, d_a: usize, d_b: usize, p: Vec<T>) -> Result<Self> {
        if m_a == 0 || m_b == 0 || d_a == 0 || d_b == 0 {
            return Err(Error::InvalidInput("behavior dimensions must be positive".into()));
        }
        if p.len() != m_a * m_b * d_a * d_b {
            return Err(Error::DimensionMismatch(format!(
                "expected {} probabilities, got {}",
                m_a * m_b * d_a * d_b,
                p.len()
            )));
        }
        if let Some(v) = p.iter().find(|v| **v < -T::zero_clamp() || !v.to_f64_lossy().is_finite()) {
            return Err(Error::InvalidInput(format!("probability {v} is negative or not finite")));
        }
        Ok(Self { m_a, m_b, d_a, d_b, p })
    }

    /// Builds from a closure `f(a, b, x, y)` with 1-based inputs.
    pub fn from_fn(
        m_a: usize,
        m_b: usize,
        d_a: usize,
        d_b: usize,
        f: impl Fn(usize, usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut p = Vec::with_capacity(m_a * m_b * d_a * d_b);
        for x in 1..=m_a {
            for y in 1..=m_b {
                for a in 0..d_a {
                    for b in 0..d_b {
                        p.push(f(a, b, x, y));
                    }
                }
            }
        }
        Self::new(m_a, m_b, d_a, d_b, p)
    }

    /// Product of deterministic local strategies for Alice and Bob.
    pub fn deterministic(alice: &DeterministicStrategy, bob: &DeterministicStrategy, d_a: usize, d_b: usize) -> Result<Self> {
        Self::from_fn(alice.inputs(), bob.inputs(), d_a, d_b, |a, b, x, y| {
            if alice.outcome(x) == a && bob.outcome(y) == b {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Uniform distribution `1/(dA·dB)` on every input pair.
    pub fn uniform(m_a: usize, m_b: usize, d_a: usize, d_b: usize) -> Result<Self> {
        let v = T::one() / T::from_count(d_a * d_b);
        Self::from_fn(m_a, m_b, d_a, d_b, |_, _, _, _| v.clone())
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.m_a, self.m_b, self.d_a, self.d_b)
    }

    pub fn inputs_a(&self) -> usize {
        self.m_a
    }

    pub fn inputs_b(&self) -> usize {
        self.m_b
    }

    pub fn outcomes_a(&self) -> usize {
        self.d_a
    }

    pub fn outcomes_b(&self) -> usize {
        self.d_b
    }

    fn offset(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        (((x - 1) * self.m_b + (y - 1)) * self.d_a + a) * self.d_b + b
    }

    /// `p(ab|xy)` with 1-based inputs.
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> &T {
        &self.p[self.offset(a, b, x, y)]
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, value: T) {
        let k = self.offset(a, b, x, y);
        self.p[k] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    /// `p_A(a|x)` computed on Bob's input `y`.
    pub fn marginal_a(&self, a: usize, x: usize, y: usize) -> T {
        (0..self.d_b).fold(T::zero(), |acc, b| acc + self.prob(a, b, x, y).clone())
    }

    /// `p_B(b|y)` computed on Alice's input `x`.
    pub fn marginal_b(&self, b: usize, y: usize, x: usize) -> T {
        (0..self.d_a).fold(T::zero(), |acc, a| acc + self.prob(a, b, x, y).clone())
    }

    /// Largest `|Σ_{ab} p(ab|xy) - 1|`.
    pub fn normalization_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in 1..=self.m_a {
            for y in 1..=self.m_b {
                let s = (0..self.d_a).fold(T::zero(), |acc, a| acc + self.marginal_a(a, x, y));
                worst = worst.max((s - T::one()).abs().to_f64_lossy());
            }
        }
        worst
    }

    /// Largest deviation of either party's marginals across the other's inputs.
    pub fn signaling_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in 1..=self.m_a {
            for a in 0..self.d_a {
                let base = self.marginal_a(a, x, 1);
                for y in 2..=self.m_b {
                    worst = worst.max((self.marginal_a(a, x, y) - base.clone()).abs().to_f64_lossy());
                }
            }
        }
        for y in 1..=self.m_b {
            for b in 0..self.d_b {
                let base = self.marginal_b(b, y, 1);
                for x in 2..=self.m_a {
                    worst = worst.max((self.marginal_b(b, y, x) - base.clone()).abs().to_f64_lossy());
                }
            }
        }
        worst
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.normalization_defect();
        if n > tol {
            return Err(Error::InvalidInput(format!("behavior not normalized (defect {n:.3e})")));
        }
        Ok(())
    }

    pub fn validate_no_signaling(&self, tol: f64) -> Result<()> {
        self.validate(tol)?;
        let s = self.signaling_defect();
        if s > tol {
            return Err(Error::InvalidInput(format!("behavior is signaling (defect {s:.3e})")));
        }
        Ok(())
    }

    /// Convex combination `Σ_k w_k B_k` of equally shaped behaviors.
    pub fn mixture(parts: &[(T, &Self)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::InvalidInput("empty mixture".into()));
        };
        let shape = first.shape();
        if parts.iter().any(|(_, b)| b.shape() != shape) {
            return Err(Error::DimensionMismatch("mixed behaviors differ in shape".into()));
        }
        let mut p = vec![T::zero(); first.p.len()];
        for (w, b) in parts {
            for (acc, v) in p.iter_mut().zip(&b.p) {
                *acc = acc.clone() + w.clone() * v.clone();
            }
        }
        Self::new(shape.0, shape.1, shape.2, shape.3, p)
    }

    /// Entrywise conversion to another scalar type.
    pub fn map<U: Real>(&self, f: impl Fn(&T) -> U) -> Behavior<U> {
        Behavior { m_a: self.m_a, m_b: self.m_b, d_a: self.d_a, d_b: self.d_b, p: self.p.iter().map(f).collect() }
    }

    pub fn to_f64(&self) -> Behavior<f64> {
        self.map(|v| v.to_f64_lossy())
    }
}

/// `p(ab|xy) = Tr[(M_{a|x} ⊗ M_{b|y}) ρ]`.
pub fn behavior_from_state<T: RealField>(
    rho: &DensityMatrix<T>,
    meas_a: &MeasurementSet<T>,
    meas_b: &MeasurementSet<T>,
) -> Result<Behavior<f64>> {
    if meas_a.dim() * meas_b.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} != {}·{}",
            rho.dim(),
            meas_a.dim(),
            meas_b.dim()
        )));
    }
    Behavior::from_fn(meas_a.inputs(), meas_b.inputs(), meas_a.outcomes(), meas_b.outcomes(), |a, b, x, y| {
        let op = qmath::kron(meas_a.povm(x).effect(a), meas_b.povm(y).effect(b));
        qmath::trace_product_re(&op, rho.matrix()).max(0.0)
    })
}

/// A set of `(x, y)` input pairs (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InputPairSet {
    pairs: BTreeSet<(usize, usize)>,
}

impl InputPairSet {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self { pairs: pairs.into_iter().collect() }
    }

    pub fn full(m_a: usize, m_b: usize) -> Self {
        Self::new((1..=m_a).flat_map(|x| (1..=m_b).map(move |y| (x, y))))
    }

    /// The chain pairs `{(A_y, B_y), (A_{y+1}, B_y)}` with `A_{m+1} ≡ A_1`.
    pub fn chain(m: usize) -> Self {
        Self::new((1..=m).flat_map(|y| [(y, y), (y % m + 1, y)]))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pairs.contains(&(x, y))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.pairs.iter()
    }
}

/// Entries of `b` on the selected input pairs, keyed by `(a, b, x, y)`.
pub fn project_behavior<T: Real>(b: &Behavior<T>, s: &InputPairSet) -> Result<BTreeMap<(usize, usize, usize, usize), T>> {
    let mut out = BTreeMap::new();
    for &(x, y) in s.iter() {
        if x == 0 || y == 0 || x > b.m_a || y > b.m_b {
            return Err(Error::InvalidInput(format!("input pair ({x}, {y}) out of range")));
        }
        for a in 0..b.d_a {
            for bb in 0..b.d_b {
                out.insert((a, bb, x, y), b.prob(a, bb, x, y).clone());
            }
        }
    }
    Ok(out)
}
