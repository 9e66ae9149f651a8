//! Chain Bell inequalities and the decomposition of partially deterministic behaviors.
//!
//! The chain functional is
//! `I = Σ_k α_k Σ_i [p(A_i - B_i = k) + p(B_i - A_{i+1} = k)]` with arithmetic
//! mod `d` and the twist `A_{m+1} ≡ A_1 + 1`. A deterministic assignment fixes
//! offsets `q_1,…,q_{2m}` with `Σ q_i ≡ -1`, which gives the classical bound.
//!
//! Everything here is generic over [`Real`], so bounds and decompositions can
//! be computed exactly over rationals.

use std::collections::BTreeMap;

use crate::error::{check_cap, checked_pow, Error, Result};
use crate::scalar::Real;
use crate::scenario::{enumerate_strategies, project_behavior, Behavior, DeterministicStrategy, InputPairSet};

/// Default cap on brute-force enumerations `d^{2m}`.
pub const BRUTE_FORCE_CAP: u128 = 10_000_000;

/// Tolerance for the determinism and no-signaling preconditions of the decomposition.
pub const PRECONDITION_TOL: f64 = 1e-10;

fn modd(v: i64, d: usize) -> usize {
    v.rem_euclid(d as i64) as usize
}

fn digits(mut index: usize, len: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

fn undigits(v: &[usize], d: usize) -> usize {
    v.iter().fold(0, |acc, &x| acc * d + x)
}

/// Coefficients `α_0,…,α_{d-1}` of a chain inequality with `m` inputs per party.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainInequality<T: Real = f64> {
    d: usize,
    m: usize,
    alpha: Vec<T>,
}

impl<T: Real> ChainInequality<T> {
    pub fn new(d: usize, m: usize, alpha: Vec<T>) -> Result<Self> {
        if d < 2 || m < 2 {
            return Err(Error::InvalidInput(format!("chain inequality needs d ≥ 2 and m ≥ 2, got d={d}, m={m}")));
        }
        if alpha.len() != d {
            return Err(Error::DimensionMismatch(format!("alpha has {} entries, expected {d}", alpha.len())));
        }
        if alpha.iter().any(|a| !a.to_f64_lossy().is_finite()) {
            return Err(Error::InvalidInput("alpha must be finite".into()));
        }
        Ok(Self { d, m, alpha })
    }

    pub fn outcomes(&self) -> usize {
        self.d
    }

    pub fn inputs(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    /// `Σ_i α_{q_i}` for a full offset vector.
    pub fn offset_value(&self, q: &[usize]) -> T {
        q.iter().fold(T::zero(), |acc, &k| acc + self.alpha[k % self.d].clone())
    }
}

/// Offsets `q_1,…,q_{2m}` of a chain term pattern, entries in `[d]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainOffsetVector {
    d: usize,
    q: Vec<usize>,
}

impl ChainOffsetVector {
    fn check(d: usize, q: &[usize]) -> Result<()> {
        if let Some(v) = q.iter().find(|&&v| v >= d) {
            return Err(Error::InvalidInput(format!("offset {v} not in [0, {d})")));
        }
        Ok(())
    }

    /// Full-length offsets satisfying `Σ q_i ≡ -1 (mod d)`.
    pub fn constrained(d: usize, q: Vec<usize>) -> Result<Self> {
        Self::check(d, &q)?;
        if q.len() % 2 != 0 || q.is_empty() {
            return Err(Error::InvalidInput("offset vector needs even length 2m".into()));
        }
        let s: usize = q.iter().sum();
        if (s + 1) % d != 0 {
            return Err(Error::InvalidInput(format!("offsets sum to {s}, not -1 mod {d}")));
        }
        Ok(Self { d, q })
    }

    /// `2m - 1` free offsets; `q_{2m}` is derived so that the sum is `-1`.
    pub fn free(d: usize, q: Vec<usize>) -> Result<Self> {
        Self::check(d, &q)?;
        if q.len() % 2 != 1 {
            return Err(Error::InvalidInput("free offset vector needs odd length 2m - 1".into()));
        }
        let s: usize = q.iter().sum();
        let mut q = q;
        q.push(modd(-(s as i64) - 1, d));
        Ok(Self { d, q })
    }

    /// Arbitrary full-length offsets, no sum constraint.
    pub fn unconstrained(d: usize, q: Vec<usize>) -> Result<Self> {
        Self::check(d, &q)?;
        if q.len() % 2 != 0 || q.is_empty() {
            return Err(Error::InvalidInput("offset vector needs even length 2m".into()));
        }
        Ok(Self { d, q })
    }

    pub fn zero(d: usize, m: usize) -> Self {
        Self { d, q: vec![0; 2 * m] }
    }

    pub fn values(&self) -> &[usize] {
        &self.q
    }

    pub fn inputs(&self) -> usize {
        self.q.len() / 2
    }

    pub fn is_constrained(&self) -> bool {
        (self.q.iter().sum::<usize>() + 1) % self.d == 0
    }
}

fn check_dims<T: Real>(b: &Behavior<T>, ineq: &ChainInequality<T>) -> Result<()> {
    let (ma, mb, da, db) = b.shape();
    if ma != ineq.m || mb != ineq.m || da != ineq.d || db != ineq.d {
        return Err(Error::DimensionMismatch(format!(
            "behavior ({ma},{mb},{da},{db}) does not match chain inequality (m={}, d={})",
            ineq.m, ineq.d
        )));
    }
    Ok(())
}

/// `p(A_x - B_y = k)` with arithmetic mod d.
fn diff_prob<T: Real>(b: &Behavior<T>, x: usize, y: usize, k: usize, d: usize) -> T {
    (0..d).fold(T::zero(), |acc, j| acc + b.prob((j + k) % d, j, x, y).clone())
}

/// The value `I_{d,m}` of `b`.
pub fn chain_value<T: Real>(b: &Behavior<T>, ineq: &ChainInequality<T>) -> Result<T> {
    check_dims(b, ineq)?;
    let (d, m) = (ineq.d, ineq.m);
    let mut total = T::zero();
    for i in 1..=m {
        for k in 0..d {
            let a_k = ineq.alpha[k].clone();
            let first = diff_prob(b, i, i, k, d);
            // B_i - A_{i+1} = k, with A_{m+1} = A_1 + 1
            let second = if i < m {
                (0..d).fold(T::zero(), |acc, j| acc + b.prob(j, (j + k) % d, i + 1, i).clone())
            } else {
                (0..d).fold(T::zero(), |acc, j| acc + b.prob(j, (j + 1 + k) % d, 1, m).clone())
            };
            total = total + a_k * (first + second);
        }
    }
    Ok(total)
}

/// `max Σ_i α_{q_i}` subject to `Σ q_i ≡ -1`, by dynamic programming over residues.
pub fn classical_bound_dp<T: Real>(ineq: &ChainInequality<T>) -> T {
    let (d, terms) = (ineq.d, 2 * ineq.m);
    // best[s] = max over the first j offsets with partial sum ≡ s
    let mut best: Vec<Option<T>> = vec![None; d];
    best[0] = Some(T::zero());
    for _ in 0..terms {
        let mut next: Vec<Option<T>> = vec![None; d];
        for (s, v) in best.iter().enumerate() {
            let Some(v) = v else { continue };
            for (k, a) in ineq.alpha.iter().enumerate() {
                let cand = v.clone() + a.clone();
                let slot = &mut next[(s + k) % d];
                if slot.as_ref().is_none_or(|cur| cand > *cur) {
                    *slot = Some(cand);
                }
            }
        }
        best = next;
    }
    best[d - 1].clone().expect("every residue reachable with at least one term")
}

/// Maximum of [`chain_value`] over all deterministic local behaviors.
pub fn classical_bound_bruteforce<T: Real>(ineq: &ChainInequality<T>, cap: u128) -> Result<T> {
    let (d, m) = (ineq.d, ineq.m);
    check_cap(checked_pow(d, 2 * m), cap)?;
    let strategies = enumerate_strategies(m, d, cap)?;
    let mut best: Option<T> = None;
    for alice in &strategies {
        for bob in &strategies {
            let b = Behavior::<T>::deterministic(alice, bob, d, d)?;
            let v = chain_value(&b, ineq)?;
            if best.as_ref().is_none_or(|cur| v > *cur) {
                best = Some(v);
            }
        }
    }
    Ok(best.expect("at least one strategy"))
}

/// No-signaling box whose chain terms have the prescribed constant offsets and uniform marginals.
pub fn ns_box<T: Real>(d: usize, shift: &ChainOffsetVector) -> Result<Behavior<T>> {
    let m = shift.inputs();
    if m < 2 || shift.d != d {
        return Err(Error::InvalidInput("ns_box needs m ≥ 2 and matching d".into()));
    }
    let q = &shift.q;
    let one_over_d = T::one() / T::from_count(d);
    let uniform = T::one() / T::from_count(d * d);
    Behavior::from_fn(m, m, d, d, |a, b, x, y| {
        let hit = if x == y {
            Some(modd(a as i64 - b as i64, d) == q[2 * y - 2])
        } else if y < m && x == y + 1 {
            Some(modd(b as i64 - a as i64, d) == q[2 * y - 1])
        } else if y == m && x == 1 {
            Some(modd(b as i64 - a as i64 - 1, d) == q[2 * m - 1])
        } else {
            None
        };
        match hit {
            Some(true) => one_over_d.clone(),
            Some(false) => T::zero(),
            None => uniform.clone(),
        }
    })
}

/// Replaces the rows for `x*` by `p(ab|x*y) = δ_{a,e} p_B(b|y)`.
pub fn partially_deterministic_box<T: Real>(base: &Behavior<T>, x_star: usize, e: usize) -> Result<Behavior<T>> {
    let (ma, mb, da, db) = base.shape();
    if x_star == 0 || x_star > ma || e >= da {
        return Err(Error::InvalidInput(format!("x* = {x_star} or e = {e} out of range")));
    }
    // Bob's marginal read off an input other than x* when possible
    let ref_x = if ma > 1 { if x_star == 1 { 2 } else { 1 } } else { x_star };
    Behavior::from_fn(ma, mb, da, db, |a, b, x, y| {
        if x == x_star {
            if a == e {
                base.marginal_b(b, y, ref_x)
            } else {
                T::zero()
            }
        } else {
            base.prob(a, b, x, y).clone()
        }
    })
}

/// Outcome of [`verify_no_chain_violation`].
#[derive(Debug, Clone, PartialEq)]
pub enum ChainCheck<T: Real = f64> {
    Ok { margin: T },
    Violated { excess: T },
}

impl<T: Real> ChainCheck<T> {
    pub fn is_ok(&self) -> bool {
        matches!(self, Self::Ok { .. })
    }

    /// `I^C - value`.
    pub fn margin(&self) -> T {
        match self {
            Self::Ok { margin } => margin.clone(),
            Self::Violated { excess } => -excess.clone(),
        }
    }
}

/// Compares the chain value of `b` with the classical bound.
pub fn verify_no_chain_violation<T: Real>(b: &Behavior<T>, ineq: &ChainInequality<T>) -> Result<ChainCheck<T>> {
    let margin = classical_bound_dp(ineq) - chain_value(b, ineq)?;
    if margin >= -T::zero_clamp() {
        Ok(ChainCheck::Ok { margin })
    } else {
        Ok(ChainCheck::Violated { excess: -margin })
    }
}

/// Path factorization of a no-signaling behavior restricted to Alice inputs `2..=m`,
/// read along the chain `B_1 → A_2 → B_2 → … → A_m → B_m`.
///
/// `l = (q_2,…,q_{2m-1})` is stored 0-based: `l[j] = q_{j+2}`.
#[derive(Debug, Clone)]
pub struct PathFactorization<'a, T: Real> {
    kappa: &'a Behavior<T>,
    d: usize,
    m: usize,
}

impl<'a, T: Real> PathFactorization<'a, T> {
    pub fn new(kappa: &'a Behavior<T>) -> Result<Self> {
        let (ma, mb, da, db) = kappa.shape();
        if ma != mb || da != db || ma < 2 {
            return Err(Error::DimensionMismatch("path factorization needs a square chain scenario, m ≥ 2".into()));
        }
        Ok(Self { kappa, d: da, m: ma })
    }

    fn q(l: &[usize], i: usize) -> usize {
        l[i - 2]
    }

    /// `κ_B(b|k-1)` read from the pair `(k, k-1)`.
    pub fn marginal_b(&self, b: usize, k: usize) -> T {
        self.kappa.marginal_b(b % self.d, k - 1, k).clamped()
    }

    /// `κ_A(a|k)` read from the pair `(k, k)`.
    pub fn marginal_a(&self, a: usize, k: usize) -> T {
        self.kappa.marginal_a(a % self.d, k, k).clamped()
    }

    /// `c_k = Σ_{i=3}^{2k-2} q_i`, with `c_2 = 0`.
    pub fn offset(&self, k: usize, l: &[usize]) -> usize {
        (3..=2 * k - 2).map(|i| Self::q(l, i)).sum::<usize>() % self.d
    }

    /// `g^k_l(t)`, zero when a denominator marginal vanishes.
    pub fn link_factor(&self, k: usize, l: &[usize], t: usize) -> T {
        let d = self.d;
        let t = t % d;
        let up = Self::q(l, 2 * k - 2);
        let down = Self::q(l, 2 * k - 1);
        let den_b = self.marginal_b(t + up, k);
        let den_a = self.marginal_a(t, k);
        if den_b.is_zero() || den_a.is_zero() {
            return T::zero();
        }
        let num1 = self.kappa.prob(t, (t + up) % d, k, k - 1).clone().clamped();
        let num2 = self.kappa.prob(t, modd(t as i64 - down as i64, d), k, k).clone().clamped();
        num1 * num2 / (den_b * den_a)
    }

    /// `𝓕^i_l(t) = κ_B(t + q_2|1) Π_{k=2}^{i} g^k_l(t - c_k)`; only `q_2,…,q_{2i-1}` are read.
    pub fn path_weight(&self, i: usize, l: &[usize], t: usize) -> T {
        let d = self.d;
        let t = t % d;
        let mut w = self.marginal_b(t + Self::q(l, 2), 2);
        for k in 2..=i {
            if w.is_zero() {
                return w;
            }
            let shifted = modd(t as i64 - self.offset(k, l) as i64, d);
            w = w * self.link_factor(k, l, shifted);
        }
        w
    }

    pub fn outcomes(&self) -> usize {
        self.d
    }

    pub fn inputs(&self) -> usize {
        self.m
    }
}

/// Mixture weights `f(l)` and `p(q)` of a decomposition, stored densely in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionWeights<T: Real = f64> {
    pub d: usize,
    pub m: usize,
    /// `f[l]` for `l ∈ [d]^{2m-2}` in the relabelled frame where `x* = 1`.
    pub f: Vec<T>,
    /// `pq[q]` for `q = (q_1,…,q_{2m-1}) ∈ [d]^{2m-1}` in the original input labels.
    pub pq: Vec<T>,
}

impl<T: Real> DecompositionWeights<T> {
    pub fn f_of(&self, l: &[usize]) -> &T {
        &self.f[undigits(l, self.d)]
    }

    pub fn p_of(&self, q: &[usize]) -> &T {
        &self.pq[undigits(q, self.d)]
    }

    /// `(q, p(q))` for every `q` with nonzero weight.
    pub fn support(&self) -> Vec<(Vec<usize>, T)> {
        self.pq
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(|(i, w)| (digits(i, 2 * self.m - 1, self.d), w.clone()))
            .collect()
    }
}

/// Full offsets `(q_1,…,q_{2m})` from the free part.
pub fn complete_offsets(q: &[usize], d: usize) -> Vec<usize> {
    let s: usize = q.iter().sum();
    let mut full = q.to_vec();
    full.push(modd(-(s as i64) - 1, d));
    full
}

/// Result of [`decompose_partially_deterministic`].
#[derive(Debug, Clone)]
pub struct Decomposition<T: Real = f64> {
    pub x_star: usize,
    pub e: usize,
    pub weights: DecompositionWeights<T>,
    /// Largest `|Σ_q p(q) P_q - p|` over the chain input pairs.
    pub reconstruction_residual: f64,
    /// Whether every component puts weight only on entries matching its offsets.
    pub support_consistent: bool,
    rotated_q: Vec<Vec<usize>>,
    path: Vec<T>,
    rotation: usize,
}

impl<T: Real> Decomposition<T> {
    fn d(&self) -> usize {
        self.weights.d
    }

    fn m(&self) -> usize {
        self.weights.m
    }

    fn rotate_input(&self, x: usize) -> usize {
        (x - 1 + self.m() - self.rotation) % self.m() + 1
    }

    /// Entry `P_q(ab|xy)` of the component for free offsets `q` (original labels) on a chain pair.
    pub fn component_entry(&self, q: &[usize], a: usize, b: usize, x: usize, y: usize) -> T {
        let (d, m) = (self.d(), self.m());
        let qr = &self.rotated_q[undigits(q, d)];
        let (xr, yr) = (self.rotate_input(x), self.rotate_input(y));
        let e = self.e;
        let indicator = |c: bool| if c { T::one() } else { T::zero() };
        if xr == 1 && yr == 1 {
            return indicator(a == e && b == modd(e as i64 - qr[0] as i64, d));
        }
        if xr == 1 && yr == m {
            let norm: usize = qr[..2 * m - 1].iter().sum();
            return indicator(a == e && b == modd(e as i64 - norm as i64, d));
        }
        let l = &qr[1..2 * m - 1];
        let li = undigits(l, d);
        let f = self.weights.f[li].clone();
        let i = xr;
        let matches = if yr == xr {
            modd(a as i64 - b as i64, d) == l[2 * i - 3]
        } else if yr + 1 == xr {
            modd(b as i64 - a as i64, d) == l[2 * i - 4]
        } else {
            return T::zero();
        };
        if !matches {
            return T::zero();
        }
        if f.is_zero() {
            return T::one() / T::from_count(d);
        }
        let c_i = (3..=2 * i - 2).map(|j| l[j - 2]).sum::<usize>();
        self.path[li * d + (a + c_i) % d].clone() / f
    }

    /// `Σ_q p(q)·Σ_i α_{q_i}`, which equals the chain value of the decomposed behavior.
    pub fn mixture_value(&self, ineq: &ChainInequality<T>) -> T {
        self.weights
            .support()
            .into_iter()
            .fold(T::zero(), |acc, (q, w)| acc + w * ineq.offset_value(&complete_offsets(&q, self.d())))
    }
}

fn rotate_behavior<T: Real>(b: &Behavior<T>, r: usize) -> Result<Behavior<T>> {
    let (m, _, d, _) = b.shape();
    let back = |x: usize| (x - 1 + r) % m + 1;
    Behavior::from_fn(m, m, d, d, |a, bb, x, y| b.prob(a, bb, back(x), back(y)).clone())
}

/// Decomposes a behavior with deterministic `A_{x*}` into components of constant chain offsets.
pub fn decompose_partially_deterministic<T: Real>(b: &Behavior<T>, x_star: usize) -> Result<Decomposition<T>> {
    let (m, mb, d, db) = b.shape();
    if m != mb || d != db || m < 2 {
        return Err(Error::DimensionMismatch("decomposition needs a square chain scenario with m ≥ 2".into()));
    }
    if x_star == 0 || x_star > m {
        return Err(Error::InvalidInput(format!("x* = {x_star} out of range 1..={m}")));
    }
    check_cap(checked_pow(d, 2 * m - 1), BRUTE_FORCE_CAP)?;
    let signaling = b.signaling_defect();
    if signaling > PRECONDITION_TOL || b.normalization_defect() > PRECONDITION_TOL {
        return Err(Error::Precondition(format!("behavior is not a normalized no-signaling box (defect {signaling:.3e})")));
    }
    let e = (0..d)
        .max_by(|&i, &j| {
            b.marginal_a(i, x_star, 1).partial_cmp(&b.marginal_a(j, x_star, 1)).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("d ≥ 1");
    let det = (b.marginal_a(e, x_star, 1) - T::one()).abs().to_f64_lossy();
    if det > PRECONDITION_TOL {
        return Err(Error::Precondition(format!("outcome of A_{x_star} is not deterministic (p_A(e) deviates by {det:.3e})")));
    }

    let rotation = x_star - 1;
    let rotated = rotate_behavior(b, rotation)?;
    let pf = PathFactorization::new(&rotated)?;
    let nl = d.pow((2 * m - 2) as u32);
    let mut path = Vec::with_capacity(nl * d);
    let mut f = Vec::with_capacity(nl);
    for li in 0..nl {
        let l = digits(li, 2 * m - 2, d);
        let mut total = T::zero();
        for t in 0..d {
            let w = pf.path_weight(m, &l, t);
            total = total + w.clone();
            path.push(w);
        }
        f.push(total);
    }

    let nq = d.pow((2 * m - 1) as u32);
    let mut pq = vec![T::zero(); nq];
    let mut rotated_q = vec![Vec::new(); nq];
    for qi in 0..nq {
        let q_rot = digits(qi, 2 * m - 1, d);
        let li = qi % nl;
        let (q1, q2) = (q_rot[0], q_rot[1]);
        let weight = if f[li].is_zero() {
            T::zero()
        } else {
            // p(q_1|l) f(l) = 𝓕^m_l(e - q_1 - q_2)
            path[li * d + modd(e as i64 - q1 as i64 - q2 as i64, d)].clone()
        };
        let mut full = complete_offsets(&q_rot, d);
        let mut orig = vec![0; 2 * m];
        for (j, v) in full.iter().enumerate() {
            orig[(j + 2 * rotation) % (2 * m)] = *v;
        }
        if rotation > 0 {
            orig[2 * rotation - 1] = (orig[2 * rotation - 1] + 1) % d;
            orig[2 * m - 1] = modd(orig[2 * m - 1] as i64 - 1, d);
        }
        full.truncate(2 * m - 1);
        let key = undigits(&orig[..2 * m - 1], d);
        pq[key] = weight;
        rotated_q[key] = full;
    }

    let mut dec = Decomposition {
        x_star,
        e,
        weights: DecompositionWeights { d, m, f, pq },
        reconstruction_residual: 0.0,
        support_consistent: true,
        rotated_q,
        path,
        rotation,
    };

    let entries = project_behavior(b, &InputPairSet::chain(m))?;
    let support = dec.weights.support();
    let mut worst = 0.0f64;
    for (&(a, bb, x, y), target) in &entries {
        let mut acc = T::zero();
        for (q, w) in &support {
            acc = acc + w.clone() * dec.component_entry(q, a, bb, x, y);
        }
        worst = worst.max((acc - target.clone()).abs().to_f64_lossy());
    }
    dec.reconstruction_residual = worst;
    dec.support_consistent = support.iter().all(|(q, _)| component_respects_offsets(&dec, q));
    Ok(dec)
}

fn component_respects_offsets<T: Real>(dec: &Decomposition<T>, q: &[usize]) -> bool {
    let (d, m) = (dec.d(), dec.m());
    let full = complete_offsets(q, d);
    for y in 1..=m {
        let x_next = y % m + 1;
        for a in 0..d {
            for b in 0..d {
                let same = dec.component_entry(q, a, b, y, y);
                if !same.is_zero() && modd(a as i64 - b as i64, d) != full[2 * y - 2] {
                    return false;
                }
                let next = dec.component_entry(q, a, b, x_next, y);
                let twist = if y == m { 1 } else { 0 };
                if !next.is_zero() && modd(b as i64 - a as i64 - twist, d) != full[2 * y - 1] {
                    return false;
                }
            }
        }
    }
    true
}

/// Deterministic behavior realizing the offsets; `A_1 = a1`.
pub fn deterministic_from_offsets<T: Real>(d: usize, offsets: &ChainOffsetVector, a1: usize) -> Result<Behavior<T>> {
    if !offsets.is_constrained() {
        return Err(Error::InvalidInput("deterministic assignments need Σ q ≡ -1".into()));
    }
    let m = offsets.inputs();
    let q = offsets.values();
    let mut alice = vec![0usize; m];
    let mut bob = vec![0usize; m];
    alice[0] = a1 % d;
    for i in 0..m {
        bob[i] = modd(alice[i] as i64 - q[2 * i] as i64, d);
        if i + 1 < m {
            alice[i + 1] = modd(bob[i] as i64 - q[2 * i + 1] as i64, d);
        }
    }
    Behavior::deterministic(&DeterministicStrategy::new(alice), &DeterministicStrategy::new(bob), d, d)
}

/// Chain pair entries of `b` as a map, for diagnostics.
pub fn chain_projection<T: Real>(b: &Behavior<T>) -> Result<BTreeMap<(usize, usize, usize, usize), T>> {
    project_behavior(b, &InputPairSet::chain(b.inputs_a()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    type Q = BigRational;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    fn ineq_f(d: usize, m: usize, alpha: &[f64]) -> ChainInequality<f64> {
        ChainInequality::new(d, m, alpha.to_vec()).unwrap()
    }

    /// Brute force over constrained offset vectors, independent of both bound methods.
    fn offsets_oracle(ineq: &ChainInequality<f64>) -> f64 {
        let (d, n) = (ineq.outcomes(), 2 * ineq.inputs());
        let mut best = f64::NEG_INFINITY;
        for idx in 0..d.pow(n as u32) {
            let v = digits(idx, n, d);
            if (v.iter().sum::<usize>() + 1) % d == 0 {
                best = best.max(ineq.offset_value(&v));
            }
        }
        best
    }

    #[test]
    fn classical_bounds_small_cases() {
        let i = ineq_f(2, 2, &[1.0, 0.0]);
        assert_eq!(classical_bound_dp(&i), 3.0);
        assert_eq!(offsets_oracle(&i), 3.0);
        assert_eq!(classical_bound_bruteforce(&i, BRUTE_FORCE_CAP).unwrap(), 3.0);
        let i = ineq_f(3, 2, &[1.0, 0.0, 0.0]);
        assert_eq!(classical_bound_dp(&i), 3.0);
        assert_eq!(offsets_oracle(&i), 3.0);
        let c = ineq_f(3, 3, &[0.7, 0.7, 0.7]);
        assert!((classical_bound_dp(&c) - 6.0 * 0.7).abs() < 1e-12);
        let i = ineq_f(3, 3, &[1.0, 0.0, 0.0]);
        assert_eq!(classical_bound_dp(&i), classical_bound_bruteforce(&i, BRUTE_FORCE_CAP).unwrap());
    }

    #[test]
    fn brute_force_respects_cap() {
        let i = ineq_f(2, 3, &[1.0, 0.0]);
        assert!(matches!(classical_bound_bruteforce(&i, 10), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn ns_box_values() {
        let i = ineq_f(2, 2, &[1.0, 0.0]);
        let b: Behavior = ns_box(2, &ChainOffsetVector::zero(2, 2)).unwrap();
        assert_eq!(*b.prob(0, 0, 1, 1), 0.5);
        assert_eq!(chain_value(&b, &i).unwrap(), 4.0);
        match verify_no_chain_violation(&b, &i).unwrap() {
            ChainCheck::Violated { excess } => assert_eq!(excess, 1.0),
            other => panic!("expected violation, got {other:?}"),
        }
        b.validate_no_signaling(1e-15).unwrap();
    }

    #[test]
    fn ns_box_terms_are_exact() {
        let shift = ChainOffsetVector::unconstrained(3, vec![1, 2, 0, 2, 1, 1]).unwrap();
        let b: Behavior<Q> = ns_box(3, &shift).unwrap();
        assert_eq!(b.signaling_defect(), 0.0);
        for i in 1..=3 {
            assert!(diff_prob(&b, i, i, shift.values()[2 * i - 2], 3).is_one());
        }
        for y in 1..=3 {
            let k = shift.values()[2 * y - 1];
            let s = (0..3).fold(Q::zero(), |acc, j| {
                if y < 3 {
                    acc + b.prob(j, (j + k) % 3, y + 1, y).clone()
                } else {
                    acc + b.prob(j, (j + 1 + k) % 3, 1, 3).clone()
                }
            });
            assert!(s.is_one());
        }
        let a = vec![q(2), q(-1), q(5)];
        let ineq = ChainInequality::new(3, 3, a.clone()).unwrap();
        assert_eq!(chain_value(&b, &ineq).unwrap(), ineq.offset_value(shift.values()));
    }

    #[test]
    fn uniform_behavior_value() {
        let i = ChainInequality::new(3, 2, vec![q(1), q(2), q(-4)]).unwrap();
        let u = Behavior::<Q>::uniform(2, 2, 3, 3).unwrap();
        assert_eq!(chain_value(&u, &i).unwrap(), q(4) * (q(1) + q(2) - q(4)) / q(3));
    }

    #[test]
    fn deterministic_value_telescopes() {
        let shift = ChainOffsetVector::free(3, vec![1, 0, 2, 2, 0]).unwrap();
        assert!(shift.is_constrained());
        let b: Behavior<Q> = deterministic_from_offsets(3, &shift, 1).unwrap();
        let ineq = ChainInequality::new(3, 3, vec![q(3), q(1), q(-2)]).unwrap();
        assert_eq!(chain_value(&b, &ineq).unwrap(), ineq.offset_value(shift.values()));
        assert!(verify_no_chain_violation(&b, &ineq).unwrap().is_ok());
    }

    #[test]
    fn partially_deterministic_example() {
        let i = ineq_f(2, 2, &[1.0, 0.0]);
        let base: Behavior = ns_box(2, &ChainOffsetVector::zero(2, 2)).unwrap();
        let p = partially_deterministic_box(&base, 1, 0).unwrap();
        assert_eq!(chain_value(&p, &i).unwrap(), 3.0);
        for y in 1..=2 {
            assert_eq!(p.marginal_a(0, 1, y), 1.0);
        }
        assert!(p.signaling_defect() < 1e-12);
        assert_eq!(p.prob(1, 1, 2, 2), base.prob(1, 1, 2, 2));
    }

    #[test]
    fn offset_vector_modes() {
        assert!(ChainOffsetVector::constrained(2, vec![1, 0, 0, 0]).is_ok());
        assert!(ChainOffsetVector::constrained(2, vec![0, 0, 0, 0]).is_err());
        assert!(ChainOffsetVector::free(2, vec![0, 0]).is_err());
        assert_eq!(ChainOffsetVector::free(3, vec![1, 1, 1]).unwrap().values(), &[1, 1, 1, 2]);
        assert!(ChainOffsetVector::unconstrained(2, vec![0, 2]).is_err());
    }

    #[test]
    fn deterministic_decomposition_is_a_point() {
        let shift = ChainOffsetVector::free(2, vec![1, 0, 1]).unwrap();
        let b: Behavior<Q> = deterministic_from_offsets(2, &shift, 1).unwrap();
        for x_star in 1..=2 {
            let dec = decompose_partially_deterministic(&b, x_star).unwrap();
            let support = dec.weights.support();
            assert_eq!(support.len(), 1, "x*={x_star}");
            assert!(support[0].1.is_one());
            assert_eq!(complete_offsets(&support[0].0, 2), shift.values());
            assert_eq!(dec.reconstruction_residual, 0.0);
        }
    }

    #[test]
    fn non_deterministic_input_is_rejected() {
        let b: Behavior = ns_box(2, &ChainOffsetVector::zero(2, 2)).unwrap();
        assert!(matches!(decompose_partially_deterministic(&b, 1), Err(Error::Precondition(_))));
    }

    fn random_lhv_and_boxes(seed: u64, d: usize, m: usize) -> Behavior<Q> {
        use rand::{rngs::StdRng, RngExt, SeedableRng};
        let mut rng = StdRng::seed_from_u64(seed);
        let k = 4;
        let mut parts = Vec::new();
        for _ in 0..k {
            let w = q(rng.random_range(1..10));
            let b = if rng.random::<bool>() {
                let shift = ChainOffsetVector::unconstrained(d, (0..2 * m).map(|_| rng.random_range(0..d)).collect()).unwrap();
                ns_box::<Q>(d, &shift).unwrap()
            } else {
                let a = DeterministicStrategy::new((0..m).map(|_| rng.random_range(0..d)).collect());
                let bb = DeterministicStrategy::new((0..m).map(|_| rng.random_range(0..d)).collect());
                Behavior::<Q>::deterministic(&a, &bb, d, d).unwrap()
            };
            parts.push((w, b));
        }
        let total = parts.iter().fold(Q::zero(), |acc, (w, _)| acc + w.clone());
        let refs: Vec<(Q, &Behavior<Q>)> = parts.iter().map(|(w, b)| (w.clone() / total.clone(), b)).collect();
        Behavior::mixture(&refs).unwrap()
    }

    #[test]
    fn exact_decomposition_on_rational_samples() {
        for seed in 0..12 {
            for (d, m) in [(2, 2), (2, 3), (3, 2)] {
                let base = random_lhv_and_boxes(seed, d, m);
                for x_star in 1..=m {
                    let p = partially_deterministic_box(&base, x_star, (seed as usize) % d).unwrap();
                    let dec = decompose_partially_deterministic(&p, x_star).unwrap();
                    assert_eq!(dec.reconstruction_residual, 0.0, "seed {seed} d {d} m {m} x* {x_star}");
                    assert!(dec.support_consistent);
                    let total = dec.weights.pq.iter().fold(Q::zero(), |acc, w| acc + w.clone());
                    assert!(total.is_one());
                    let ftotal = dec.weights.f.iter().fold(Q::zero(), |acc, w| acc + w.clone());
                    assert!(ftotal.is_one());
                    let ineq = ChainInequality::new(d, m, (0..d).map(|k| q((k as i64 * 7 + seed as i64) % 5 - 2)).collect()).unwrap();
                    assert_eq!(dec.mixture_value(&ineq), chain_value(&p, &ineq).unwrap());
                }
            }
        }
    }

    #[test]
    fn first_marginalization_identity_exact() {
        for seed in 0..6 {
            let (d, m) = (2, 3);
            let base = random_lhv_and_boxes(seed + 100, d, m);
            let p = partially_deterministic_box(&base, 1, 0).unwrap();
            let pf = PathFactorization::new(&p).unwrap();
            for i in 2..=m {
                let tail = 2 * m - 1 - (2 * i - 1);
                for head in 0..d.pow((2 * i - 2) as u32) {
                    let h = digits(head, 2 * i - 2, d);
                    for t in 0..d {
                        let mut s = Q::zero();
                        for rest in 0..d.pow(tail as u32) {
                            let mut l = h.clone();
                            l.extend(digits(rest, tail, d));
                            s = s + pf.path_weight(m, &l, t);
                        }
                        assert_eq!(s, pf.path_weight(i, &h, t));
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn dp_matches_bruteforce_exactly(d in 2usize..4, m in 2usize..4, raw in proptest::collection::vec(-20i64..20, 4)) {
            let alpha: Vec<Q> = (0..d).map(|k| Q::new(raw[k].into(), 4.into())).collect();
            let ineq = ChainInequality::new(d, m, alpha).unwrap();
            prop_assert_eq!(classical_bound_dp(&ineq), classical_bound_bruteforce(&ineq, BRUTE_FORCE_CAP).unwrap());
        }

        #[test]
        fn constrained_box_mixtures_never_violate(seed in any::<u64>(), d in 2usize..4, m in 2usize..4) {
            use rand::{rngs::StdRng, RngExt, SeedableRng};
            let mut rng = StdRng::seed_from_u64(seed);
            let alpha: Vec<Q> = (0..d).map(|_| q(rng.random_range(-5..6))).collect();
            let ineq = ChainInequality::new(d, m, alpha).unwrap();
            let boxes: Vec<Behavior<Q>> = (0..3)
                .map(|_| {
                    let free = (0..2 * m - 1).map(|_| rng.random_range(0..d)).collect();
                    ns_box(d, &ChainOffsetVector::free(d, free).unwrap()).unwrap()
                })
                .collect();
            let w = [q(1) / q(2), q(1) / q(3), q(1) / q(6)];
            let parts: Vec<(Q, &Behavior<Q>)> = w.iter().cloned().zip(boxes.iter()).collect();
            let mix = Behavior::mixture(&parts).unwrap();
            prop_assert!(verify_no_chain_violation(&mix, &ineq).unwrap().is_ok());
        }
    }
}
