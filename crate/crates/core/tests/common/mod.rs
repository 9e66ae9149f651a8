#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::RngExt;

use randcert::chain::{ns_box, partially_deterministic_box, ChainOffsetVector};
use randcert::qmath::{self, ComplexMatrix, MeasurementSet, PauliAxis, Povm};
use randcert::random;
use randcert::scenario::{assemblage_from_state, behavior_from_state, Assemblage, Behavior, DeterministicStrategy};
use randcert::steering::{construct_partially_unsteerable, HiddenStateEnsemble};

pub fn pauli(c: char) -> Povm {
    qmath::pauli_projectors(PauliAxis::from_char(c).unwrap())
}

pub fn paulis(axes: &str) -> MeasurementSet {
    MeasurementSet::new(axes.chars().map(pauli).collect()).unwrap()
}

pub fn random_deterministic(rng: &mut StdRng, m: usize, d: usize) -> Behavior {
    let s = |rng: &mut StdRng| DeterministicStrategy::new((0..m).map(|_| rng.random_range(0..d)).collect());
    let (a, b) = (s(rng), s(rng));
    Behavior::deterministic(&a, &b, d, d).unwrap()
}

pub fn random_quantum(rng: &mut StdRng, m: usize, d: usize) -> Behavior {
    let rho = random::density_matrix(d * d, rng.random_range(1..=d * d), rng);
    let meas = |rng: &mut StdRng| MeasurementSet::new((0..m).map(|_| random::povm(d, d, rng)).collect()).unwrap();
    let (ma, mb) = (meas(rng), meas(rng));
    behavior_from_state(&rho, &ma, &mb).unwrap()
}

/// Mixture of deterministic points, quantum behaviors and chain boxes with arbitrary offsets.
pub fn random_ns_behavior(rng: &mut StdRng, m: usize, d: usize) -> Behavior {
    let count = rng.random_range(1..=4);
    let weights = random::simplex(count, rng);
    let parts: Vec<Behavior> = (0..count)
        .map(|_| match rng.random_range(0..3) {
            0 => random_deterministic(rng, m, d),
            1 => random_quantum(rng, m, d),
            _ => {
                let q = (0..2 * m).map(|_| rng.random_range(0..d)).collect();
                ns_box(d, &ChainOffsetVector::unconstrained(d, q).unwrap()).unwrap()
            }
        })
        .collect();
    let refs: Vec<(f64, &Behavior)> = weights.into_iter().zip(parts.iter()).collect();
    Behavior::mixture(&refs).unwrap()
}

/// No-signaling behavior with `A_{x*}` fixed to `e`.
pub fn random_partially_deterministic(rng: &mut StdRng, m: usize, d: usize) -> (Behavior, usize, usize) {
    let base = random_ns_behavior(rng, m, d);
    let x_star = rng.random_range(1..=m);
    let e = rng.random_range(0..d);
    (partially_deterministic_box(&base, x_star, e).unwrap(), x_star, e)
}

/// Random partially unsteerable qubit assemblage with two outcomes and `m` inputs.
pub fn random_partially_unsteerable(rng: &mut StdRng, m: usize) -> (Assemblage, usize) {
    let d = 2;
    let x_star = rng.random_range(1..=m);
    let w = random::simplex(d * d, rng);
    let first: Vec<ComplexMatrix> = w.iter().map(|&p| random::density_matrix(2, 2, rng).into_matrix().scale(p)).collect();
    let others: Vec<usize> = (1..=m).filter(|&x| x != x_star).collect();
    let tau0 = HiddenStateEnsemble::new(vec![x_star, others[0]], d, first).unwrap();
    // every edge shares the x* conditionals of the first one
    let marg: Vec<ComplexMatrix> = (0..d)
        .map(|a| (0..d).fold(ComplexMatrix::zeros(2, 2), |acc, b| acc + &tau0.states[a * d + b]))
        .collect();
    let mut tau = vec![tau0];
    for &x in &others[1..] {
        let states = (0..d)
            .flat_map(|a| {
                let root = qmath::sqrt_psd(&marg[a]);
                let split = random::povm(2, d, rng);
                (0..d).map(move |b| &root * split.effect(b) * &root).collect::<Vec<_>>()
            })
            .collect();
        tau.push(HiddenStateEnsemble::new(vec![x_star, x], d, states).unwrap());
    }
    (construct_partially_unsteerable(&tau, x_star, m).unwrap(), x_star)
}

/// Unsteerable qubit assemblage with `m` inputs and `d` outcomes.
pub fn random_lhs_assemblage(rng: &mut StdRng, m: usize, d: usize) -> Assemblage {
    let k = d.pow(m as u32);
    let w = random::simplex(k, rng);
    let states: Vec<ComplexMatrix> = w.iter().map(|&p| random::density_matrix(2, 2, rng).into_matrix().scale(p)).collect();
    Assemblage::from_hidden_states(m, d, &states).unwrap()
}

/// Assemblage of a random two-qubit state measured with `meas`.
pub fn random_state_assemblage(rng: &mut StdRng, meas: &MeasurementSet) -> Assemblage {
    let rho = random::density_matrix(4, rng.random_range(1..=4), rng);
    assemblage_from_state(&rho, meas).unwrap()
}
