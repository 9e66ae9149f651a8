mod common;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use randcert::chain::ChainInequality;
use randcert::conic::SolveOptions;
use randcert::npa::{bell_value_bound, p_guess_nl, p_guess_nl_local, BellFunctional, Level, MomentRelaxation};
use randcert::qmath::{self, ComplexMatrix, MeasurementSet, Povm};
use randcert::random;
use randcert::scenario::{behavior_from_state, Behavior};

use common::*;

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn quantum_behaviors_are_feasible_and_levels_are_monotone() {
    let mut rng = StdRng::seed_from_u64(31);
    for (m, d) in [(2, 2), (2, 2), (3, 2), (2, 3)] {
        let b = random_quantum(&mut rng, m, d);
        let one = MomentRelaxation::new(Level::One, b.shape()).unwrap();
        let ab = MomentRelaxation::new(Level::OneAB, b.shape()).unwrap();
        let r1 = p_guess_nl(&b, 1, 1, &one, opts()).unwrap();
        let r2 = p_guess_nl(&b, 1, 1, &ab, opts()).unwrap();
        assert!(r2.p_guess <= r1.p_guess + 1e-6, "{} > {}", r2.p_guess, r1.p_guess);
        assert!(r2.p_guess >= 1.0 / (d * d) as f64 - 1e-9);
        let l1 = p_guess_nl_local(&b, 2, &one, opts()).unwrap();
        let l2 = p_guess_nl_local(&b, 2, &ab, opts()).unwrap();
        assert!(l2.p_guess <= l1.p_guess + 1e-6);
        assert_eq!(r2.level, Level::OneAB);
    }
}

/// Trivial measurement that always returns `e`.
fn constant_povm(e: usize, d: usize) -> Povm {
    Povm::new((0..d).map(|a| if a == e { qmath::identity(2) } else { ComplexMatrix::zeros(2, 2) }).collect()).unwrap()
}

#[test]
fn eve_decompositions_deterministic_at_the_target_are_detected() {
    let mut rng = StdRng::seed_from_u64(32);
    let d = 2;
    let parts: Vec<Behavior> = (0..3)
        .map(|_| {
            let (e, f) = (rng.random_range(0..d), rng.random_range(0..d));
            let rho = random::density_matrix(4, 4, &mut rng);
            let alice = MeasurementSet::new(vec![constant_povm(e, d), random::qubit_projective(&mut rng)]).unwrap();
            let bob = MeasurementSet::new(vec![constant_povm(f, d), random::qubit_projective(&mut rng)]).unwrap();
            behavior_from_state(&rho, &alice, &bob).unwrap()
        })
        .collect();
    let w = random::simplex(3, &mut rng);
    let refs: Vec<(f64, &Behavior)> = w.into_iter().zip(parts.iter()).collect();
    let b = Behavior::mixture(&refs).unwrap();
    let rel = MomentRelaxation::new(Level::OneAB, (2, 2, 2, 2)).unwrap();
    assert!((p_guess_nl(&b, 1, 1, &rel, opts()).unwrap().p_guess - 1.0).abs() < 1e-6);
}

#[test]
fn chain_functionals_respect_quantum_bounds() {
    let rel = MomentRelaxation::new(Level::OneAB, (3, 3, 2, 2)).unwrap();
    let ineq = ChainInequality::new(2, 3, vec![1.0, 0.0]).unwrap();
    let bound = bell_value_bound(&BellFunctional::from_chain(&ineq), &rel, opts()).unwrap();
    // 2m cos²(π/4m) is attained by qubits
    let attainable = 6.0 * (std::f64::consts::PI / 12.0).cos().powi(2);
    assert!(bound >= attainable - 1e-5, "{bound} < {attainable}");
    assert!(bound < 6.0 - 1e-3);
    let mut rng = StdRng::seed_from_u64(33);
    for _ in 0..4 {
        let b = random_quantum(&mut rng, 3, 2);
        assert!(BellFunctional::from_chain(&ineq).evaluate(&b).unwrap() <= bound + 1e-6);
    }
}

#[test]
fn signaling_data_are_rejected() {
    let mut rng = StdRng::seed_from_u64(34);
    let b = random_quantum(&mut rng, 2, 2);
    let mut p = b.as_slice().to_vec();
    p[0] += 0.05;
    p[1] -= 0.05;
    let bad = Behavior::new(2, 2, 2, 2, p).unwrap();
    let rel = MomentRelaxation::new(Level::One, (2, 2, 2, 2)).unwrap();
    assert!(matches!(p_guess_nl(&bad, 1, 1, &rel, opts()), Err(randcert::Error::InfeasibleData(_))));
}
