mod common;

use rand::rngs::StdRng;
use rand::SeedableRng;

use randcert::compat::{compatibility_structure, joint_measurability, JointMeasurability};
use randcert::conic::SolveOptions;
use randcert::io;
use randcert::qmath::MeasurementSet;
use randcert::random;

use common::*;

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn half_noisy_pairs_are_compatible_and_parents_round_trip() {
    let mut rng = StdRng::seed_from_u64(51);
    for (n, d) in [(2, 2), (2, 3), (3, 2)] {
        for _ in 0..3 {
            let pair = vec![random::povm(n, d, &mut rng).with_visibility(0.5), random::povm(n, d, &mut rng).with_visibility(0.5)];
            match joint_measurability(&pair, opts()).unwrap() {
                JointMeasurability::Compatible { parent, .. } => {
                    assert!(parent.max_residual(&pair) < 1e-7);
                    assert!(parent.min_eigenvalue() > -1e-7);
                }
                JointMeasurability::Incompatible { margin } => panic!("incompatible with margin {margin}"),
            }
        }
    }
}

#[test]
fn sharp_paulis_structure_and_file_round_trip() {
    let meas = paulis("XYZ");
    let s = compatibility_structure(&meas, opts()).unwrap();
    assert!(s.hypergraph.hyperedges.is_empty());
    assert_eq!(s.margins.len(), 3);
    let json = io::hypergraph_to_json(&s.hypergraph).unwrap();
    assert_eq!(io::hypergraph_from_json(&json).unwrap(), s.hypergraph);
}

#[test]
fn noisy_triple_is_one_hyperedge() {
    let meas = MeasurementSet::new("XYZ".chars().map(|c| pauli(c).with_visibility(0.57)).collect()).unwrap();
    let h = compatibility_structure(&meas, opts()).unwrap().hypergraph;
    assert_eq!(h.hyperedges, vec![vec![1, 2, 3]]);
    let meas = MeasurementSet::new("XYZ".chars().map(|c| pauli(c).with_visibility(0.6)).collect()).unwrap();
    let h = compatibility_structure(&meas, opts()).unwrap().hypergraph;
    assert_eq!(h.hyperedges, vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
}

#[test]
fn too_many_vertices_hit_the_cap() {
    let meas = MeasurementSet::new((0..6).map(|_| pauli('Z')).collect()).unwrap();
    assert!(matches!(compatibility_structure(&meas, opts()), Err(randcert::Error::CapExceeded { .. })));
}
