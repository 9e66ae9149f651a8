use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

use randcert::chain::{ns_box, partially_deterministic_box, ChainOffsetVector};
use randcert::io::{self, Document};
use randcert::qmath::{self, MeasurementSet, PauliAxis};
use randcert::scenario::{Assemblage, Behavior, DeterministicStrategy};

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn randcert(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_randcert")).args(args).output().expect("binary runs");
    Output {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Rows of a CSV report keyed by column name.
fn rows(csv: &str) -> Vec<HashMap<String, String>> {
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# randcert "), "schema line");
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn ok_rows(args: &[&str]) -> Vec<HashMap<String, String>> {
    let out = randcert(args);
    assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
    rows(&out.stdout)
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = '{}'", row[key]))
}

fn write_behavior(dir: &Path, name: &str, b: &Behavior) -> String {
    let path = dir.join(name);
    io::write_document(&path, &Document::from_behavior(b)).unwrap();
    path.display().to_string()
}

fn lhv_behavior() -> Behavior {
    let s = |v: Vec<usize>| DeterministicStrategy::new(v);
    let p = Behavior::deterministic(&s(vec![0, 1]), &s(vec![1, 1]), 2, 2).unwrap();
    let q = Behavior::deterministic(&s(vec![1, 0]), &s(vec![0, 1]), 2, 2).unwrap();
    Behavior::mixture(&[(0.3, &p), (0.7, &q)]).unwrap()
}

#[test]
fn steer_rand_state_below_visibility_threshold() {
    let r = ok_rows(&["steer-rand", "--state", "rho_p_theta", "--p", "0.7", "--theta", "0.7854", "--meas", "XYZ", "--xstar", "1"]);
    assert_eq!(r.len(), 1);
    assert!((num(&r[0], "p_guess") - 1.0).abs() < 1e-6);
    assert!(num(&r[0], "sw") > 0.1);
}

#[test]
fn steer_rand_unsteerable_file_has_no_randomness() {
    let dir = tempfile::tempdir().unwrap();
    let states: Vec<_> = (0..4).map(|k| qmath::rho_p_theta::<f64>(0.2 * k as f64, 0.3).unwrap().into_matrix()).collect();
    let partial: Vec<_> = states.iter().map(|s| qmath::partial_trace(s, (2, 2), qmath::Subsystem::B).unwrap().scale(0.25)).collect();
    let a = Assemblage::from_hidden_states(2, 2, &partial).unwrap();
    let path = dir.path().join("lhs.json");
    io::write_document(&path, &Document::from_assemblage(&a)).unwrap();
    let r = ok_rows(&["steer-rand", "--assemblage", path.to_str().unwrap(), "--xstar", "2"]);
    assert!((num(&r[0], "p_guess") - 1.0).abs() < 1e-6);
    let r = ok_rows(&["steer-rand", "--assemblage", path.to_str().unwrap(), "--xset", "1,2"]);
    assert!((num(&r[0], "p_guess") - 1.0).abs() < 1e-6);
    assert_eq!(r[0]["psw_bound"], "");
}

#[test]
fn steer_rand_grid_rows_and_bound_order() {
    let args = ["steer-rand", "--state", "rho_p_theta", "--p", "0.6:1:5", "--theta", "0.2:0.7854:5", "--meas", "XYZ", "--xstar", "2"];
    let r = ok_rows(&args);
    assert_eq!(r.len(), 25);
    for row in &r {
        let (pg, psw, sw) = (num(row, "p_guess"), num(row, "psw_bound"), num(row, "sw_bound"));
        assert!(psw >= sw - 1e-6, "{row:?}");
        assert!(pg >= psw - 1e-6, "{row:?}");
        assert!((num(row, "h_min") + pg.log2()).abs() < 1e-8);
    }
    assert!(r.iter().any(|row| num(row, "p_guess") < 0.99));
    let mut parallel = args.to_vec();
    parallel.extend(["--jobs", "4"]);
    let mut serial = args.to_vec();
    serial.extend(["--jobs", "1"]);
    assert_eq!(randcert(&parallel).stdout, randcert(&serial).stdout);
}

#[test]
fn steer_rand_json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let args = ["steer-rand", "--state", "psi_theta", "--theta", "0.3", "--meas", "XZ"];
    let csv = ok_rows(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    assert_eq!(randcert(&with_out).code, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["schema"], "randcert steer-rand");
    assert_eq!(lines.len(), 2);
    let pg = lines[1]["p_guess"].as_f64().unwrap();
    assert!((pg - num(&csv[0], "p_guess")).abs() < 1e-9);
    assert!((pg - 0.5).abs() < 1e-5);
}

#[test]
fn steer_rand_rejects_bad_arguments() {
    for args in [
        vec!["steer-rand", "--state", "rho_p_theta", "--p", "0.5:1", "--theta", "0.3", "--meas", "XZ"],
        vec!["steer-rand", "--state", "rho_p_theta", "--p", "0.5", "--theta", "2", "--meas", "XZ"],
        vec!["steer-rand", "--state", "rho_p_theta", "--p", "0.5", "--theta", "0.3", "--meas", "XQ"],
        vec!["steer-rand", "--assemblage", "/nonexistent/a.json"],
        vec!["steer-rand", "--state", "phi_plus", "--meas", "XZ", "--xset", "1,2", "--weights", "1"],
        vec!["steer-rand", "--bogus"],
    ] {
        let out = randcert(&args);
        assert_eq!(out.code, 2, "{args:?}: {}", out.stderr);
    }
}

#[test]
fn chain_box_violates_the_classical_bound() {
    let r = ok_rows(&["chain", "--d", "2", "--m", "2", "--alpha", "1,0", "--box", "ns"]);
    assert_eq!(num(&r[0], "value"), 4.0);
    assert_eq!(num(&r[0], "bound_dp"), 3.0);
    assert_eq!(num(&r[0], "bound_bruteforce"), 3.0);
    assert_eq!(r[0]["verdict"], "violated");
    let r = ok_rows(&["chain", "--d", "3", "--m", "2", "--box", "ns", "--offsets", "0,0,0,2"]);
    assert_eq!(r[0]["verdict"], "ok");
}

#[test]
fn chain_local_behavior_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_behavior(dir.path(), "lhv.json", &lhv_behavior());
    let r = ok_rows(&["chain", "--behavior", &path, "--alpha", "0.3,-1.2"]);
    assert!(num(&r[0], "margin") >= 0.0);
    assert_eq!(r[0]["verdict"], "ok");
}

#[test]
fn chain_sweep_is_clean_and_reproducible() {
    let args = ["chain", "--sweep-partially-deterministic", "--samples", "200", "--seed", "11"];
    let out = randcert(&args);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let r = rows(&out.stdout);
    assert_eq!(r.len(), 200);
    assert!(r.iter().all(|row| row["verdict"] == "ok" && num(row, "margin") >= -1e-8));
    assert_eq!(randcert(&args).stdout, out.stdout);
    assert_ne!(randcert(&["chain", "--sweep-partially-deterministic", "--samples", "200", "--seed", "12"]).stdout, out.stdout);
}

#[test]
fn chain_bounds_only_and_cap() {
    let r = ok_rows(&["chain", "--d", "3", "--m", "3", "--alpha", "1,0.5,0"]);
    assert_eq!(num(&r[0], "bound_dp"), num(&r[0], "bound_bruteforce"));
    let r = ok_rows(&["chain", "--d", "10", "--m", "10"]);
    assert_eq!(r[0]["bound_bruteforce"], "");
    assert_eq!(randcert(&["chain", "--d", "2", "--m", "2", "--alpha", "1,0,0", "--box", "ns"]).code, 2);
}

#[test]
fn decompose_reports_components() {
    let dir = tempfile::tempdir().unwrap();
    let s = |v: Vec<usize>| DeterministicStrategy::new(v);
    let det = Behavior::deterministic(&s(vec![1, 0, 1]), &s(vec![0, 0, 1]), 2, 2).unwrap();
    let path = write_behavior(dir.path(), "det.json", &det);
    let r = ok_rows(&["decompose", "--behavior", &path]);
    assert_eq!(r.len(), 1);
    assert!((num(&r[0], "weight") - 1.0).abs() < 1e-12);

    let base: Behavior = ns_box(3, &ChainOffsetVector::unconstrained(3, vec![0, 1, 2, 0]).unwrap()).unwrap();
    let pd = partially_deterministic_box(&base, 2, 1).unwrap();
    let path = write_behavior(dir.path(), "pd.json", &pd);
    let r = ok_rows(&["decompose", "--behavior", &path, "--xstar", "2"]);
    assert!(!r.is_empty());
    assert!(r.iter().all(|row| num(row, "reconstruction_residual") < 1e-9 && row["e"] == "1"));
    assert!((r.iter().map(|row| num(row, "weight")).sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn decompose_rejects_random_alice_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_behavior(dir.path(), "lhv.json", &lhv_behavior());
    let out = randcert(&["decompose", "--behavior", &path, "--xstar", "1"]);
    assert_eq!(out.code, 4, "{}", out.stderr);
    assert!(out.stderr.contains("precondition"));
    assert_eq!(randcert(&["decompose", "--behavior", &path]).code, 4);
}

#[test]
fn compat_reports() {
    let r = ok_rows(&["compat", "--meas", "X@0.5,Z@0.5"]);
    let edges: Vec<_> = r.iter().filter(|row| row["kind"] == "hyperedge").map(|row| row["target"].clone()).collect();
    assert_eq!(edges, vec!["1 2"]);

    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    let r = ok_rows(&["compat", "--meas", "XYZ", "--hypergraph", h.to_str().unwrap(), "--xset", "1,2"]);
    assert!(r.iter().all(|row| row["kind"] != "hyperedge"));
    let stars: Vec<_> = r.iter().filter(|row| row["kind"] == "star").collect();
    assert_eq!(stars.len(), 3);
    assert!(stars.iter().all(|row| row["holds"] == "false"));
    assert_eq!(r.last().unwrap()["kind"], "block_star");
    let parsed = io::hypergraph_from_json(&std::fs::read_to_string(&h).unwrap()).unwrap();
    assert_eq!(parsed.vertices, 3);
    assert!(parsed.hyperedges.is_empty());

    let r = ok_rows(&["compat", "--meas", "Z"]);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0]["holds"], "true");
}

#[test]
fn compat_measurement_file_and_cap() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meas.json");
    let meas = MeasurementSet::new(vec![
        qmath::pauli_projectors(PauliAxis::Z).with_visibility(0.5),
        qmath::pauli_projectors(PauliAxis::X).with_visibility(0.8),
        qmath::pauli_projectors(PauliAxis::Y).with_visibility(0.8),
    ])
    .unwrap();
    io::write_document(&path, &Document::from_measurements(&meas)).unwrap();
    let r = ok_rows(&["compat", "--meas", path.to_str().unwrap()]);
    let star: Vec<_> = r.iter().filter(|row| row["kind"] == "star").map(|row| row["holds"].as_str()).collect();
    assert_eq!(star, vec!["true", "false", "false"]);
    assert_eq!(randcert(&["compat", "--meas", "XYZXYZ"]).code, 5);
}

#[test]
fn nl_rand_local_and_rejected_data() {
    let dir = tempfile::tempdir().unwrap();
    let lhv = write_behavior(dir.path(), "lhv.json", &lhv_behavior());
    let r = ok_rows(&["nl-rand", "--behavior", &lhv, "--xstar", "1", "--ystar", "2", "--level", "1"]);
    assert!((num(&r[0], "p_guess") - 1.0).abs() < 1e-6);
    assert_eq!(r[0]["level"], "1");

    let pr: Behavior = ns_box(2, &ChainOffsetVector::zero(2, 2)).unwrap();
    let pr = write_behavior(dir.path(), "pr.json", &pr);
    let out = randcert(&["nl-rand", "--behavior", &pr]);
    assert_eq!(out.code, 4, "{}", out.stderr);
    assert_eq!(randcert(&["nl-rand", "--behavior", &lhv, "--level", "2"]).code, 2);
}
