use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reeb-lab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn closure_field(csv: &str, key: &str) -> f64 {
    let line = csv.lines().last().unwrap();
    assert!(line.starts_with("# closure"), "{line}");
    let field = line.split_whitespace().find_map(|f| f.strip_prefix(&format!("{key}="))).unwrap();
    field.parse().unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("t,"))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn realize_examples() {
    let out = run(&["realize", "--n", "2", "--k", "45"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!((v["b"].as_u64(), v["c"].as_u64(), v["plugs"].as_u64()), (Some(6), Some(0), Some(0)));
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["verified"], true);
    assert_eq!(v["trace"].as_array().unwrap().last().unwrap(), 45);

    let out = run(&["realize", "--n", "1", "--k", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["feasible"], false);

    let out = run(&["realize", "--n", "2", "--k", "0"]);
    assert_eq!(json(&out)["plugs"], 3);

    let out = run(&["realize", "--reeb", "--n", "3", "--k", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["realize", "--reeb", "--n", "2", "--k", "100"]);
    assert_eq!(json(&out)["a"], 97);
}

#[test]
fn orbit_census_finds_two_circles() {
    let out = run(&["orbits", "--eps", "0.70710678", "--grid", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"count\":2"));
    let out = run(&["orbits", "--weights", "1,1"]);
    assert_eq!(json(&out)["count"], Value::Null);
    let out = run(&["orbits", "--eps", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_selectors() {
    let out = run(&["verify", "--suite", "structure-equations"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let checks = v["suites"][0]["checks"].as_array().unwrap();
    assert!(checks.len() >= 3);
    assert!(checks.iter().all(|c| c["measured"].as_f64().unwrap() < c["bound"].as_f64().unwrap()));
    assert_eq!(run(&["verify", "--suite", "pullback"]).status.code(), Some(0));
    assert_eq!(run(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
}

#[test]
fn reeb_flow_csv() {
    let out = run(&["flow", "--reeb", "--theta", "1.0472", "--t", "12.5664", "--dt", "0.001"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("# flow=contact"));
    assert!(csv.lines().nth(1).unwrap().starts_with("t,u0,u1,u2,u3,constraint_drift,energy_drift"));
    assert_eq!(data_rows(&csv).len(), 12567);
    assert!(closure_field(&csv, "closed_form_distance") < 1e-8);
}

#[test]
fn zero_deformation_matches_reeb_output() {
    let a = run(&["flow", "--deformed", "--eps", "0", "--t", "2", "--seed", "5"]);
    let b = run(&["flow", "--reeb", "--theta", "0", "--t", "2", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn magnetic_flow_conserves_energy() {
    let out = run(&["flow", "--magnetic", "--s", "1.0", "--t", "10", "--dt", "0.001"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let worst = data_rows(&csv).iter().map(|r| *r.last().unwrap()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn invalid_parameters_are_usage_errors() {
    assert_eq!(run(&["flow", "--deformed", "--eps", "1.0", "--t", "1"]).status.code(), Some(2));
    assert_eq!(run(&["flow", "--reeb", "--t", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["flow", "--reeb", "--magnetic", "--s", "1", "--t", "1"]).status.code(), Some(2));
    assert_eq!(run(&["finsler-check", "--eps", "1.0"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_reeb-lab"))
        .args(["realize", "--n", "2", "--k", "3"])
        .env("REEB_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let args = ["finsler-check", "--eps", "0.05", "--samples", "500", "--fibres", "20", "--seed", "9"];
    let a = run(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_reeb-lab")).args(args).env("REEB_LAB_THREADS", "2").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["config"]["seed"], 9);
    assert_eq!(json(&a)["rng"], "chacha8");
}

#[test]
fn degree_flag_converts_angles() {
    let a = json(&run(&["project", "--theta", "60", "--deg"]));
    let b = json(&run(&["project", "--theta", &std::f64::consts::FRAC_PI_3.to_string()]));
    assert_eq!(a["fit"]["winding"], 2);
    let (x, y) = (a["fit"]["angle"].as_f64().unwrap(), b["fit"]["angle"].as_f64().unwrap());
    assert!((x - y).abs() < 1e-12);
    let h = json(&run(&["holonomy", "--colatitude", "90", "--deg"]));
    assert!(h["mismatch"].as_f64().unwrap() < 1e-5);
}
