use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn sgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend(["--format", "json", "--no-timestamp"]);
    let out = sgap(&full);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name].iter().collect();
    p.display().to_string()
}

#[test]
fn tree_norm_in_range() {
    let v = json(&["tree-norm", "--degree", "4", "--depth", "12"]);
    let norm = v["results"]["compressed_norm"].as_f64().unwrap();
    assert!((0.80..=0.866026).contains(&norm), "{norm}");
    assert_eq!(v["config"]["degree"], 4);
    assert_eq!(v["config"]["seed"], 0);
}

#[test]
fn pgl2_lumped() {
    let v = json(&["pgl2", "--q", "2", "--trunc", "60", "--mode", "lumped"]);
    let r = &v["results"];
    assert!((r["cheeger_bound"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let second = r["second_eigenvalue"].as_f64().unwrap();
    assert!((second - 2.0 * 2f64.sqrt() / 3.0).abs() < 0.02);
    assert!((r["bottom_eigenvalue"].as_f64().unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn cheeger_two_state() {
    let input = data("two_state.json");
    let v = json(&["cheeger", "--input", &input, "--exact"]);
    assert_eq!(v["results"]["h"].as_f64().unwrap(), 2.0);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = [
        "lyapunov", "--steps", "300", "--trials", "20", "--seed", "7", "--format", "json",
        "--no-timestamp",
    ];
    let a = sgap(&args);
    let b = sgap(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_is_echoed_and_used() {
    let a = json(&["lyapunov", "--steps", "200", "--trials", "10", "--seed", "1"]);
    let b = json(&["lyapunov", "--steps", "200", "--trials", "10", "--seed", "2"]);
    assert_eq!(a["config"]["seed"], 1);
    assert_ne!(a["results"]["mc_estimate"], b["results"]["mc_estimate"]);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = sgap(&["tree-norm", "--degree", "4", "--depth", "3", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.lines().any(|l| l.starts_with("ERROR:usage:")), "{err}");
}

#[test]
fn library_errors_are_prefixed() {
    let out = sgap(&["pgl2", "--q", "6", "--trunc", "10"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("ERROR:invalid_argument:"), "{err}");

    let out = sgap(&["cheeger", "--input", "/nonexistent/chain.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR:io:"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(sgap(&["--help"]).status.code(), Some(0));
}

#[test]
fn output_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ladder.csv");
    let out = sgap(&[
        "torus",
        "--radius",
        "10",
        "--steps",
        "2",
        "--format",
        "csv",
        "--no-timestamp",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "radius,vertices,norm");
    assert_eq!(rows.len(), 3);
}

#[test]
fn cayley_exports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.txt");
    let chain = dir.path().join("chain.json");
    let v = json(&[
        "cayley",
        "--p",
        "3",
        "--dim",
        "2",
        "--export-edges",
        edges.to_str().unwrap(),
        "--export-chain",
        chain.to_str().unwrap(),
    ]);
    assert_eq!(v["results"]["vertices"], 24);
    assert_eq!(std::fs::read_to_string(&edges).unwrap().lines().count(), 24 * 4);
    // the exported chain feeds back into the cheeger command
    let c = json(&["cheeger", "--input", chain.to_str().unwrap(), "--sweep"]);
    let h = c["results"]["h"].as_f64().unwrap();
    let l1 = c["results"]["lambda1"].as_f64().unwrap();
    assert!(h * h / 8.0 <= l1 + 1e-9 && l1 <= 2.0 * h + 1e-9);
}

#[test]
fn cite_names_the_statement() {
    let v = json(&["return-prob", "--n", "10", "--cite"]);
    assert!(v["cite"].as_str().unwrap().contains("Return probabilities"));
    let root = v["results"]["last_root"].as_f64().unwrap();
    assert!(root > 0.0 && root < 0.866026);
}

#[test]
fn nonsymmetric_letters() {
    let v = json(&["return-prob", "--letters", "1,2", "--n", "5000", "--every", "5000"]);
    assert!(v["results"]["last_root"].as_f64().unwrap() >= 0.99);
    assert_eq!(v["table"].as_array().unwrap().len(), 1);
}

#[test]
fn threads_env_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_sgap"))
        .args(["return-prob", "--n", "5"])
        .env("SGAP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let ok = Command::new(env!("CARGO_BIN_EXE_sgap"))
        .args(["expanders", "--primes", "3,5"])
        .env("SGAP_THREADS", "2")
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn bernoulli_and_expanders_stay_below_regular_norm() {
    let b = json(&["bernoulli", "--word", "e", "--word", "1", "--radius", "4"]);
    assert!(b["results"]["supremum"].as_f64().unwrap() <= 0.866025 + 1e-9);
    let e = json(&["expanders", "--primes", "3,5,7"]);
    assert_eq!(e["results"]["lemma_holds"], true);
    assert_eq!(e["table"].as_array().unwrap().len(), 3);
}
