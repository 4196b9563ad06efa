//! End-to-end runs of the `uminimal` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn uminimal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uminimal"))
        .args(args)
        .env_remove("UMINIMAL_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sigma_of_diagonal_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.json", r#"{"n":3,"q":1,"matrices":[[[1,0,0],[0,2,0],[0,0,3]]]}"#);
    let out = uminimal(&["sigma", &input]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let sigma = &v["report"]["sigma"];
    assert_eq!(sigma["[1]"], 6.0);
    assert_eq!(sigma["[2]"], 11.0);
    assert_eq!(sigma["[3]"], 6.0);
    assert_eq!(v["seed"], 7);
}

#[test]
fn sigma_oracle_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "s.json",
        r#"{"matrices":[[[0.3,-0.7,0.1],[-0.7,0.2,0.5],[0.1,0.5,-0.9]],[[0.8,0.4,-0.2],[0.4,-0.6,0.3],[-0.2,0.3,0.1]]]}"#,
    );
    let out = uminimal(&["sigma", &input, "--oracle"]);
    assert_eq!(out.status.code(), Some(0));
    let err = json(&out)["report"]["oracle"]["max_rel_err"].as_f64().unwrap();
    assert!(err <= 1e-10, "{err}");
}

#[test]
fn empty_system_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "e.json", r#"{"matrices":[]}"#);
    let out = uminimal(&["sigma", &input]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("system must contain q ≥ 1 matrices"));
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(uminimal(&["sigma"]).status.code(), Some(2));
    assert_eq!(uminimal(&["frobnicate"]).status.code(), Some(2));
    let bad_patch = uminimal(&["minimality", "--patch", "klein-bottle", "--u", "0"]);
    assert_eq!(bad_patch.status.code(), Some(2));
    let bad_index = uminimal(&["minimality", "--patch", "torus", "--u", "1,0"]);
    assert_eq!(bad_index.status.code(), Some(2));
    let exact_q3 = uminimal(&["minimality", "--patch", "umbilical:n=2,q=3", "--u", "0,0,0", "--scheme", "exact"]);
    assert_eq!(exact_q3.status.code(), Some(2));
}

#[test]
fn umbilical_sphere_is_minimal_for_top_index() {
    let out = uminimal(&["minimality", "--patch", "umbilical:n=2,q=2,r=1", "--u", "1,1", "--resolution", "24"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert!(v["report"]["sup_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn failed_check_exits_one() {
    let out = uminimal(&["minimality", "--patch", "torus:R=3,a=1", "--u", "0", "--resolution", "16", "--summary-only"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["passed"], false);
    assert!(v["report"]["points"].as_array().unwrap().is_empty());
}

#[test]
fn gallery_list_and_check() {
    let list = uminimal(&["gallery", "list"]);
    assert_eq!(list.status.code(), Some(0));
    let names: Vec<String> = json(&list)["report"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    assert!(names.contains(&"veronese".to_string()));

    let check = uminimal(&["gallery", "check", "veronese", "--points", "20", "--resolution", "24"]);
    assert_eq!(check.status.code(), Some(0), "{}", String::from_utf8_lossy(&check.stdout));
    let v = json(&check);
    assert_eq!(v["report"]["passed"], true);
    assert!(!v["report"]["facts"].as_array().unwrap().is_empty());
}

#[test]
fn gallery_survey_over_all_indices() {
    let out = uminimal(&["gallery", "check", "umbilical:n=2,q=2,r=1", "--all-u-upto", "2", "--points", "10", "--resolution", "16"]);
    assert_eq!(out.status.code(), Some(0));
    // six indices with |u| ≤ 2 for q = 2
    assert_eq!(json(&out)["report"]["survey"].as_array().unwrap().len(), 6);
}

#[test]
fn variation_on_a_torus() {
    let out = uminimal(&[
        "variation", "--patch", "torus:R=3,a=1", "--u", "0", "--field", "bump:seed=2,modes=2,amplitude=0.1",
        "--steps", "1e-2,5e-3,2.5e-3", "--resolution", "32",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["report"]["field"]["seed"], 2);
    assert_eq!(v["report"]["convergence"]["steps"].as_array().unwrap().len(), 3);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = [
        "minimality", "--patch", "umbilical:n=2,q=3,r=1", "--u", "2,0,0", "--resolution", "8", "--samples", "256",
        "--seed", "5",
    ];
    let first = uminimal(&args);
    let second = uminimal(&args);
    assert_eq!(first.stdout, second.stdout);
    let mut single = args.to_vec();
    single.extend(["--threads", "1"]);
    assert_eq!(uminimal(&single).stdout, first.stdout);
    let mut other = args.to_vec();
    *other.last_mut().unwrap() = "6";
    assert_ne!(uminimal(&other).stdout, first.stdout);
}

#[test]
fn seed_precedence_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.json", r#"{"matrices":[[[1,0.5],[0.5,-1]],[[0,1],[1,0]],[[2,0],[0,1]]]}"#);
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_uminimal"));
        cmd.args(["average", &input, "--u", "1,1,0", "--samples", "64"]).args(extra);
        match env {
            Some(s) => cmd.env("UMINIMAL_SEED", s),
            None => cmd.env_remove("UMINIMAL_SEED"),
        };
        json(&cmd.output().unwrap())
    };
    let v = run(&[], None);
    assert_eq!((v["seed"].as_u64(), v["seed_source"].as_str()), (Some(7), Some("default")));
    let v = run(&[], Some("11"));
    assert_eq!((v["seed"].as_u64(), v["seed_source"].as_str()), (Some(11), Some("env")));
    let config = write(dir.path(), "c.json", r#"{"seed": 21, "samples": 32}"#);
    let v = run(&["--config", &config], Some("11"));
    assert_eq!((v["seed"].as_u64(), v["seed_source"].as_str()), (Some(21), Some("config")));
    // the flag --samples 64 beats the file's 32
    assert_eq!(v["report"]["sigma_hat"]["samples"], 64);
    let v = run(&["--config", &config, "--seed", "3"], Some("11"));
    assert_eq!((v["seed"].as_u64(), v["seed_source"].as_str()), (Some(3), Some("flag")));
}

#[test]
fn config_values_apply_without_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", r#"{"resolution": 6, "group": "SO", "scheme": "exact", "nodes": 16}"#);
    let out = uminimal(&["minimality", "--patch", "umbilical:n=2,q=2,r=1", "--u", "0,0", "--config", &config]);
    let v = json(&out);
    assert_eq!(v["report"]["resolution"], 6);
    assert_eq!(v["report"]["group"], "SO");
    assert_eq!(v["report"]["scheme"], "circle_so2");
    assert_eq!(v["report"]["samples"], 16);
    let bad = write(dir.path(), "bad.json", r#"{"resolutoin": 6}"#);
    assert_eq!(uminimal(&["gallery", "list", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = uminimal(&["gallery", "list", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "gallery list");
}
