use std::process::{Command, Output};

use serde_json::Value;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap()
}

fn reports(out: &Output) -> Vec<Value> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice::<Value>(&out.stdout).unwrap().as_array().unwrap().clone()
}

fn without_times(mut v: Vec<Value>) -> Vec<Value> {
    for r in &mut v {
        r.as_object_mut().unwrap().remove("times");
    }
    v
}

#[test]
fn solve_reports_both_paths() {
    let r = reports(&bench(&["solve", "--n", "10"]));
    assert_eq!(r.len(), 2);
    assert_eq!(r[0]["case"], "solve/scalar");
    assert_eq!(r[1]["case"], "solve/dsl");
    assert_eq!(r[1]["statements"], 1);
    assert!(r[0]["statements"].as_u64().unwrap() >= 1000);
    for rep in &r {
        for key in ["config", "rhsIds", "constants", "bytesByStream"] {
            assert!(rep.get(key).is_some(), "missing {key}");
        }
        assert_eq!(rep["gradCheck"]["pass"], true);
        assert!(rep["times"]["record_s"].is_number());
        assert!(rep["times"]["reverse_s"].is_number());
        assert!(rep["bytesByStream"]["tape"].as_u64().unwrap() > 0);
    }
}

#[test]
fn burgers_check_grad_exit_status() {
    let out = bench(&["burgers", "--grid", "21", "--steps", "8", "--check-grad"]);
    let r = reports(&out);
    assert_eq!(r[0]["statements"], 2 * 19 * 19 * 8);
    assert_eq!(r[0]["gradCheck"]["pass"], true);
    assert_eq!(r[0]["config"]["cflViolation"], false);
}

#[test]
fn invalid_flags_exit_one() {
    for args in [
        &["burgers", "--grid", "2"][..],
        &["burgers", "--steps", "many"],
        &["spline", "--precision", "f64"],
        &["solve", "--precision", "f32"],
        &["solve", "--n", "0"],
        &["--repetitions", "0", "solve"],
        &["frobnicate"],
        &["solve", "--bogus"],
        &["burgers", "--grid", "9", "--steps", "400"],
    ] {
        let out = bench(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(bench(&["--help"]).status.code(), Some(0));
}

#[test]
fn fixed_seed_is_reproducible() {
    let args = ["spline", "--regions", "4", "--samples", "3000", "--batch", "1000", "--seed", "9"];
    let a = without_times(reports(&bench(&args)));
    let b = without_times(reports(&bench(&args)));
    assert_eq!(a, b);
    assert!(a[1]["statements"].as_u64() < a[0]["statements"].as_u64());
    let c = without_times(reports(&bench(&["solve", "--n", "4", "--seed", "3", "--repetitions", "3"])));
    let d = without_times(reports(&bench(&["solve", "--n", "4", "--seed", "3"])));
    assert_eq!(c, d);
}

#[test]
fn writes_csv_and_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let json = dir.path().join("r.json");
    let out = bench(&[
        "solve", "--n", "3", "--csv", csv.to_str().unwrap(), "--json", json.to_str().unwrap(), "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
    let parsed: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 2);
}

#[test]
fn replicated_mode_runs_independent_tapes() {
    let r = without_times(reports(&bench(&["burgers", "--grid", "9", "--steps", "2", "--threads", "3"])));
    assert_eq!(r.len(), 3);
    for (t, rep) in r.iter().enumerate() {
        assert_eq!(rep["case"], format!("burgers#{t}"));
        assert_eq!(rep["statements"], r[0]["statements"]);
        assert_eq!(rep["bytesByStream"], r[0]["bytesByStream"]);
    }
}
