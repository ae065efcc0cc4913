use std::process::{Command, Output};

use serde_json::Value;

fn modix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modix")).args(args).env_remove("MODIX_PRECISION").output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn check_schema(v: &Value) {
    for key in ["command", "q", "precision", "status", "diagnostic", "reports"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    for r in v["reports"].as_array().unwrap() {
        for key in ["label", "inputs", "values", "closed_form", "abs_err", "tail_estimate", "stable"] {
            assert!(r.get(key).is_some(), "report missing {key}: {r}");
        }
        assert!(r["stable"].is_boolean());
        assert!(r["values"].is_object());
    }
}

#[test]
fn trace_r_matches_the_closed_form() {
    let out = modix(&["trace-r", "--q", "0.5", "--cutoff", "80"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    check_schema(&v);
    let r = &v["reports"][0];
    assert!(r["abs_err"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["status"], "ok");
}

#[test]
fn index_report_is_self_describing() {
    let out = modix(&["index", "--spin", "1/2", "--cutoff", "20", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    check_schema(&v);
    let r = &v["reports"][0];
    assert_eq!(r["inputs"]["spin"], "1/2");
    assert_eq!(r["values"]["index_numeric"].as_f64().unwrap().round(), -1.0);
    assert!(r["closed_form"].is_f64());
    assert_eq!(r["stable"], true);
}

#[test]
fn lp_suite_passes() {
    let out = modix(&["check", "lp", "--dim", "5", "--trials", "100", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    check_schema(&v);
    for r in v["reports"].as_array().unwrap() {
        assert_eq!(r["values"]["violations"].as_f64(), Some(0.0), "{r}");
    }
}

#[test]
fn output_is_deterministic() {
    for args in [&["local", "--cutoff", "20", "--trials", "4", "--seed", "7"][..], &["podles-chern", "--cutoff", "12", "--trials", "3"][..]] {
        let a = modix(args);
        let b = modix(args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
        let mut seq = args.to_vec();
        seq.push("--sequential");
        assert_eq!(modix(&seq).stdout, a.stdout);
    }
}

#[test]
fn csv_is_a_flat_projection() {
    let out = modix(&["summability", "podles", "--p", "3", "--cutoff", "10", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(&out.stdout[..]);
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["command", "label", "inputs", "quantity", "value", "closed_form", "abs_err", "tail_estimate", "stable"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(rows.iter().all(|r| &r[0] == "summability podles"));
    assert!(rows.iter().any(|r| &r[1] == "total" && &r[3] == "partial_sum"));
}

#[test]
fn invalid_configurations_exit_2() {
    for args in [&["trace-r", "--q", "1.5"][..], &["index", "--spin", "1/3"][..], &["local", "--cutoff", "4"][..], &["index", "--spin", "3"][..]] {
        assert_eq!(modix(args).status.code(), Some(2), "{args:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_modix")).args(["trace-r"]).env("MODIX_PRECISION", "40").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "invalid");
}

#[test]
fn precision_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_modix")).args(["trace-r", "--cutoff", "10"]).env("MODIX_PRECISION", "128").output().unwrap();
    assert_eq!(json(&out)["precision"], 128);
}

#[test]
fn unstable_computation_exits_3_with_a_diagnostic() {
    let out = modix(&["index", "--spin", "1/2", "--cutoff", "20", "--svd-threshold", "0.9"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["status"], "unstable");
    assert!(v["diagnostic"].as_str().unwrap().len() > 10);
}

#[test]
fn output_file() {
    let dir = std::env::temp_dir().join(format!("modix-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("r.json");
    let out = modix(&["check", "cyclic", "--trials", "10", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "check cyclic");
    std::fs::remove_dir_all(&dir).unwrap();
}
