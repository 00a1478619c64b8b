use std::process::{Command, Output};

use serde_json::Value;

fn pyramid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pyramid")).args(args).output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

#[test]
fn tabulate_counts() {
    let o = pyramid(&["tabulate", "--form", "0", "--order", "1"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["functions"].as_array().unwrap().len(), 5);
    let o = pyramid(&["tabulate", "--form", "3", "--order", "2"]);
    assert_eq!(json(&o)["dimension"], 8);
}

#[test]
fn tabulate_is_deterministic_and_reloads() {
    let a = pyramid(&["tabulate", "--form", "1", "--order", "2"]);
    let b = pyramid(&["tabulate", "--form", "1", "--order", "2"]);
    assert_eq!(a.stdout, b.stdout);
    let set = pyramid_fe::spaces::BasisSet::from_json(&json(&a)).unwrap();
    let direct = pyramid_fe::spaces::basis(1, 2).unwrap();
    assert_eq!(set.len(), direct.len());
    for (x, y) in set.functions.iter().zip(&direct.functions) {
        assert_eq!(x.finite, y.finite);
        assert_eq!(x.infinite, y.infinite);
        assert_eq!(x.label(), y.label());
    }
}

#[test]
fn apex_values_and_row_errors() {
    let dir = std::env::temp_dir().join(format!("pyramid-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let pts = dir.join("points.csv");
    std::fs::write(&pts, "xi,eta,zeta\n0,0,1\n1/2,1/4,1/5\n").unwrap();
    let o = pyramid(&["tabulate", "--form", "1", "--order", "1", "--points", pts.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let vals = v["values"].as_array().unwrap();
    let apex: Vec<&Value> = vals.iter().filter(|r| r["point"][2] == "1/1").collect();
    assert!(apex.iter().any(|r| r["status"] == "trace-only"));
    assert!(apex.iter().any(|r| r["status"] == "ok"));
    // scalar functions have apex limits
    let o = pyramid(&["tabulate", "--form", "0", "--order", "2", "--points", pts.to_str().unwrap()]);
    assert!(json(&o)["values"].as_array().unwrap().iter().all(|r| r["status"] == "ok"));

    std::fs::write(&pts, "2,0,0\n0.25,0.25,0.25\n").unwrap();
    let o = pyramid(&["tabulate", "--form", "0", "--order", "1", "--points", pts.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",error,"));
    assert!(text.lines().last().unwrap().contains(",ok,"));
}

#[test]
fn vandermonde_exports() {
    let v = json(&pyramid(&["vandermonde", "--form", "0", "--order", "1"]));
    let e = v["entries"].as_array().unwrap();
    for (i, row) in e.iter().enumerate() {
        for (j, x) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(x, if i == j { "1/1" } else { "0/1" });
        }
    }
    let v = json(&pyramid(&["vandermonde", "--form", "3", "--order", "1"]));
    assert_eq!(v["entries"], serde_json::json!([["1/3"]]));
    let v = json(&pyramid(&["vandermonde", "--form", "1", "--order", "2"]));
    assert_eq!(v["entries"].as_array().unwrap().len(), 34);
    assert_ne!(v["determinant"], "0/1");
    let csv = pyramid(&["vandermonde", "--form", "2", "--order", "1", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("dof,"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(pyramid(&["tabulate", "--form", "4", "--order", "1"]).status.code(), Some(2));
    assert_eq!(pyramid(&["tabulate", "--form", "0", "--order", "0"]).status.code(), Some(2));
    assert_eq!(pyramid(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pyramid(&["tabulate", "--form", "0", "--order", "1", "--points", "/nonexistent.csv"]).status.code(), Some(2));
}

#[test]
fn verify_lowest_order() {
    let o = pyramid(&["verify", "--max-order", "1", "--counterexample-degree", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let checks = v["checks"].as_array().unwrap();
    let h = checks.iter().find(|c| c["name"] == "helmholtz").unwrap();
    assert_eq!(h["status"], "skipped");
}

#[test]
fn verify_corrupted_basis_fails() {
    let o = pyramid(&["verify", "--max-order", "1", "--counterexample-degree", "4", "--corrupt-basis", "--format", "text"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unisolvency"));
}

#[test]
fn counterexample_command() {
    let o = pyramid(&["counterexample", "--counterexample-degree", "8"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["status"], "pass");
    assert_eq!(v["witness"]["polynomial_exists"], false);
}
