use std::process::{Command, Output};

use serde_json::Value;

fn lrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrl")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn spectrum_spin_half_balmer_like() {
    let out = lrl(&["spectrum", "--spin", "1", "--levels", "3"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["schema"], "lrl/1");
    let e: Vec<f64> = doc["entries"].as_array().unwrap().iter().map(|r| r["E"].as_f64().unwrap()).collect();
    let want = [-2.0 / 9.0, -2.0 / 25.0, -2.0 / 49.0];
    assert_eq!(e.len(), 3);
    for (g, w) in e.iter().zip(want) {
        assert!(rel(*g, w) < 1e-15, "{g} vs {w}");
    }
}

#[test]
fn spectrum_spin1_has_n2_level_and_csv_columns() {
    let out = lrl(&["spectrum", "--spin", "2", "--levels", "2", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "branch,N,k,E,rep_l0,rep_l1,degeneracy");
    let hit = lines.any(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f[1].parse::<f64>().unwrap() == 2.0 && f[3].parse::<f64>().unwrap() == -0.125
    });
    assert!(hit, "{text}");
}

#[test]
fn uncovered_spin_is_not_derived() {
    for args in [
        vec!["spectrum", "--spin", "4"],
        vec!["solve", "--spin", "5", "--j", "5/2"],
        vec!["verify", "--suite", "multipole", "--spin", "4"],
    ] {
        let out = lrl(&args);
        assert_eq!(code(&out), 3, "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(String::from_utf8_lossy(&out.stderr).contains("not derived in paper"));
    }
}

#[test]
fn invalid_config_exits_2_without_output() {
    for args in [
        vec!["solve", "--spin", "3", "--j", "3"],
        vec!["solve", "--spin", "2", "--j", "1", "--mass", "-1"],
        vec!["spectrum", "--spin", "1", "--format", "xml"],
        vec!["solve", "--spin", "2", "--j", "1", "--points", "10"],
        vec!["solve", "--spin", "2", "--l", "1"],
        vec!["verify", "--spin", "1"],
    ] {
        let out = lrl(&args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn verify_suites_pass() {
    for args in [
        vec!["verify", "--suite", "commutators", "--spin", "3"],
        vec!["verify", "--suite", "algebra", "--spin", "12"],
        vec!["verify", "--suite", "reduction", "--spin", "3", "--twice-j", "3"],
        vec!["verify", "--suite", "casimir", "--spin", "1"],
        vec!["verify", "--suite", "multipole", "--spin", "2"],
    ] {
        let out = lrl(&args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
        let doc = json(&out);
        assert_eq!(doc["pass"], true);
        assert!(!doc["checks"].as_array().unwrap().is_empty());
    }
    let doc = json(&lrl(&["verify", "--suite", "commutators", "--spin", "3"]));
    for c in doc["checks"].as_array().unwrap() {
        assert!(c["residual"].as_f64().unwrap() < 1e-9);
    }
}

#[test]
fn failed_verify_exits_1_with_full_report() {
    let out = lrl(&["verify", "--suite", "algebra", "--spin", "24"]);
    assert_eq!(code(&out), 1);
    let doc = json(&out);
    assert_eq!(doc["pass"], false);
    assert_eq!(doc["checks"].as_array().unwrap().len(), 9);
}

#[test]
fn hydrogen_solve() {
    let out = lrl(&["solve", "--spin", "0", "--l", "0", "--levels", "3"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    let levels = doc["levels"].as_array().unwrap();
    for (lv, w) in levels.iter().zip([-0.5, -0.125, -1.0 / 18.0]) {
        assert!(rel(lv["energy"].as_f64().unwrap(), w) < 1e-3);
    }
}

#[test]
fn spin32_solve_shows_both_families() {
    let out = lrl(&["solve", "--spin", "3", "--j", "3/2", "--levels", "6"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    let levels = doc["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 6);
    let branches: Vec<&str> = levels.iter().map(|l| l["branch"].as_str().unwrap()).collect();
    assert!(branches.contains(&"A") && branches.contains(&"B"), "{branches:?}");
    for l in levels {
        assert!(rel(l["energy"].as_f64().unwrap(), l["predicted_energy"].as_f64().unwrap()) < 1e-3);
    }
}

#[test]
fn empty_spectrum_exits_4_with_empty_table() {
    let out = lrl(&["solve", "--spin", "2", "--j", "1", "--alpha", "-1", "--points", "400"]);
    assert_eq!(code(&out), 4);
    assert!(json(&out)["levels"].as_array().unwrap().is_empty());
    let out = lrl(&["spectrum", "--spin", "1", "--alpha", "-0.5", "--format", "csv"]);
    assert_eq!(code(&out), 4);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "branch,N,k,E,rep_l0,rep_l1,degeneracy\r\n");
}

fn parse_grid_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn spin1_eigenfunction_csv() {
    let out = lrl(&["eigenfunction", "--spin", "2", "--j", "1", "--n", "0", "--points", "4000"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let (header, rows) = parse_grid_csv(&text);
    assert_eq!(header, ["r", "channel_0", "channel_1", "channel_2"]);
    assert!(rows.iter().all(|r| r[2] == 0.0));
    assert!(rows.iter().any(|r| r[1].abs() > 1e-3) && rows.iter().any(|r| r[3].abs() > 1e-3));
    // unit norm in r by the trapezoid rule
    let h = rows[1][0] - rows[0][0];
    let norm: f64 = rows.iter().map(|r| (r[1] * r[1] + r[3] * r[3]) * h).sum();
    assert!((norm - 1.0).abs() < 1e-6, "{norm}");
    // every float carries 17 significant digits
    let first = text.lines().nth(1).unwrap();
    for field in first.split(',') {
        let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{field}");
    }
}

#[test]
fn numeric_eigenfunction_matches_spectrum() {
    let out = lrl(&["eigenfunction", "--spin", "1", "--j", "1/2", "--n", "1", "--format", "json", "--points", "3000"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["method"], "finite-difference");
    assert!(rel(doc["energy"].as_f64().unwrap(), -0.08) < 1e-3);
    assert_eq!(doc["channels"].as_array().unwrap().len(), 2);
}

#[test]
fn output_is_deterministic_across_runs_and_threads() {
    for args in [
        vec!["verify", "--suite", "commutators", "--spin", "2", "--seed", "9"],
        vec!["solve", "--spin", "2", "--j", "2", "--levels", "2", "--points", "2000", "--format", "csv"],
        vec!["spectrum", "--spin", "3", "--levels", "8"],
    ] {
        let a = lrl(&args);
        let b = lrl(&args);
        let mut single = vec!["--threads", "1"];
        single.extend(&args);
        let c = lrl(&single);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.stdout, c.stdout, "{args:?}");
    }
}
