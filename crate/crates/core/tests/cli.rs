use std::process::{Command, Output};

use serde_json::Value;

fn laplace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laplace"))
        .args(args)
        .output()
        .expect("run laplace")
}

fn json(args: &[&str]) -> (String, Value) {
    let out = laplace(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (text, v)
}

const STIRLING: [&str; 8] = ["--phi", "1", "--h", "log(x)-x", "--a", "0", "--b", "inf"];
const GAUSSIAN: [&str; 8] = ["--phi", "1", "--h", "-x^2", "--a", "-inf", "--b", "inf"];

fn with<'a>(cmd: &'a str, problem: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend_from_slice(problem);
    v.extend_from_slice(rest);
    v
}

fn keys(v: &Value) -> Vec<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn json_is_byte_identical_across_runs() {
    let commands = [
        with("approx", &STIRLING, &["--n", "100", "--json"]),
        with("verify", &STIRLING, &["--n-list", "10,100,1000", "--json"]),
        with("prooftrace", &STIRLING, &["--n", "10000", "--json"]),
        with("check", &STIRLING, &["--json"]),
        vec!["demo-stirling", "--n-list", "10,1000", "--json"],
    ];
    for args in &commands {
        let (a, _) = json(args);
        let (b, _) = json(args);
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn object_keys_are_sorted() {
    let (text, v) = json(&with("prooftrace", &GAUSSIAN, &["--n", "64", "--json"]));
    let top = keys(&v);
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
    // Key order in the text itself, not just after parsing.
    let positions: Vec<usize> = sorted
        .iter()
        .map(|k| text.find(&format!("\n  \"{k}\":")).unwrap())
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn approx_schema_and_values() {
    let (_, v) = json(&with("approx", &STIRLING, &["--n", "100", "--json"]));
    assert_eq!(
        keys(&v),
        ["d2m", "estimate", "h0", "log_estimate", "m", "n", "sign", "xi0"]
    );
    let want = -100.0 + 0.5 * (2.0 * std::f64::consts::PI / 100.0).ln();
    assert!((v["log_estimate"].as_f64().unwrap() - want).abs() < 1e-10);

    let (_, v) = json(&with("approx", &GAUSSIAN, &["--n", "4", "--json"]));
    let est = v["estimate"].as_f64().unwrap();
    assert!((est - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);

    // Far outside the double range the estimate is null, the log stays.
    let (_, v) = json(&with("approx", &STIRLING, &["--n", "100000", "--json"]));
    assert!(v["estimate"].is_null());
    assert!(v["log_estimate"].as_f64().unwrap() < -1e5);
}

#[test]
fn verify_stirling_ratios() {
    let (_, v) = json(&with("verify", &STIRLING, &["--n-list", "10,100,1000", "--json"]));
    let rows = v.as_array().unwrap();
    assert_eq!(
        keys(&rows[0]),
        ["abs_ratio_minus_1", "converged", "log_a", "log_i", "n", "ratio"]
    );
    let want = [1.00836, 1.000834, 1.0000833];
    for (row, w) in rows.iter().zip(want) {
        let r = row["ratio"].as_f64().unwrap();
        assert!((r - w).abs() < 1e-5 * w, "{r} vs {w}");
    }
}

#[test]
fn verify_exact_cases() {
    let (_, v) = json(&with("verify", &GAUSSIAN, &["--n-list", "1,2,3,50", "--json"]));
    for row in v.as_array().unwrap() {
        assert!(row["abs_ratio_minus_1"].as_f64().unwrap() <= 1e-9);
    }
    let quartic = ["--phi", "1", "--h", "-x^4", "--a", "-inf", "--b", "inf"];
    let (_, v) = json(&with("verify", &quartic, &["--n-list", "1,16", "--json"]));
    for row in v.as_array().unwrap() {
        assert!(row["abs_ratio_minus_1"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn verify_rejects_unsorted_list() {
    let out = laplace(&with("verify", &STIRLING, &["--n-list", "100,10"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn prooftrace_schema() {
    let (_, v) = json(&with("prooftrace", &GAUSSIAN, &["--n", "64", "--json"]));
    for k in [
        "n", "m", "epsilon", "left_tail", "center", "right_tail", "surrogate_center", "r", "sup_gap",
        "tail_bound", "deficit", "flags",
    ] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert!((v["epsilon"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    let flags = v["flags"].as_object().unwrap();
    assert!(flags.values().all(|f| f.as_bool() == Some(true)), "{flags:?}");
    // φ = 1 is not integrable on the tails of the real line.
    assert_eq!(v["tail_bound"], "inf");
}

#[test]
fn prooftrace_wide_window_proceeds() {
    let (_, v) = json(&with("prooftrace", &STIRLING, &["--n", "2", "--json"]));
    assert!((v["epsilon"].as_f64().unwrap() - 2f64.powf(-1.0 / 6.0)).abs() < 1e-15);
    let out = laplace(&with("prooftrace", &STIRLING, &["--n", "1"]));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("smallest admissible n is 2"), "{err}");
}

#[test]
fn prooftrace_stirling_epsilon() {
    let (_, v) = json(&with("prooftrace", &STIRLING, &["--n", "10000", "--json"]));
    let eps = v["epsilon"].as_f64().unwrap();
    assert!((eps - 10f64.powf(-4.0 / 6.0)).abs() < 1e-15);
    assert!((eps - 0.2154).abs() < 1e-4);
}

#[test]
fn check_reports() {
    let (_, v) = json(&with("check", &STIRLING, &["--json"]));
    assert_eq!(keys(&v), ["c1", "c3", "c4", "c5"]);
    assert_eq!(keys(&v["c1"]), ["detail", "pass", "status", "worst_witness"]);
    assert_eq!(v["c1"]["status"], "warn");
    for c in ["c3", "c4", "c5"] {
        assert_eq!(v[c]["status"], "pass");
    }

    let (_, v) = json(&with("check", &GAUSSIAN, &["--json"]));
    for c in ["c3", "c4", "c5"] {
        assert_eq!(v[c]["status"], "pass");
    }

    let wiggle = ["--phi", "1", "--h", "-x^2+0.5*sin(8*x)", "--a", "-5", "--b", "5"];
    let (_, v) = json(&with("check", &wiggle, &["--json"]));
    let failed: Vec<&str> = ["c3", "c4"].into_iter().filter(|c| v[*c]["status"] == "fail").collect();
    assert!(!failed.is_empty());
    for c in failed {
        assert!(v[c]["worst_witness"].as_f64().is_some());
    }
}

#[test]
fn strict_exit_codes() {
    assert_eq!(laplace(&with("check", &STIRLING, &[])).status.code(), Some(0));
    assert_eq!(laplace(&with("check", &STIRLING, &["--strict"])).status.code(), Some(2));
    assert_eq!(laplace(&with("check", &GAUSSIAN, &["--strict"])).status.code(), Some(2));
    let wiggle = ["--phi", "1", "--h", "-x^2+0.5*sin(8*x)", "--a", "-5", "--b", "5"];
    let out = laplace(&with("approx", &wiggle, &["--n", "10"]));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning:"));
    assert_eq!(laplace(&with("approx", &wiggle, &["--n", "10", "--strict"])).status.code(), Some(2));
    // A warning alone does not fail approx under --strict.
    assert_eq!(laplace(&with("approx", &STIRLING, &["--n", "10", "--strict"])).status.code(), Some(0));
}

#[test]
fn demo_stirling_converges() {
    let (_, v) = json(&["demo-stirling", "--n-list", "10,100,1000,10000", "--json"]);
    let ratios: Vec<f64> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["ratio"].as_f64().unwrap())
        .collect();
    assert!((ratios[0] - 1.00836).abs() < 1e-5);
    assert!((ratios[2] - 1.0000833).abs() < 1e-7);
    assert!(ratios.windows(2).all(|w| w[1] < w[0] && w[1] > 1.0));
    let out = laplace(&["demo-stirling"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("2.5"));
}

#[test]
fn bad_input_is_a_one_line_error() {
    for args in [
        with("approx", &["--phi", "1", "--h", "exp(", "--a", "0", "--b", "1"], &["--n", "1"]),
        with("approx", &["--phi", "1", "--h", "tan(x)", "--a", "0", "--b", "1"], &["--n", "1"]),
        with("approx", &["--phi", "1", "--h", "x^3", "--a", "-1", "--b", "1"], &["--n", "1"]),
        with("approx", &["--phi", "1", "--h", "x^2", "--a", "-1", "--b", "1"], &["--n", "1"]),
        with("approx", &["--phi", "1", "--h", "-x^2", "--a", "1", "--b", "-1"], &["--n", "1"]),
        with("approx", &STIRLING, &["--n", "0"]),
    ] {
        let out = laplace(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error:"));
    }
}
