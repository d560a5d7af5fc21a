use std::process::Command;

use serde_json::Value;
use selfsim::cli::{run, EXIT_OK, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["selfsim"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = call(args);
    assert_eq!(code, EXIT_OK, "{args:?}: {err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn decide_examples() {
    let v = json(&["decide", "--p", "4", "--N", "2", "--L", "2", "--m", "8"]);
    assert_eq!(v["result"]["spectral"], true);
    assert_eq!(v["result"]["d"], 1);
    assert_eq!(v["config"]["command"]["command"], "decide");

    let v = json(&["decide", "--p", "72", "--N", "12", "--L", "4", "--m", "7"]);
    assert_eq!(v["result"]["spectral"], false);
}

#[test]
fn zero_m_is_a_usage_error_naming_the_flag() {
    let (code, _, err) = call(&["decide", "--p", "4", "--N", "2", "--L", "2", "--m", "0"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--m"), "{err}");
}

#[test]
fn scan_single_and_empty_ranges() {
    let (code, out, _) = call(&["scan", "--p", "4", "--N", "2", "--L", "2", "--m", "8..8"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["m"], 8);
    assert_eq!(lines[1]["summary"]["spectral"], 1);

    let (code, _, err) = call(&["scan", "--p", "4", "--N", "2", "--L", "2", "--m", "5..4"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("empty range"), "{err}");
}

#[test]
fn scan_csv_has_rows_and_summary() {
    let (code, out, _) = call(&["scan", "--p", "144", "--N", "12", "--L", "4", "--m", "1..100", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let mut r = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 101);
    let spectral: Vec<u64> = rows[..100]
        .iter()
        .filter(|r| &r[5] == "true")
        .map(|r| r[4].parse().unwrap())
        .collect();
    let expected: Vec<u64> = (1..=100).filter(|&m| selfsim::cli::closed_form_p144(m)).collect();
    assert_eq!(spectral, expected);
    assert_eq!(&rows[100][0], "summary");
    assert_eq!(rows[100][5], expected.len().to_string());
}

#[test]
fn spectrum_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let path_s = path.to_str().unwrap();
    let v = json(&["spectrum", "--p", "4", "--N", "2", "--L", "2", "--m", "8", "--levels", "3", "--output", path_s]);
    assert_eq!(v["size"], 128);
    assert_eq!(v["status"], "verified-orthogonal/completeness-probed");

    let doc = selfsim::cli::read_spectrum_doc(&path).unwrap();
    assert_eq!(doc.lambda.len(), 128);
    assert_eq!(doc.lambda[1].to_string(), "1/4");
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let strings: Vec<String> = raw["result"]["lambda"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap().to_string())
        .collect();
    let reprinted: Vec<String> = doc.lambda.iter().map(|l| l.to_string()).collect();
    assert_eq!(strings, reprinted);

    let csv_path = dir.path().join("q.csv");
    let v = json(&["verify", "--input", path_s, "--q-csv", csv_path.to_str().unwrap(), "--grid-points", "16"]);
    assert_eq!(v["result"]["report"]["orthogonal_failure_count"], 0);
    assert_eq!(v["result"]["report"]["orthogonal_pairs_checked"], 128 * 127 / 2);
    assert!(v["result"]["report"]["q_max"].as_f64().unwrap() <= 1.0 + 1e-6);
    let q = std::fs::read_to_string(csv_path).unwrap();
    assert_eq!(q.lines().count(), 17);
    assert!(q.starts_with("x,q\n0,1\n"));
}

#[test]
fn verify_reports_missing_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let (code, _, err) = call(&["verify", "--input", missing.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("missing.json"), "{err}");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"result\": {\n    \"metadata\": {\"p\": 4, \"N\": 2, \"L\": 2, \"m\": 8, \"d\": 1, \"levels\": 1, \"size\": 1},\n    \"lambda\": [\"0\", \"1/0\"]\n  }\n}\n").unwrap();
    let (code, _, err) = call(&["verify", "--input", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn tile_non_tile_with_witness() {
    let v = json(&["tile", "--N", "2", "--L", "2", "--m", "3", "--max-k", "5"]);
    let r = &v["result"];
    assert_eq!(r["arithmetic_tile"], false);
    assert_eq!(r["collision_witness"]["k"], 2);
    assert_eq!(r["agreement"], "consistent");
}

#[test]
fn zeros_membership() {
    let v = json(&["zeros", "--p", "4", "--N", "2", "--L", "2", "--m", "8", "--xi", "1/4"]);
    assert_eq!(v["result"]["member"], true);
    let v = json(&["zeros", "--p", "4", "--N", "2", "--L", "2", "--m", "8", "--xi", "1/3"]);
    assert_eq!(v["result"]["member"], false);
    let (code, _, _) = call(&["zeros", "--p", "4", "--N", "2", "--L", "2", "--m", "1", "--xi", "1/4"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn hadamard_command() {
    let v = json(&["hadamard", "--p", "144", "--N", "12", "--L", "4", "--m", "12"]);
    assert_eq!(v["result"]["hadamard"]["holds"], true);
    assert_eq!(v["result"]["gcd_certificate"], true);
    let v = json(&["hadamard", "--p", "72", "--N", "12", "--L", "4", "--m", "7"]);
    assert_eq!(v["result"]["spectral"], false);
    assert!(v["result"]["hadamard"].is_null());
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = ["spectrum", "--p", "144", "--N", "12", "--L", "4", "--m", "12", "--levels", "1", "--seed", "7"];
    assert_eq!(call(&args), call(&args));
    let args = ["tile", "--N", "3", "--L", "2", "--m", "5"];
    assert_eq!(call(&args), call(&args));
}

#[test]
fn sequential_flag_changes_only_the_config() {
    let args = ["spectrum", "--p", "4", "--N", "2", "--L", "2", "--m", "8", "--levels", "2"];
    let a = json(&args);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let b = json(&seq);
    assert_eq!(a["result"], b["result"]);
    assert_eq!(b["config"]["sequential"], true);
}

#[test]
fn examples_command_passes() {
    let (code, out, err) = call(&["examples", "--format", "text"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn binary_exit_codes_and_environment_budget() {
    let bin = env!("CARGO_BIN_EXE_selfsim");
    let ok = Command::new(bin)
        .args(["decide", "--p", "4", "--N", "2", "--L", "2", "--m", "8"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));

    let bad = Command::new(bin)
        .args(["decide", "--p", "4", "--N", "2", "--L", "2", "--m", "0"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));

    let out = Command::new(bin)
        .args(["tile", "--N", "2", "--L", "2", "--m", "8"])
        .env("SELFSIM_WORD_BUDGET", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["command"]["budget"], 100);
    assert_eq!(v["result"]["budget_exhausted"], true);
    assert_eq!(v["result"]["distinct_sums_ok_through"], 3);
}
