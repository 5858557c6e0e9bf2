use std::process::Command;

use avalanche::harness::cli::{run, EXIT_OK, EXIT_STRICT, EXIT_USAGE};
use avalanche::harness::ResultRecord;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("avalanche").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn record(args: &[&str]) -> ResultRecord {
    let (code, out, err) = invoke(args);
    assert_eq!(code, EXIT_OK, "{err}");
    ResultRecord::from_jsonl(&out).unwrap()
}

#[test]
fn sample_is_reproducible() {
    let a = record(&["sample", "--l", "0", "--samples", "1", "--seed", "7"]);
    let b = record(&["sample", "--l", "0", "--samples", "1", "--seed", "7"]);
    assert!(a.same_payload(&b));
    assert_eq!(a.columns, ["replica", "config", "T", "domain_width"]);
    assert_eq!(a.rows.len(), 1);
    assert_eq!(a.schema_version, 1);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let status = Command::new(env!("CARGO_BIN_EXE_avalanche"))
        .args(["sample", "--no-such-flag"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    assert_eq!(invoke(&["no-such-command"]).0, EXIT_USAGE);
}

#[test]
fn meanfield_reports_g() {
    let r = record(&["meanfield", "--K", "10000"]);
    let g = r.summary["g"].as_f64().unwrap();
    assert!((g - 1.4458).abs() < 5e-4);
    assert_eq!(r.rows.len(), 10_000);
}

#[test]
fn y1_mean_is_negative() {
    let r = record(&["y1", "--samples", "1000000", "--workers", "4"]);
    let ci = r.summary["ci3"].as_array().unwrap();
    assert!(ci[1].as_f64().unwrap() < 0.0, "{}", r.summary);
}

#[test]
fn budget_overrun_is_a_warning() {
    let args = ["sample", "--l", "4", "--samples", "50", "--budget", "1"];
    let (code, out, err) = invoke(&args);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("budget"));
    assert!(!ResultRecord::from_jsonl(&out).unwrap().warnings.is_empty());
    let strict: Vec<&str> = args.iter().copied().chain(["--strict"]).collect();
    assert_eq!(invoke(&strict).0, EXIT_STRICT);
}

#[test]
fn csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let (code, out, _) = invoke(&["meanfield", "--K", "5", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next().unwrap(), "k,a_k,c_k");
    assert_eq!(lines.count(), 5);
}

#[test]
fn forward_dump_fields() {
    let r = record(&["forward", "--radius", "3", "--events", "25", "--eta", "zeta", "--seed", "9"]);
    assert_eq!(r.columns, ["ordinal", "site", "color", "time", "changed_sites"]);
    assert_eq!(r.rows.len(), 25);
    for key in ["zeta0", "eta0", "zeta", "eta", "events"] {
        assert!(r.summary.get(key).is_some(), "{key}");
    }
    let timed = record(&["forward", "--radius", "3", "--time", "2.0"]);
    assert!(timed.rows.iter().all(|row| row[3].as_f64().unwrap() <= 2.0));
}

#[test]
fn other_subcommands_run() {
    for args in [
        vec!["contour", "--replicas", "200", "--stat", "r-max"],
        vec!["cluster-stats", "--samples", "200"],
        vec!["compare", "--samples", "200", "--K", "200"],
        vec!["mixing", "--n", "1,2", "--samples", "500"],
        vec!["tte", "--t", "0.5", "--samples", "500", "--radius", "10"],
        vec!["bench", "--l", "2", "--samples", "200"],
    ] {
        let r = record(&args);
        assert_eq!(r.subcommand, args[0]);
    }
}
