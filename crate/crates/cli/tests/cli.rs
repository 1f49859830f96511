//! End-to-end checks of the `qnr` binary: envelope schema, exit codes,
//! atomic file output, and the prime cache.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qnr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnr"))
        .args(args)
        .env_remove("QNR_PRIME_CACHE")
        .output()
        .expect("binary runs")
}

fn envelope(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is one JSON envelope")
}

/// Every command emits the same envelope shape.
fn check_envelope_schema(env: &Value, command: &str) {
    let obj = env.as_object().unwrap();
    assert_eq!(obj["command"], command);
    assert!(obj["params"].is_object());
    assert!(obj.contains_key("result"));
    assert_eq!(obj["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn nkp_examples_and_exit_codes() {
    let out = qnr(&["nkp", "--p", "7", "--k", "2"]);
    let env = envelope(&out);
    check_envelope_schema(&env, "nkp");
    assert_eq!(env["result"]["values"], serde_json::json!([3, 5]));

    let env = envelope(&qnr(&["nkp", "--p", "3", "--k", "1"]));
    assert_eq!(env["result"]["values"], serde_json::json!([2]));

    // Composite p is bad input.
    let out = qnr(&["nkp", "--p", "4", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown flag: clap also exits 2.
    let out = qnr(&["nkp", "--nope", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn series_commands_report_published_digits() {
    let env = envelope(&qnr(&["series", "mu", "--k", "1", "--eps", "1e-6"]));
    check_envelope_schema(&env, "series mu");
    let v = env["result"]["value"].as_f64().unwrap();
    assert!((3.674..3.675).contains(&v));
    assert!(env["result"]["tail_bound"].as_f64().unwrap() <= 1e-6);

    let env = envelope(&qnr(&["series", "gap", "--z", "3/2", "--eps", "1e-6"]));
    let c = env["result"]["complement"].as_f64().unwrap();
    assert!((0.350..0.351).contains(&c));

    let env = envelope(&qnr(&["series", "mavg", "--eps", "5e-4"]));
    let v = env["result"]["value"].as_f64().unwrap();
    assert!((2.504..2.505).contains(&v));

    let env = envelope(&qnr(&[
        "series",
        "binom-identity",
        "--k",
        "5",
        "--nmax",
        "200",
    ]));
    assert!(env["result"]["deviation_from_two"].as_f64().unwrap().abs() < 1e-10);

    let env = envelope(&qnr(&["series", "ratio", "--k", "1"]));
    assert_eq!(env["result"]["p_2k"], 3);
}

#[test]
fn series_rejects_bad_parameters() {
    assert_eq!(
        qnr(&["series", "mu", "--k", "1", "--eps", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(qnr(&["series", "mu", "--k", "0"]).status.code(), Some(2));
    assert_eq!(qnr(&["series", "gap", "--z", "abc"]).status.code(), Some(2));
    // z must exceed 1.
    assert_eq!(qnr(&["series", "gap", "--z", "1"]).status.code(), Some(2));
    assert_eq!(qnr(&["series", "gap", "--z", "2/3"]).status.code(), Some(2));
}

#[test]
fn scan_examples() {
    let env = envelope(&qnr(&["scan", "--x", "1000", "--kmax", "2"]));
    check_envelope_schema(&env, "scan");
    assert_eq!(env["result"]["scan"]["primes_scanned"], 167);

    let env = envelope(&qnr(&["scan", "--x", "10", "--kmax", "1"]));
    assert_eq!(env["result"]["scan"]["sum_nk"], serde_json::json!([7]));

    // Scientific notation plus two thresholds: both keys appear.
    let env = envelope(&qnr(&[
        "scan", "--x", "1e4", "--kmax", "2", "--z", "3/2", "--z", "2",
    ]));
    let gaps = env["result"]["scan"]["gap_counts"].as_object().unwrap();
    assert!(gaps.contains_key("3/2"));
    assert!(gaps.contains_key("2/1"));
    let scanned = env["result"]["scan"]["primes_scanned"].as_u64().unwrap();
    for count in gaps.values() {
        assert!(count.as_u64().unwrap() <= scanned);
    }
}

#[test]
fn scan_result_json_schema_is_stable() {
    let env = envelope(&qnr(&[
        "scan",
        "--x",
        "500",
        "--kmax",
        "2",
        "--z",
        "3/2",
        "--pattern-n",
        "2",
    ]));
    let scan = env["result"]["scan"].as_object().unwrap();
    for key in [
        "primes_scanned",
        "sum_nk",
        "sum_m",
        "gap_counts",
        "pattern_counts",
        "max_m",
    ] {
        assert!(scan.contains_key(key), "missing {key}");
    }
    assert!(scan["max_m"]["p"].is_u64());
    assert!(scan["max_m"]["m"].is_u64());
    for key in scan["pattern_counts"].as_object().unwrap().keys() {
        assert_eq!(key.len(), 2);
        assert!(key.chars().all(|c| c == '+' || c == '-'));
    }
    for row in env["result"]["summary"].as_array().unwrap() {
        for key in ["stat_name", "empirical", "theoretical", "abs_err"] {
            assert!(row.get(key).is_some(), "summary row missing {key}");
        }
    }
}

#[test]
fn scan_writes_json_and_csv_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let env = envelope(&qnr(&[
        "scan",
        "--x",
        "1000",
        "--kmax",
        "1",
        "--z",
        "3/2",
        "--out",
        prefix.to_str().unwrap(),
    ]));

    let json_path = prefix.with_extension("json");
    let csv_path = prefix.with_extension("csv");
    assert!(json_path.exists() && csv_path.exists());
    // No leftover temp files from the write-then-rename.
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name();
            name != *"run.json" && name != *"run.csv"
        })
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");

    // The file holds exactly the scan result from the envelope.
    let file_json: Value = serde_json::from_slice(&std::fs::read(&json_path).unwrap()).unwrap();
    assert_eq!(file_json, env["result"]["scan"]);

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x,stat_name,empirical,theoretical,abs_err"
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with("1000,mean_nk_1,"), "{first}");
    assert_eq!(first.split(',').count(), 5);
}

#[test]
fn scan_unwritable_out_path_exits_3() {
    let out = qnr(&["scan", "--x", "100", "--out", "/nonexistent-dir/deep/run"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn scan_rejects_bad_input() {
    assert_eq!(qnr(&["scan", "--x", "2"]).status.code(), Some(2));
    assert_eq!(
        qnr(&["scan", "--x", "10", "--z", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qnr(&["scan", "--x", "1e3", "--pattern-n", "21"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn scan_theoretical_column_matches_series_output() {
    let env = envelope(&qnr(&["scan", "--x", "1000", "--kmax", "1", "--z", "2"]));
    let summary = env["result"]["summary"].as_array().unwrap();
    let mu_theory = summary[0]["theoretical"].as_f64().unwrap();
    let series = envelope(&qnr(&["series", "mu", "--k", "1", "--eps", "1e-9"]));
    assert_eq!(mu_theory, series["result"]["value"].as_f64().unwrap());

    let gap_theory = summary
        .iter()
        .find(|r| r["stat_name"] == "gap_gt_2/1")
        .unwrap()["theoretical"]
        .as_f64()
        .unwrap();
    let series = envelope(&qnr(&["series", "gap", "--z", "2", "--eps", "1e-9"]));
    assert_eq!(gap_theory, series["result"]["value"].as_f64().unwrap());
}

#[test]
fn pattern_examples_and_overflow_guard() {
    let env = envelope(&qnr(&["pattern", "--eps", "-", "--limit", "100"]));
    check_envelope_schema(&env, "pattern");
    assert_eq!(env["result"]["q"], 8);
    assert_eq!(env["result"]["classes"], serde_json::json!([3, 5]));
    assert_eq!(env["result"]["prime"], 3);
    assert_eq!(env["result"]["class_count"], env["result"]["phi_q_over_2n"]);

    let out = qnr(&["pattern", "--eps", "++++++++++++++++++"]); // n = 18
    assert_eq!(out.status.code(), Some(4));

    let out = qnr(&["pattern", "--eps", "+x+"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn largem_example() {
    let env = envelope(&qnr(&["largem", "--y", "20", "--limit", "1e8"]));
    check_envelope_schema(&env, "largem");
    assert_eq!(env["result"]["guarantee"], 7);
    assert!(env["result"]["m_value"].as_u64().unwrap() >= 7);
    for key in [
        "y",
        "q",
        "m_index",
        "n_index",
        "prime",
        "m_value",
        "guarantee",
    ] {
        assert!(env["result"].get(key).is_some(), "missing {key}");
    }

    assert_eq!(qnr(&["largem", "--y", "3"]).status.code(), Some(2));
}

#[test]
fn prime_cache_round_trips_through_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("primes.qnr");

    let run = |args: &[&str], cache: &Path| {
        Command::new(env!("CARGO_BIN_EXE_qnr"))
            .args(args)
            .env("QNR_PRIME_CACHE", cache)
            .output()
            .expect("binary runs")
    };

    // First run sieves and saves.
    let out = run(&["scan", "--x", "50000", "--kmax", "1"], &cache);
    assert!(out.status.success());
    assert!(cache.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("saved prime cache"));

    // Second run loads it and produces identical output.
    let out2 = run(&["scan", "--x", "50000", "--kmax", "1"], &cache);
    assert!(out2.status.success());
    assert!(String::from_utf8_lossy(&out2.stderr).contains("loaded prime cache"));
    assert_eq!(out.stdout, out2.stdout);

    // A corrupt cache is ignored with a warning, not a failure.
    std::fs::write(&cache, b"garbage").unwrap();
    let out3 = run(&["nkp", "--p", "7"], &cache);
    assert!(out3.status.success());
    assert!(String::from_utf8_lossy(&out3.stderr).contains("ignoring invalid prime cache"));
}
