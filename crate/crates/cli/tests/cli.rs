mod common;

use std::collections::BTreeMap;
use std::path::Path;

use common::*;
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use tensql::kernels::BackendKind;

fn digests(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let hash = Sha256::digest(std::fs::read(&p).unwrap());
            (p.file_name().unwrap().to_string_lossy().into_owned(), format!("{hash:x}"))
        })
        .collect()
}

fn gen(dir: &Path, scale: &str, seed: &str) {
    let (code, _, err) = cli(&["gen", "--scale", scale, "--seed", seed, "--out", dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
}

fn single_value(csv: &str) -> f64 {
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    lines[1].parse().unwrap()
}

fn run(args: &[&str]) -> String {
    let (code, out, err) = cli(args);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn gen_is_byte_identical_for_a_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    gen(a.path(), "0.001", "7");
    gen(b.path(), "0.001", "7");
    gen(c.path(), "0.001", "8");
    let (da, db, dc) = (digests(a.path()), digests(b.path()), digests(c.path()));
    assert_eq!(da.len(), 4);
    assert_eq!(da, db);
    assert_ne!(da["lineitem.csv"], dc["lineitem.csv"]);
}

#[test]
fn gen_sizes_and_promo_share() {
    let dir = dataset();
    let lines = |t: &str| std::fs::read_to_string(dir.join(t)).unwrap().lines().count() - 1;
    assert_eq!(lines("lineitem.csv"), 60_000);
    assert_eq!(lines("part.csv"), 2_000);
    let part = std::fs::read_to_string(dir.join("part.csv")).unwrap();
    let promo = part.lines().skip(1).filter(|l| l.split('|').nth(1).unwrap().starts_with("PROMO")).count();
    let share = promo as f64 / 2_000.0;
    assert!((share - 1.0 / 6.0).abs() <= 0.02, "PROMO share {share}");
}

#[test]
fn gen_rejects_bad_scale() {
    let dir = tempfile::tempdir().unwrap();
    for scale in ["0", "-1", "nan"] {
        let (code, _, err) = cli(&["gen", "--scale", scale, "--out", dir.path().to_str().unwrap()]);
        assert_ne!(code, 0, "scale {scale}");
        assert!(err.starts_with("error:") && err.lines().count() == 1, "{err}");
    }
}

#[test]
fn q6_and_q14_match_the_interpreter() {
    let data = load(false);
    let dir = dataset().to_str().unwrap();
    for q in ["q6.sql", "q14.sql"] {
        let oracle = interpret_fixture(&data, q);
        let sql = fixture(q);
        let sql = sql.to_str().unwrap();
        let out = run(&["run", "--sql", sql, "--data", dir]);
        assert_eq!(out, oracle.to_csv(), "{q}");
        let expect = single_value(&oracle.to_csv());
        for backend in ["ref", "par"] {
            for extra in [None, Some("--no-opt")] {
                let mut args = vec!["run", "--sql", sql, "--data", dir, "--backend", backend];
                args.extend(extra);
                let got = single_value(&run(&args));
                assert!(rel_close(got, expect, 1e-9), "{q} {backend} {extra:?}: {got} vs {expect}");
            }
        }
        for backend in BackendKind::all() {
            let got = run_fixture(&data, q, backend, true);
            tensql_testkit::tables_match(&got, &oracle, 1e-9).unwrap();
        }
    }
}

#[test]
fn q6_revenue_is_positive_and_q14_is_a_percentage() {
    let dir = dataset().to_str().unwrap();
    let q6 = single_value(&run(&["run", "--sql", fixture("q6.sql").to_str().unwrap(), "--data", dir]));
    let q14 = single_value(&run(&["run", "--sql", fixture("q14.sql").to_str().unwrap(), "--data", dir]));
    assert!(q6 > 0.0);
    assert!((0.0..=100.0).contains(&q14) && q14 > 5.0, "{q14}");
}

#[test]
fn golden_plans_match_and_round_trip() {
    let dir = dataset().to_str().unwrap();
    for q in ["q6", "q14"] {
        let sql = fixture(&format!("{q}.sql"));
        let golden_path = fixture(&format!("{q}.plan.json"));
        let golden = std::fs::read_to_string(&golden_path).unwrap();
        let out = run(&["plan", "--sql", sql.to_str().unwrap(), "--data", dir, "--no-opt"]);
        assert_eq!(out, golden, "{q} logical plan drifted from the golden file");
        let again = run(&["plan", "--plan", golden_path.to_str().unwrap(), "--data", dir, "--no-opt"]);
        assert_eq!(again, golden);
        let from_sql = run(&["run", "--sql", sql.to_str().unwrap(), "--data", dir]);
        let from_json = run(&["run", "--plan", golden_path.to_str().unwrap(), "--data", dir]);
        assert_eq!(from_sql, from_json);
    }
}

#[test]
fn dot_output_has_one_cluster_per_operator() {
    let dir = dataset().to_str().unwrap();
    let dot = run(&["plan", "--sql", fixture("q6.sql").to_str().unwrap(), "--data", dir, "--format", "dot"]);
    assert!(dot.starts_with("digraph"), "{dot}");
    assert_eq!(dot.matches("subgraph cluster").count(), 4, "{dot}");
    let dot14 = run(&["plan", "--sql", fixture("q14.sql").to_str().unwrap(), "--data", dir, "--format", "dot"]);
    assert!(dot14.contains("substring_match") || dot14.contains("like"), "{dot14}");
}

#[test]
fn profile_writes_a_chrome_trace() {
    let dir = dataset().to_str().unwrap();
    let out = tempfile::tempdir().unwrap();
    let trace = out.path().join("q6.json");
    let (code, stdout, err) = cli(&[
        "profile",
        "--sql",
        fixture("q6.sql").to_str().unwrap(),
        "--data",
        dir,
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.is_empty());
    let events: Json = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    let events = events.as_array().unwrap();
    let ops: Vec<&Json> = events.iter().filter(|e| e["cat"] == "operator").collect();
    let kernels: Vec<&Json> = events.iter().filter(|e| e["cat"] == "kernel").collect();
    assert_eq!(ops.len(), 4);
    assert!(!kernels.is_empty());
    let rows: Vec<u64> = ops.iter().map(|e| e["args"]["rows"].as_u64().unwrap()).collect();
    assert_eq!(rows[0], 60_000);
    assert_eq!(*rows.last().unwrap(), 1);
    for e in ops.iter().chain(&kernels) {
        assert_eq!(e["ph"], "X");
        assert!(e["ts"].as_f64().unwrap() >= 0.0 && e["dur"].as_f64().unwrap() >= 0.0);
    }
    let starts: Vec<f64> = ops.iter().map(|e| e["ts"].as_f64().unwrap()).collect();
    assert!(starts.windows(2).all(|w| w[0] <= w[1]));
    assert!(err.contains("result: 1 rows"), "{err}");
}

#[test]
fn scenario3_matches_row_by_row_oracle() {
    let dir = dataset().to_str().unwrap();
    let model = model_arg();
    let sql = fixture("scenario3.sql");
    let data = load(true);
    for backend in BackendKind::all() {
        for optimize in [true, false] {
            check_scenario3(&run_fixture(&data, "scenario3.sql", backend, optimize)).unwrap();
        }
    }
    let out = run(&["run", "--sql", sql.to_str().unwrap(), "--data", dir, "--model", &model]);
    let oracle = scenario3_oracle();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "l_returnflag,items,exposed_revenue,mean_risk");
    for (line, (flag, (n, e, m))) in lines[1..].iter().zip(&oracle) {
        assert_eq!(*line, format!("{flag},{n},{e:.6},{m:.6}"));
    }
}

#[test]
fn bench_reports_both_backends() {
    let dir = dataset().to_str().unwrap();
    let q6 = fixture("q6.sql");
    let (code, out, err) = cli(&["bench", "--sql", q6.to_str().unwrap(), "--data", dir, "--repeat", "1", "--warmup", "0"]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "backend,median_total_ms,median_kernel_ms,repeat,warmup");
    assert!(lines[1].starts_with("ref,") && lines[2].starts_with("par,"), "{out}");
    assert!(err.contains("speedup"), "{err}");
    let (code, _, err) = cli(&["bench", "--sql", q6.to_str().unwrap(), "--data", dir, "--repeat", "0"]);
    assert_eq!(code, 1);
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn every_error_is_one_prefixed_line() {
    let dir = dataset().to_str().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let bad_sql = tmp.path().join("bad.sql");
    std::fs::write(&bad_sql, "SELECT FROM lineitem").unwrap();
    let bad_model = tmp.path().join("bad.json");
    std::fs::write(&bad_model, r#"{"kind": "linear", "weights": [], "bias": 0}"#).unwrap();
    let q6 = fixture("q6.sql");
    let q6 = q6.to_str().unwrap();
    let bad_sql = bad_sql.to_str().unwrap();
    let bad_model = format!("m={}", bad_model.display());
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--sql", bad_sql, "--data", dir],
        vec!["run", "--sql", "/nonexistent.sql", "--data", dir],
        vec!["run", "--sql", q6, "--data", "/nonexistent"],
        vec!["run", "--sql", q6, "--data", dir, "--backend", "gpu"],
        vec!["run", "--data", dir],
        vec!["run", "--sql", q6, "--plan", q6, "--data", dir],
        vec!["run", "--plan", q6, "--data", dir],
        vec!["run", "--sql", q6, "--data", dir, "--model", "nofile"],
        vec!["run", "--sql", q6, "--data", dir, "--model", &bad_model],
        vec!["plan", "--sql", bad_sql, "--data", dir],
        vec!["frobnicate"],
    ];
    for args in cases {
        let (code, out, err) = cli(&args);
        assert_ne!(code, 0, "{args:?}");
        assert!(out.is_empty(), "{args:?}: {out}");
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: "), "{args:?}: {err}");
    }
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_tensql");
    let ok = std::process::Command::new(exe).arg("--help").output().unwrap();
    assert!(ok.status.success());
    let bad = std::process::Command::new(exe)
        .args(["run", "--sql", "/nonexistent.sql", "--data", "/nonexistent"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let stderr = String::from_utf8(bad.stderr).unwrap();
    assert!(stderr.starts_with("error: ") && stderr.lines().count() == 1, "{stderr}");
}
