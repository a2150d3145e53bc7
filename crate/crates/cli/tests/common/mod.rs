//! Helpers shared by the CLI test targets.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde_json::Value as Json;
use tensql::exec::{reference_interpreter, Tables};
use tensql::ir::Catalog;
use tensql::kernels::BackendKind;
use tensql::pipeline::{build_catalog, compile_plan, load_data_dir, logical_plan};
use tensql::EncodedTable;

/// Runs the CLI in process: (exit code, stdout, stderr).
pub fn cli<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("tensql".into()).chain(args.iter().map(|a| a.as_ref().to_owned()));
    let code = tensql_cli::main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn model_arg() -> String {
    format!("return_risk={}", fixture("return_risk.json").display())
}

/// Scale 0.01, seed 7, generated once per test binary through `gen`.
pub fn dataset() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let exe = std::env::current_exe().unwrap();
        let tag = exe.file_stem().unwrap().to_string_lossy().into_owned();
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("sf001-seed7-{tag}"));
        let _ = std::fs::remove_dir_all(&dir);
        let (code, _, err) = cli(&["gen", "--scale", "0.01", "--seed", "7", "--out", dir.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        dir
    })
}

pub struct Loaded {
    pub tables: Tables,
    pub catalog: Catalog,
}

pub fn load(models: bool) -> Loaded {
    let tables = load_data_dir(dataset()).unwrap();
    let models = if models { vec![("return_risk".to_string(), fixture("return_risk.json"))] } else { vec![] };
    let catalog = build_catalog(&tables, &models).unwrap();
    Loaded { tables, catalog }
}

/// Executes a fixture query in process.
pub fn run_fixture(data: &Loaded, sql: &str, backend: BackendKind, optimize: bool) -> EncodedTable {
    let text = std::fs::read_to_string(fixture(sql)).unwrap();
    let plan = logical_plan(&text, false, &data.catalog).unwrap();
    compile_plan(&plan, &data.catalog, optimize, backend).unwrap().execute(&data.tables).unwrap()
}

pub fn interpret_fixture(data: &Loaded, sql: &str) -> EncodedTable {
    let text = std::fs::read_to_string(fixture(sql)).unwrap();
    let plan = logical_plan(&text, false, &data.catalog).unwrap();
    reference_interpreter(&plan, &data.catalog, &data.tables).unwrap()
}

fn walk(nodes: &[Json], x: &[f64]) -> f64 {
    let mut node = &nodes[0];
    while let Some(f) = node.get("feature") {
        let go = if x[f.as_u64().unwrap() as usize] < node["threshold"].as_f64().unwrap() { "left" } else { "right" };
        node = &nodes[node[go].as_u64().unwrap() as usize];
    }
    node["leaf"].as_f64().unwrap()
}

/// Per return flag: (items, exposed_revenue, mean_risk), computed row by
/// row from the generated CSV and the model file.
pub fn scenario3_oracle() -> BTreeMap<String, (i64, f64, f64)> {
    let model: Json = serde_json::from_str(&std::fs::read_to_string(fixture("return_risk.json")).unwrap()).unwrap();
    let nodes = model["nodes"].as_array().unwrap();
    let text = std::fs::read_to_string(dataset().join("lineitem.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('|').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (flag, qty, disc, price, ship) = (
        col("l_returnflag"),
        col("l_quantity"),
        col("l_discount"),
        col("l_extendedprice"),
        col("l_shipdate"),
    );
    let mut groups: BTreeMap<String, (i64, f64, f64)> = BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = line.split('|').collect();
        if f[ship] < "1995-01-01" {
            continue;
        }
        let p: f64 = f[price].parse().unwrap();
        let x = [f[qty].parse::<f64>().unwrap(), f[disc].parse().unwrap(), p];
        let risk = walk(nodes, &x);
        let g = groups.entry(f[flag].to_string()).or_default();
        g.0 += 1;
        g.1 += if risk > 0.5 { p } else { 0.0 };
        g.2 += risk;
    }
    for g in groups.values_mut() {
        g.2 /= g.0 as f64;
    }
    groups
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Compares a scenario-3 result table against the oracle; returns the
/// largest relative error seen.
pub fn check_scenario3(result: &EncodedTable) -> Result<f64, String> {
    let oracle = scenario3_oracle();
    let rows = tensql::store::decode_table(result);
    if rows.len() != oracle.len() {
        return Err(format!("{} groups, oracle has {}", rows.len(), oracle.len()));
    }
    let mut worst = 0.0f64;
    for (row, (flag, (items, exposed, mean))) in rows.iter().zip(&oracle) {
        use tensql::Value::*;
        let [Utf8(f), Int64(n), Float64(e), Float64(m)] = row.as_slice() else {
            return Err(format!("unexpected row shape {row:?}"));
        };
        if f != flag || n != items {
            return Err(format!("group {f}/{n} vs oracle {flag}/{items}"));
        }
        for (got, want) in [(e, exposed), (m, mean)] {
            let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if !rel_close(*got, *want, 1e-9) {
                return Err(format!("group {flag}: {got} vs oracle {want}"));
            }
        }
    }
    Ok(worst)
}
