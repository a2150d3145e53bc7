//! Shared inputs for the benchmarks.

use tensql::datagen::{lineitem_table, part_table, GenConfig, SplitMix64};
use tensql::exec::{Executor, Tables};
use tensql::ir::Catalog;
use tensql::kernels::BackendKind;
use tensql::ml::load_model;
use tensql::pipeline::{compile_plan, logical_plan};
use tensql::Tensor;

pub const Q6: &str = "SELECT sum(l_extendedprice * l_discount) AS revenue FROM lineitem \
    WHERE l_shipdate >= DATE '1994-01-01' AND l_shipdate < DATE '1995-01-01' \
    AND l_discount BETWEEN 0.06 - 0.01 AND 0.06 + 0.01 AND l_quantity < 24";

pub const Q14: &str = "SELECT 100.00 * sum(CASE WHEN p_type LIKE 'PROMO%' \
    THEN l_extendedprice * (1 - l_discount) ELSE 0 END) \
    / sum(l_extendedprice * (1 - l_discount)) AS promo_revenue \
    FROM lineitem, part WHERE l_partkey = p_partkey \
    AND l_shipdate >= DATE '1995-09-01' AND l_shipdate < DATE '1995-10-01'";

pub const SCENARIO3: &str = "SELECT l_returnflag, count(*) AS items, \
    sum(CASE WHEN PREDICT(risk, l_quantity, l_discount, l_extendedprice) > 0.5 \
    THEN l_extendedprice ELSE 0 END) AS exposed, \
    avg(PREDICT(risk, l_quantity, l_discount, l_extendedprice)) AS mean_risk \
    FROM lineitem GROUP BY l_returnflag";

const RISK_MODEL: &str = r#"{"kind": "tree", "nodes": [
    {"feature": 0, "threshold": 25.5, "left": 1, "right": 2},
    {"feature": 1, "threshold": 0.045, "left": 3, "right": 4},
    {"feature": 2, "threshold": 50000.0, "left": 5, "right": 6},
    {"leaf": 0.1},
    {"feature": 2, "threshold": 20000.0, "left": 7, "right": 8},
    {"leaf": 0.4}, {"leaf": 0.9}, {"leaf": 0.3}, {"leaf": 0.7}]}"#;

/// Generated lineitem and part tables with a catalog that also holds the
/// `risk` tree model.
pub fn tpch(scale: f64) -> (Tables, Catalog) {
    let cfg = GenConfig::new(scale, 7).expect("valid scale");
    let mut tables = Tables::new();
    tables.insert("lineitem".into(), lineitem_table(&cfg, &[]).expect("lineitem"));
    tables.insert("part".into(), part_table(&cfg).expect("part"));
    let mut catalog = Catalog::from_tables(&tables).expect("catalog");
    catalog.register_model("risk", load_model(RISK_MODEL).expect("model")).expect("register");
    (tables, catalog)
}

pub fn executor(sql: &str, catalog: &Catalog, backend: BackendKind) -> Executor {
    let plan = logical_plan(sql, false, catalog).expect("query plans");
    compile_plan(&plan, catalog, true, backend).expect("query compiles")
}

pub fn random_i64(n: usize, below: u64, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    Tensor::from_i64((0..n).map(|_| rng.below(below) as i64).collect())
}

pub fn random_f64(n: usize, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    Tensor::from_f64((0..n).map(|_| rng.below(1 << 30) as f64 / 1024.0).collect())
}
