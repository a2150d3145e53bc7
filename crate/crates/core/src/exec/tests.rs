use std::sync::Arc;

use super::*;
use crate::error::Error;
use crate::ir::{AggFunc, Catalog, Expr, PlanNode};
use crate::kernels::{ArithOp, BackendKind, CmpOp};
use crate::store::{date, decode_table, encode_table, EncodedTable, LogicalType as T, Schema, Value};

fn d(s: &str) -> Value {
    Value::Date(date::parse(s).unwrap())
}

fn f(x: f64) -> Value {
    Value::Float64(x)
}

fn i(x: i64) -> Value {
    Value::Int64(x)
}

fn s(x: &str) -> Value {
    Value::Utf8(x.to_string())
}

fn lineitem() -> EncodedTable {
    let schema = Schema::of(&[
        ("l_partkey", T::Int64),
        ("l_quantity", T::Float64),
        ("l_extendedprice", T::Float64),
        ("l_discount", T::Float64),
        ("l_shipdate", T::Date),
    ]);
    encode_table(
        &schema,
        &[
            vec![i(1), f(10.0), f(100.0), f(0.06), d("1994-03-01")],
            vec![i(2), f(30.0), f(200.0), f(0.06), d("1994-05-01")],
            vec![i(3), f(5.0), f(300.0), f(0.04), d("1994-06-01")],
            vec![i(1), f(5.0), f(400.0), f(0.07), d("1995-01-01")],
            vec![i(2), f(20.0), f(500.0), f(0.05), d("1994-12-31")],
            vec![i(3), f(1.0), f(600.0), f(0.06), d("1993-12-31")],
        ],
    )
    .unwrap()
}

fn q14_tables() -> Tables {
    let li = encode_table(
        &Schema::of(&[
            ("l_partkey", T::Int64),
            ("l_extendedprice", T::Float64),
            ("l_discount", T::Float64),
            ("l_shipdate", T::Date),
        ]),
        &[
            vec![i(1), f(100.0), f(0.1), d("1995-09-05")],
            vec![i(2), f(200.0), f(0.0), d("1995-09-10")],
            vec![i(3), f(50.0), f(0.2), d("1995-09-30")],
            vec![i(1), f(1000.0), f(0.0), d("1995-10-01")],
        ],
    )
    .unwrap();
    let part = encode_table(
        &Schema::of(&[("p_partkey", T::Int64), ("p_type", T::Utf8)]),
        &[
            vec![i(1), s("PROMO BRUSHED")],
            vec![i(2), s("STANDARD POLISHED")],
            vec![i(3), s("PROMO PLATED")],
        ],
    )
    .unwrap();
    [("lineitem".to_string(), li), ("part".to_string(), part)].into()
}

fn q6_plan() -> PlanNode {
    let pred = Expr::and(
        Expr::and(
            Expr::cmp(CmpOp::Ge, Expr::col("l_shipdate"), Expr::lit(d("1994-01-01"))),
            Expr::cmp(CmpOp::Lt, Expr::col("l_shipdate"), Expr::lit(d("1995-01-01"))),
        ),
        Expr::and(
            Expr::between(Expr::col("l_discount"), Expr::lit(f(0.05)), Expr::lit(f(0.07))),
            Expr::cmp(CmpOp::Lt, Expr::col("l_quantity"), Expr::lit(i(24))),
        ),
    );
    PlanNode::scan("lineitem").filter(pred).aggregate(
        &[],
        vec![(
            "revenue",
            AggFunc::Sum,
            Expr::arith(ArithOp::Mul, Expr::col("l_extendedprice"), Expr::col("l_discount")),
        )],
    )
}

fn q14_plan() -> PlanNode {
    let rev = || {
        Expr::arith(
            ArithOp::Mul,
            Expr::col("l_extendedprice"),
            Expr::arith(ArithOp::Sub, Expr::lit(i(1)), Expr::col("l_discount")),
        )
    };
    PlanNode::scan("lineitem")
        .join(PlanNode::scan("part"), "l_partkey", "p_partkey")
        .filter(Expr::and(
            Expr::cmp(CmpOp::Ge, Expr::col("l_shipdate"), Expr::lit(d("1995-09-01"))),
            Expr::cmp(CmpOp::Lt, Expr::col("l_shipdate"), Expr::lit(d("1995-10-01"))),
        ))
        .project(vec![
            ("promo", Expr::case(vec![(Expr::like(Expr::col("p_type"), "PROMO%"), rev())], Expr::lit(f(0.0)))),
            ("rev", rev()),
        ])
        .aggregate(&[], vec![("p", AggFunc::Sum, Expr::col("promo")), ("r", AggFunc::Sum, Expr::col("rev"))])
        .project(vec![(
            "promo_revenue",
            Expr::arith(
                ArithOp::Div,
                Expr::arith(ArithOp::Mul, Expr::lit(f(100.0)), Expr::col("p")),
                Expr::col("r"),
            ),
        )])
}

fn run_all(plan: &PlanNode, tables: &Tables) -> Vec<Result<EncodedTable, Error>> {
    let catalog = Catalog::from_tables(tables).unwrap();
    let mut out = Vec::new();
    for kind in BackendKind::all() {
        let op = plan_operators(plan, &catalog).unwrap();
        out.push(build_executor(op, kind.create()).execute(tables));
    }
    out.push(reference_interpreter(plan, &catalog, tables));
    out
}

fn approx_rows(a: &EncodedTable, b: &EncodedTable) {
    assert_eq!(a.schema(), b.schema());
    let (ra, rb) = (decode_table(a), decode_table(b));
    assert_eq!(ra.len(), rb.len());
    for (x, y) in ra.iter().zip(&rb) {
        for (u, v) in x.iter().zip(y) {
            match (u, v) {
                (Value::Float64(p), Value::Float64(q)) => {
                    assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()), "{p} vs {q}")
                }
                _ => assert_eq!(u, v),
            }
        }
    }
}

fn one_float(t: &EncodedTable) -> f64 {
    assert_eq!(t.row_count(), 1);
    match t.row(0)[0] {
        Value::Float64(v) => v,
        ref other => panic!("{other:?}"),
    }
}

#[test]
fn q6_matches_hand_computed_revenue() {
    let tables: Tables = [("lineitem".to_string(), lineitem())].into();
    for r in run_all(&q6_plan(), &tables) {
        assert!((one_float(&r.unwrap()) - 31.0).abs() < 1e-9);
    }
}

#[test]
fn q14_matches_hand_computed_ratio() {
    let tables = q14_tables();
    for r in run_all(&q14_plan(), &tables) {
        let v = one_float(&r.unwrap());
        assert!((v - 100.0 * 130.0 / 330.0).abs() < 1e-9, "{v}");
    }
}

#[test]
fn empty_input_aggregates() {
    let empty = encode_table(&Schema::of(&[("x", T::Int64), ("y", T::Float64)]), &[]).unwrap();
    let tables: Tables = [("t".to_string(), empty)].into();
    let ok = PlanNode::scan("t").aggregate(
        &[],
        vec![("s", AggFunc::Sum, Expr::col("x")), ("c", AggFunc::Count, Expr::col("y"))],
    );
    for r in run_all(&ok, &tables) {
        assert_eq!(decode_table(&r.unwrap()), vec![vec![i(0), i(0)]]);
    }
    let grouped = PlanNode::scan("t").aggregate(&["x"], vec![("m", AggFunc::Min, Expr::col("y"))]);
    for r in run_all(&grouped, &tables) {
        assert_eq!(r.unwrap().row_count(), 0);
    }
    let avg = PlanNode::scan("t").aggregate(&[], vec![("a", AggFunc::Avg, Expr::col("y"))]);
    for r in run_all(&avg, &tables) {
        assert!(matches!(r.unwrap_err().root(), Error::DivisionByZero { .. }));
    }
    let min = PlanNode::scan("t").aggregate(&[], vec![("m", AggFunc::Min, Expr::col("x"))]);
    for r in run_all(&min, &tables) {
        assert!(matches!(r.unwrap_err().root(), Error::EmptySegment { .. }));
    }
}

#[test]
fn join_with_empty_right_side() {
    let mut tables = q14_tables();
    let part = encode_table(&Schema::of(&[("p_partkey", T::Int64), ("p_type", T::Utf8)]), &[]).unwrap();
    tables.insert("part".into(), part);
    let plan = PlanNode::scan("lineitem").join(PlanNode::scan("part"), "l_partkey", "p_partkey");
    for r in run_all(&plan, &tables) {
        let t = r.unwrap();
        assert_eq!(t.row_count(), 0);
        assert_eq!(t.schema().len(), 6);
    }
}

#[test]
fn join_fans_out_in_left_then_right_order() {
    let l = encode_table(&Schema::of(&[("k", T::Utf8), ("a", T::Int64)]), &[
        vec![s("b"), i(1)],
        vec![s("a"), i(2)],
        vec![s("zz"), i(3)],
        vec![s("b"), i(4)],
    ])
    .unwrap();
    let r = encode_table(&Schema::of(&[("k", T::Utf8), ("a", T::Int64)]), &[
        vec![s("b"), i(10)],
        vec![s("a"), i(20)],
        vec![s("b"), i(30)],
    ])
    .unwrap();
    let tables: Tables = [("l".to_string(), l), ("r".to_string(), r)].into();
    let plan = PlanNode::scan("l").join(PlanNode::scan("r"), "k", "k");
    let want = vec![
        vec![s("b"), i(1), s("b"), i(10)],
        vec![s("b"), i(1), s("b"), i(30)],
        vec![s("a"), i(2), s("a"), i(20)],
        vec![s("b"), i(4), s("b"), i(10)],
        vec![s("b"), i(4), s("b"), i(30)],
    ];
    for res in run_all(&plan, &tables) {
        let t = res.unwrap();
        let names: Vec<String> = t.schema().names().map(String::from).collect();
        assert_eq!(names, ["k", "a", "k_r", "a_r"]);
        assert_eq!(decode_table(&t), want);
    }
}

#[test]
fn filter_true_keeps_every_row() {
    let tables: Tables = [("lineitem".to_string(), lineitem())].into();
    let plan = PlanNode::scan("lineitem").filter(Expr::lit(Value::Bool(true)));
    for r in run_all(&plan, &tables) {
        assert_eq!(decode_table(&r.unwrap()), decode_table(&lineitem()));
    }
}

#[test]
fn grouping_sorting_and_limit_agree_with_interpreter() {
    let rows: Vec<Vec<Value>> = (0..300)
        .map(|n| {
            let g = ["north", "south", "", "east", "n"][n % 5];
            vec![s(g), i((n as i64 * 37) % 11 - 5), f(((n * 13) % 7) as f64 - 3.0), Value::Bool(n % 3 == 0)]
        })
        .collect();
    let t = encode_table(
        &Schema::of(&[("g", T::Utf8), ("x", T::Int64), ("y", T::Float64), ("b", T::Bool)]),
        &rows,
    )
    .unwrap();
    let tables: Tables = [("t".to_string(), t)].into();
    let plan = PlanNode::scan("t")
        .aggregate(
            &["g", "b"],
            vec![
                ("s", AggFunc::Sum, Expr::col("x")),
                ("c", AggFunc::Count, Expr::col("x")),
                ("a", AggFunc::Avg, Expr::col("y")),
                ("lo", AggFunc::Min, Expr::col("y")),
                ("hi", AggFunc::Max, Expr::col("x")),
            ],
        )
        .sort(&[("g", false), ("s", true)])
        .limit(7);
    let out = run_all(&plan, &tables);
    let reference = out.last().unwrap().as_ref().unwrap();
    assert_eq!(reference.row_count(), 7);
    assert_eq!(reference.row(0)[0], s("south"));
    for r in &out {
        approx_rows(r.as_ref().unwrap(), reference);
    }
}

#[test]
fn dropped_division_by_zero_still_fails() {
    let tables: Tables = [("lineitem".to_string(), lineitem())].into();
    let plan = PlanNode::scan("lineitem")
        .project(vec![
            ("q", Expr::arith(ArithOp::Div, Expr::col("l_quantity"), Expr::lit(f(0.0)))),
            ("k", Expr::col("l_partkey")),
        ])
        .project(vec![("k", Expr::col("k"))]);
    for r in run_all(&plan, &tables) {
        assert!(matches!(r.unwrap_err().root(), Error::DivisionByZero { .. }));
    }
}

#[test]
fn integer_overflow_is_reported() {
    let t = encode_table(&Schema::of(&[("x", T::Int64)]), &[vec![i(i64::MAX)], vec![i(1)]]).unwrap();
    let tables: Tables = [("t".to_string(), t)].into();
    let sum = PlanNode::scan("t").aggregate(&[], vec![("s", AggFunc::Sum, Expr::col("x"))]);
    let add = PlanNode::scan("t").project(vec![("y", Expr::arith(ArithOp::Add, Expr::col("x"), Expr::lit(i(1))))]);
    for plan in [sum, add] {
        for r in run_all(&plan, &tables) {
            assert!(matches!(r.unwrap_err().root(), Error::Overflow { .. }));
        }
    }
}

#[test]
fn nan_group_key_is_rejected() {
    let t = encode_table(&Schema::of(&[("x", T::Float64)]), &[vec![f(1.0)], vec![f(f64::NAN)]]).unwrap();
    let tables: Tables = [("t".to_string(), t)].into();
    let plan = PlanNode::scan("t").aggregate(&["x"], vec![("c", AggFunc::Count, Expr::col("x"))]);
    for r in run_all(&plan, &tables) {
        assert!(matches!(r.unwrap_err().root(), Error::NanKey { .. }));
    }
}

#[test]
fn execution_is_deterministic_and_backends_agree() {
    let tables = q14_tables();
    let catalog = Catalog::from_tables(&tables).unwrap();
    let plan = plan_operators(&q14_plan(), &catalog).unwrap();
    let seq = build_executor(plan.clone(), BackendKind::Reference.create());
    let par = build_executor(plan, BackendKind::Parallel.create());
    let a = seq.run_raw(&tables).unwrap();
    let b = seq.run_raw(&tables).unwrap();
    let c = par.run_raw(&tables).unwrap();
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        assert!(x.bit_eq(y));
        assert_eq!(x.shape(), z.shape());
    }
}

#[test]
fn profile_reports_every_operator() {
    let tables: Tables = [("lineitem".to_string(), lineitem())].into();
    let catalog = Catalog::from_tables(&tables).unwrap();
    let plan = plan_operators(&q6_plan(), &catalog).unwrap();
    let exec = build_executor(plan, Arc::from(BackendKind::Reference.create()));
    let (_, trace) = exec.profile_execute(&tables).unwrap();
    let rows: Vec<(&str, usize)> = trace.operators.iter().map(|o| (o.name, o.rows_out)).collect();
    assert_eq!(rows, [("scan", 6), ("filter", 2), ("aggregate", 1)]);
    assert!(!trace.kernels.is_empty());
    let json = trace.to_chrome_json();
    assert!(json.as_array().unwrap().len() > trace.kernels.len());
}

#[test]
fn dot_has_one_cluster_per_operator() {
    let tables: Tables = [("lineitem".to_string(), lineitem())].into();
    let catalog = Catalog::from_tables(&tables).unwrap();
    let plan = PlanNode::scan("lineitem")
        .project(vec![("p", Expr::col("l_extendedprice")), ("q", Expr::col("l_quantity"))])
        .filter(Expr::cmp(CmpOp::Lt, Expr::col("q"), Expr::lit(i(24))))
        .aggregate(&[], vec![("s", AggFunc::Sum, Expr::col("p"))]);
    let op = plan_operators(&plan, &catalog).unwrap();
    let dot = to_dot(&op);
    assert_eq!(dot.matches("subgraph cluster_").count(), 4);
    assert!(dot.starts_with("digraph"));
}
