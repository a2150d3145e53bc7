use super::*;
use crate::ir::{AggFunc, Catalog, Expr, PlanNode};
use crate::kernels::{ArithOp, CmpOp};
use crate::sql::compile_sql;
use crate::store::{LogicalType as T, Schema, Value};

fn catalog() -> Catalog {
    let mut c = Catalog::new();
    c.register_table(
        "lineitem",
        Schema::of(&[
            ("l_orderkey", T::Int64),
            ("l_partkey", T::Int64),
            ("l_quantity", T::Float64),
            ("l_extendedprice", T::Float64),
            ("l_discount", T::Float64),
            ("l_tax", T::Float64),
            ("l_shipdate", T::Date),
            ("l_comment", T::Utf8),
        ]),
    )
    .unwrap();
    c.register_table(
        "part",
        Schema::of(&[("p_partkey", T::Int64), ("p_type", T::Utf8), ("p_comment", T::Utf8)]),
    )
    .unwrap();
    c
}

const Q6: &str = "SELECT sum(l_extendedprice * l_discount) AS revenue FROM lineitem \
    WHERE l_shipdate >= DATE '1994-01-01' AND l_shipdate < DATE '1995-01-01' \
    AND l_discount BETWEEN 0.06 - 0.01 AND 0.06 + 0.01 AND l_quantity < 24";

const Q14: &str = "SELECT 100.00 * sum(CASE WHEN p_type LIKE 'PROMO%' THEN l_extendedprice * (1 - l_discount) \
    ELSE 0 END) / sum(l_extendedprice * (1 - l_discount)) AS promo_revenue FROM lineitem, part \
    WHERE l_partkey = p_partkey AND l_shipdate >= DATE '1995-09-01' AND l_shipdate < DATE '1995-10-01'";

fn lit_f(x: f64) -> Expr {
    Expr::lit(Value::Float64(x))
}

fn run(plan: &PlanNode) -> Optimized {
    optimize(plan, &catalog(), &default_rules(), MAX_PASSES).unwrap()
}

#[test]
fn already_optimal_plan_is_unchanged() {
    let plan = PlanNode::scan("part").filter(Expr::like(Expr::col("p_type"), "PROMO%"));
    let out = run(&plan);
    assert_eq!(out.plan, plan);
    assert_eq!(out.passes, 1);
    assert!(out.fired.is_empty());
}

#[test]
fn adjacent_filters_fuse() {
    let p = Expr::cmp(CmpOp::Lt, Expr::col("l_quantity"), lit_f(24.0));
    let q = Expr::cmp(CmpOp::Gt, Expr::col("l_discount"), lit_f(0.05));
    let plan = PlanNode::scan("lineitem").filter(p.clone()).filter(q.clone());
    let fused = fuse_filters(&plan, &catalog()).unwrap().unwrap();
    assert_eq!(fused, PlanNode::scan("lineitem").filter(Expr::and(p, q)));
}

#[test]
fn filters_stay_apart_when_the_outer_one_can_fail() {
    let p = Expr::cmp(CmpOp::Ne, Expr::col("l_quantity"), lit_f(0.0));
    let q = Expr::cmp(
        CmpOp::Gt,
        Expr::arith(ArithOp::Div, lit_f(1.0), Expr::col("l_quantity")),
        lit_f(0.5),
    );
    let plan = PlanNode::scan("lineitem").filter(p).filter(q);
    assert_eq!(fuse_filters(&plan, &catalog()).unwrap(), None);
}

#[test]
fn q6_gets_folded_and_pruned_below_its_filter() {
    let c = catalog();
    let plan = compile_sql(Q6, &c).unwrap();
    let out = run(&plan);
    assert!(out.passes <= 3, "{}", out.passes);
    let PlanNode::GroupAggregate { input, .. } = &out.plan else { panic!() };
    let PlanNode::Filter { input, predicate } = &**input else { panic!() };
    let bounds = format!("BETWEEN {:?} AND {:?}", 0.06 - 0.01, 0.06 + 0.01);
    assert!(predicate.to_string().contains(&bounds), "{predicate}");
    let PlanNode::Project { input, exprs } = &**input else { panic!("{input:?}") };
    let names: Vec<&str> = exprs.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["l_quantity", "l_extendedprice", "l_discount", "l_shipdate"]);
    assert_eq!(**input, PlanNode::scan("lineitem"));
}

#[test]
fn q14_reaches_a_fixed_point_quickly() {
    let c = catalog();
    let plan = compile_sql(Q14, &c).unwrap();
    let out = run(&plan);
    assert!(out.passes <= 3, "{}", out.passes);
    let again = run(&out.plan);
    assert_eq!(again.plan, out.plan);
    assert_eq!(again.passes, 1);
    // part keeps only the key and p_type.
    let text = out.plan.to_json();
    assert!(!text.contains("p_comment") && !text.contains("l_comment"));
}

#[test]
fn case_and_like_simplification() {
    let c = catalog();
    let e = Expr::case(
        vec![
            (Expr::lit(Value::Bool(true)), Expr::col("l_tax")),
            (Expr::cmp(CmpOp::Eq, Expr::col("l_quantity"), lit_f(0.0)), lit_f(1.0)),
        ],
        lit_f(0.0),
    );
    let plan = PlanNode::scan("lineitem").project(vec![("t", e), ("m", Expr::like(Expr::col("l_comment"), "%"))]);
    let out = simplify_case(&plan, &c).unwrap().unwrap();
    let PlanNode::Project { exprs, .. } = out else { panic!() };
    assert_eq!(exprs[0].expr, Expr::col("l_tax"));
    assert_eq!(exprs[1].expr, Expr::lit(Value::Bool(true)));
}

#[test]
fn case_with_failing_branch_is_kept() {
    let c = catalog();
    let e = Expr::case(
        vec![(Expr::lit(Value::Bool(true)), lit_f(1.0))],
        Expr::arith(ArithOp::Div, lit_f(1.0), Expr::col("l_tax")),
    );
    let plan = PlanNode::scan("lineitem").project(vec![("t", e)]);
    assert_eq!(simplify_case(&plan, &c).unwrap(), None);
}

#[test]
fn pruning_respects_join_renames() {
    let mut c = Catalog::new();
    c.register_table("a", Schema::of(&[("k", T::Int64), ("v", T::Int64)])).unwrap();
    c.register_table("b", Schema::of(&[("k2", T::Int64), ("v", T::Int64), ("w", T::Int64)])).unwrap();
    let plan = PlanNode::scan("a").join(PlanNode::scan("b"), "k", "k2").project(vec![("x", Expr::col("v_r"))]);
    let out = optimize(&plan, &c, &default_rules(), MAX_PASSES).unwrap();
    assert_eq!(infer_schema(&out.plan, &c).unwrap(), infer_schema(&plan, &c).unwrap());
    // `a.v` must stay so that `b.v` is still renamed.
    assert!(out.plan.to_json().contains("\"w\"") == false);
}

#[test]
fn schema_changing_rule_is_reported() {
    fn bad(plan: &PlanNode, _: &Catalog) -> crate::Result<Option<PlanNode>> {
        Ok(Some(plan.clone().project(vec![("zzz", Expr::lit(Value::Int64(1)))])))
    }
    let rules = [Rule {
        name: "bad_rule",
        rewrite: bad,
    }];
    let err = optimize(&PlanNode::scan("part"), &catalog(), &rules, MAX_PASSES).unwrap_err();
    assert!(matches!(err, crate::Error::RuleChangedSchema { rule: "bad_rule" }));
}

#[test]
fn passes_are_capped() {
    fn flip(plan: &PlanNode, _: &Catalog) -> crate::Result<Option<PlanNode>> {
        let PlanNode::Limit { input, k } = plan else { return Ok(None) };
        Ok(Some(PlanNode::Limit {
            input: input.clone(),
            k: if *k == 1 { 2 } else { 1 },
        }))
    }
    let rules = [Rule {
        name: "flip",
        rewrite: flip,
    }];
    let plan = PlanNode::scan("part").limit(1);
    let out = optimize(&plan, &catalog(), &rules, 4).unwrap();
    assert_eq!(out.passes, 4);
    assert_eq!(out.fired.len(), 4);
}

#[test]
fn aggregate_of_literal_keeps_one_scan_column() {
    let c = catalog();
    let plan = PlanNode::scan("part").aggregate(&[], vec![("n", AggFunc::Count, Expr::lit(Value::Int64(1)))]);
    let out = run(&plan);
    let PlanNode::GroupAggregate { input, .. } = &out.plan else { panic!() };
    let PlanNode::Project { exprs, .. } = &**input else { panic!() };
    assert_eq!(exprs.len(), 1);
    assert_eq!(infer_schema(&out.plan, &c).unwrap(), infer_schema(&plan, &c).unwrap());
}
