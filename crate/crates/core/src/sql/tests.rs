use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::*;
use super::*;
use crate::error::Error;
use crate::ir::{AggFunc, Catalog, Expr, PlanNode};
use crate::kernels::{ArithOp, CmpOp, LogicOp};
use crate::ml::ModelSpec;
use crate::store::{LogicalType as T, Schema};

pub const Q6: &str = "SELECT sum(l_extendedprice * l_discount) AS revenue
FROM lineitem
WHERE l_shipdate >= DATE '1994-01-01'
  AND l_shipdate < DATE '1995-01-01'
  AND l_discount BETWEEN 0.06 - 0.01 AND 0.06 + 0.01
  AND l_quantity < 24";

pub const Q14: &str = "SELECT 100.00 * sum(CASE WHEN p_type LIKE 'PROMO%'
                          THEN l_extendedprice * (1 - l_discount)
                          ELSE 0 END) / sum(l_extendedprice * (1 - l_discount)) AS promo_revenue
FROM lineitem, part
WHERE l_partkey = p_partkey
  AND l_shipdate >= DATE '1995-09-01'
  AND l_shipdate < DATE '1995-10-01'";

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
            ("l_shipdate", T::Date),
            ("l_returnflag", T::Utf8),
        ]),
    )
    .unwrap();
    c.register_table(
        "part",
        Schema::of(&[("p_partkey", T::Int64), ("p_type", T::Utf8), ("p_size", T::Int64)]),
    )
    .unwrap();
    c.register_model(
        "price_model",
        ModelSpec::Linear {
            weights: vec![2.0, -1.0],
            bias: 0.5,
        },
    )
    .unwrap();
    c
}

fn count_conjuncts(e: &AstExpr) -> usize {
    match &e.kind {
        ExprKind::Binary {
            op: BinOp::Logic(LogicOp::And),
            left,
            right,
        } => count_conjuncts(left) + count_conjuncts(right),
        _ => 1,
    }
}

fn count_aggregates(e: &AstExpr) -> usize {
    let own = usize::from(matches!(e.kind, ExprKind::Aggregate { .. }));
    own + e.children().into_iter().map(count_aggregates).sum::<usize>()
}

fn syntax_offset(sql: &str) -> (usize, Vec<String>) {
    match parse(sql).unwrap_err() {
        Error::Syntax { offset, expected, .. } => (offset, expected),
        e => panic!("expected a syntax error, got {e}"),
    }
}

#[test]
fn q6_parses_into_four_conjuncts_and_one_sum() {
    let q = parse(Q6).unwrap();
    assert_eq!(count_conjuncts(q.where_clause.as_ref().unwrap()), 4);
    let SelectItem::Expr { expr, alias } = &q.select[0] else { panic!() };
    assert_eq!(count_aggregates(expr), 1);
    assert_eq!(alias.as_ref().unwrap().name, "revenue");
}

#[test]
fn q14_parses_join_case_and_like() {
    let q = parse(Q14).unwrap();
    assert!(matches!(q.from, From::Comma(..)));
    let text = q.to_string();
    assert!(text.contains("CASE WHEN (p_type LIKE 'PROMO%')"), "{text}");
}

#[test]
fn misspelled_select_fails_at_offset_zero() {
    let (offset, expected) = syntax_offset("SELEC 1");
    assert_eq!(offset, 0);
    assert_eq!(expected, ["SELECT"]);
}

#[test]
fn syntax_errors_list_expected_tokens() {
    let (offset, expected) = syntax_offset("SELECT a FROM t WHERE");
    assert_eq!(offset, 21);
    assert!(expected.contains(&"expression".to_string()), "{expected:?}");
    let (offset, expected) = syntax_offset("SELECT a b c FROM t");
    assert_eq!(offset, 11);
    assert!(expected.contains(&"FROM".to_string()), "{expected:?}");
    let (offset, _) = syntax_offset("SELECT DATE '1994-02-30' FROM t");
    assert_eq!(offset, 12);
    let (_, expected) = syntax_offset("SELECT a FROM t LIMIT x");
    assert_eq!(expected, ["non-negative integer"]);
}

#[test]
fn trailing_semicolon() {
    assert!(parse("SELECT a FROM t;\n-- done\n").is_ok());
    let (offset, _) = syntax_offset("SELECT a FROM t; SELECT");
    assert_eq!(offset, 17);
}

#[test]
fn q14_join_keys_and_pushdown() {
    let plan = compile_sql(Q14, &catalog()).unwrap();
    let PlanNode::Project { input, exprs } = &plan else { panic!("{plan:?}") };
    assert_eq!(exprs[0].name, "promo_revenue");
    let PlanNode::GroupAggregate { input, keys, aggs } = &**input else { panic!() };
    assert!(keys.is_empty());
    assert_eq!(aggs.len(), 2);
    let PlanNode::EquiJoin {
        left,
        right,
        left_key,
        right_key,
        ..
    } = &**input
    else {
        panic!("{input:?}")
    };
    assert_eq!((left_key.as_str(), right_key.as_str()), ("l_partkey", "p_partkey"));
    assert!(matches!(&**left, PlanNode::Filter { input, .. } if **input == PlanNode::scan("lineitem")));
    assert_eq!(**right, PlanNode::scan("part"));
}

#[test]
fn single_table_query_has_no_join() {
    let plan = compile_sql(Q6, &catalog()).unwrap();
    let PlanNode::GroupAggregate { input, aggs, .. } = &plan else { panic!("{plan:?}") };
    assert_eq!(aggs[0].name, "revenue");
    assert!(matches!(&**input, PlanNode::Filter { input, .. } if **input == PlanNode::scan("lineitem")));
    assert_eq!(plan.size(), 3);
}

#[test]
fn explicit_join_and_residual_filter() {
    let sql = "SELECT l_orderkey, p_size FROM lineitem JOIN part ON p_partkey = l_partkey \
               WHERE p_size > 3 AND l_quantity < p_size ORDER BY l_orderkey DESC LIMIT 5";
    let plan = compile_sql(sql, &catalog()).unwrap();
    let PlanNode::Limit { input, k: 5 } = &plan else { panic!() };
    let PlanNode::Sort { input, keys } = &**input else { panic!() };
    assert!(!keys[0].asc);
    let PlanNode::Project { input, .. } = &**input else { panic!() };
    let PlanNode::Filter { input, predicate } = &**input else { panic!() };
    assert_eq!(
        *predicate,
        Expr::cmp(CmpOp::Lt, Expr::col("l_quantity"), Expr::col("p_size"))
    );
    let PlanNode::EquiJoin { left_key, right, .. } = &**input else { panic!() };
    assert_eq!(left_key, "l_partkey");
    assert!(matches!(&**right, PlanNode::Filter { .. }));
}

#[test]
fn grouping_rules() {
    let c = catalog();
    let err = compile_sql("SELECT sum(l_quantity), l_returnflag FROM lineitem", &c).unwrap_err();
    assert!(err.to_string().contains("GROUP BY"), "{err}");
    let plan = compile_sql(
        "SELECT l_returnflag, count(*) AS n, avg(l_quantity) FROM lineitem GROUP BY l_returnflag",
        &c,
    )
    .unwrap();
    let PlanNode::GroupAggregate { keys, aggs, .. } = &plan else { panic!("{plan:?}") };
    assert_eq!(keys, &["l_returnflag"]);
    let names: Vec<&str> = aggs.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["n", "avg_l_quantity"]);
    assert_eq!(aggs[0].func, AggFunc::Count);
    assert!(compile_sql("SELECT sum(sum(l_quantity)) FROM lineitem", &c).is_err());
    assert!(compile_sql("SELECT l_quantity FROM lineitem WHERE sum(l_quantity) > 1", &c).is_err());
}

#[test]
fn join_errors() {
    let c = catalog();
    let e = compile_sql("SELECT l_orderkey FROM lineitem, part WHERE l_quantity > 1", &c).unwrap_err();
    assert!(e.to_string().contains("cross products"), "{e}");
    let e = compile_sql("SELECT l_orderkey FROM lineitem JOIN part ON l_partkey < p_partkey", &c).unwrap_err();
    assert!(e.to_string().contains("equality"), "{e}");
    let e = compile_sql("SELECT l_orderkey FROM lineitem, nation WHERE a = b", &c).unwrap_err();
    assert!(e.to_string().contains("unknown table `nation`"), "{e}");
    let e = compile_sql("SELECT nope FROM lineitem", &c).unwrap_err();
    assert!(e.to_string().contains("offset 7"), "{e}");
}

#[test]
fn predict_resolves_registered_models() {
    let c = catalog();
    let plan = compile_sql("SELECT PREDICT(price_model, l_quantity, l_discount) AS p FROM lineitem", &c).unwrap();
    let schema = crate::ir::infer_schema(&plan, &c).unwrap();
    assert_eq!(schema.columns[0].ty, T::Float64);
    let e = compile_sql("SELECT PREDICT(price_model, l_quantity) FROM lineitem", &c).unwrap_err();
    assert!(e.to_string().contains("expects 2 features"), "{e}");
    let e = compile_sql("SELECT PREDICT(other, l_quantity) FROM lineitem", &c).unwrap_err();
    assert!(e.to_string().contains("unknown model"), "{e}");
}

#[test]
fn unary_minus_and_literals() {
    let plan = compile_sql("SELECT -l_quantity AS a, -2 AS b, -1.5 AS c FROM lineitem", &catalog()).unwrap();
    let PlanNode::Project { exprs, .. } = &plan else { panic!() };
    assert_eq!(
        exprs[0].expr,
        Expr::arith(ArithOp::Sub, Expr::lit(crate::Value::Int64(0)), Expr::col("l_quantity"))
    );
    assert_eq!(exprs[1].expr, Expr::lit(crate::Value::Int64(-2)));
    assert_eq!(exprs[2].expr, Expr::lit(crate::Value::Float64(-1.5)));
}

#[test]
fn planning_is_deterministic() {
    let c = catalog();
    assert_eq!(compile_sql(Q14, &c).unwrap(), compile_sql(Q14, &c).unwrap());
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn ident(&mut self) -> Ident {
        const NAMES: [&str; 8] = ["a", "b", "price", "qty", "x_1", "Count", "sum", "tbl"];
        Ident::new(NAMES[self.rng.gen_range(0..NAMES.len())])
    }

    fn leaf(&mut self) -> AstExpr {
        AstExpr::new(match self.rng.gen_range(0..7) {
            0 => ExprKind::Column {
                table: self.rng.gen_bool(0.3).then(|| self.ident()),
                name: self.ident(),
            },
            1 => ExprKind::Int(self.rng.gen_range(0..1_000_000)),
            2 => ExprKind::Float(match self.rng.gen_range(0..3) {
                0 => self.rng.gen_range(0.0..1e6),
                1 => self.rng.gen_range(0.0..1e-3),
                _ => self.rng.gen_range(0..100) as f64,
            }),
            3 => ExprKind::Str(["", "it's", "PROMO%", "ünï"][self.rng.gen_range(0..4)].to_string()),
            4 => ExprKind::Date(format!("19{:02}-0{}-1{}", self.rng.gen_range(70..100), self.rng.gen_range(1..10), self.rng.gen_range(0..10))),
            5 => ExprKind::Bool(self.rng.gen()),
            _ => ExprKind::Column {
                table: None,
                name: self.ident(),
            },
        })
    }

    fn expr(&mut self, depth: usize) -> AstExpr {
        if depth == 0 {
            return self.leaf();
        }
        let sub = |g: &mut Gen| Box::new(g.expr(depth - 1));
        AstExpr::new(match self.rng.gen_range(0..10) {
            0 => ExprKind::Neg(sub(self)),
            1 => ExprKind::Not(sub(self)),
            2 => {
                let ops = [
                    BinOp::Arith(ArithOp::Add),
                    BinOp::Arith(ArithOp::Sub),
                    BinOp::Arith(ArithOp::Mul),
                    BinOp::Arith(ArithOp::Div),
                    BinOp::Cmp(CmpOp::Eq),
                    BinOp::Cmp(CmpOp::Ne),
                    BinOp::Cmp(CmpOp::Lt),
                    BinOp::Cmp(CmpOp::Ge),
                    BinOp::Logic(LogicOp::And),
                    BinOp::Logic(LogicOp::Or),
                ];
                ExprKind::Binary {
                    op: ops[self.rng.gen_range(0..ops.len())],
                    left: sub(self),
                    right: sub(self),
                }
            }
            3 => ExprKind::Between {
                arg: sub(self),
                low: sub(self),
                high: sub(self),
            },
            4 => ExprKind::Like {
                arg: sub(self),
                pattern: "%it''s%".into(),
            },
            5 => ExprKind::Case {
                branches: (0..self.rng.gen_range(1..3)).map(|_| (*sub(self), *sub(self))).collect(),
                else_value: sub(self),
            },
            6 => {
                let func = AggFunc::ALL[self.rng.gen_range(0..5)];
                let star = func == AggFunc::Count && self.rng.gen_bool(0.5);
                ExprKind::Aggregate {
                    func,
                    arg: if star { None } else { Some(sub(self)) },
                }
            }
            7 => ExprKind::Predict {
                model: self.ident(),
                args: (0..self.rng.gen_range(0..3)).map(|_| *sub(self)).collect(),
            },
            _ => return self.leaf(),
        })
    }

    fn query(&mut self) -> Query {
        let select = if self.rng.gen_bool(0.1) {
            vec![SelectItem::Wildcard(Span::default())]
        } else {
            (0..self.rng.gen_range(1..4))
                .map(|_| SelectItem::Expr {
                    expr: self.expr(3),
                    alias: self.rng.gen_bool(0.5).then(|| self.ident()),
                })
                .collect()
        };
        let from = match self.rng.gen_range(0..3) {
            0 => From::Table(self.ident()),
            1 => From::Comma(self.ident(), self.ident()),
            _ => From::Join {
                left: self.ident(),
                right: self.ident(),
                on: self.expr(2),
            },
        };
        Query {
            select,
            from,
            where_clause: self.rng.gen_bool(0.6).then(|| self.expr(4)),
            group_by: (0..self.rng.gen_range(0..3))
                .map(|_| {
                    AstExpr::new(ExprKind::Column {
                        table: None,
                        name: self.ident(),
                    })
                })
                .collect(),
            order_by: (0..self.rng.gen_range(0..3))
                .map(|_| OrderItem {
                    column: self.ident(),
                    asc: self.rng.gen(),
                })
                .collect(),
            limit: self.rng.gen_bool(0.4).then(|| self.rng.gen_range(0..10_000)),
            span: Span::default(),
        }
    }
}

#[test]
fn print_then_parse_is_identity_on_random_asts() {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(0x5EED),
    };
    for _ in 0..300 {
        let q = g.query();
        let text = q.to_string();
        let back = parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(back, q, "{text}");
    }
}
