//! Schema inference and validation.
//!
//! Numeric operands mix freely: Int64 is promoted to Float64 wherever it
//! meets a Float64 in arithmetic, comparison or a CASE result. Division
//! always yields Float64.

use std::collections::HashSet;
use std::fmt;

use super::{AggFunc, Catalog, Expr, LikePattern, PlanNode};
use crate::error::{Error, Result};
use crate::kernels::ArithOp;
use crate::store::{Field, LogicalType, Schema};

/// A validation failure located by the path of plan nodes from the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: {}", self.path, self.message)
    }
}

/// Result type of `a <op> b` for numeric operands.
pub fn arith_type(op: ArithOp, a: LogicalType, b: LogicalType) -> LogicalType {
    if op == ArithOp::Div || a == LogicalType::Float64 || b == LogicalType::Float64 {
        LogicalType::Float64
    } else {
        LogicalType::Int64
    }
}

pub fn comparable(a: LogicalType, b: LogicalType) -> bool {
    a == b || (a.is_numeric() && b.is_numeric())
}

/// Common type of CASE results.
pub fn unify(a: LogicalType, b: LogicalType) -> Option<LogicalType> {
    if a == b {
        Some(a)
    } else if a.is_numeric() && b.is_numeric() {
        Some(LogicalType::Float64)
    } else {
        None
    }
}

pub fn agg_type(func: AggFunc, arg: LogicalType) -> std::result::Result<LogicalType, String> {
    match func {
        AggFunc::Count => Ok(LogicalType::Int64),
        AggFunc::Sum if arg.is_numeric() => Ok(arg),
        AggFunc::Avg if arg.is_numeric() => Ok(LogicalType::Float64),
        AggFunc::Min | AggFunc::Max if arg.is_numeric() || arg == LogicalType::Date => Ok(arg),
        _ => Err(format!("{} is not defined for {arg}", func.name())),
    }
}

/// Type of `e` evaluated over rows of `schema`.
pub fn expr_type(e: &Expr, schema: &Schema, catalog: &Catalog) -> std::result::Result<LogicalType, String> {
    let ty = |x: &Expr| expr_type(x, schema, catalog);
    match e {
        Expr::ColRef { name } => schema
            .field(name)
            .map(|f| f.ty)
            .ok_or_else(|| format!("unresolved column `{name}`")),
        Expr::Literal(v) => Ok(v.logical_type()),
        Expr::Arith { op, left, right } => {
            let (a, b) = (ty(left)?, ty(right)?);
            if !a.is_numeric() || !b.is_numeric() {
                return Err(format!("type mismatch: {a} {} {b}", op.symbol()));
            }
            Ok(arith_type(*op, a, b))
        }
        Expr::Compare { op, left, right } => {
            let (a, b) = (ty(left)?, ty(right)?);
            if !comparable(a, b) {
                return Err(format!("type mismatch: {a} {} {b}", op.symbol()));
            }
            Ok(LogicalType::Bool)
        }
        Expr::Logical { left, right, .. } => {
            for side in [left, right] {
                let t = ty(side)?;
                if t != LogicalType::Bool {
                    return Err(format!("AND/OR requires bool operands, found {t}"));
                }
            }
            Ok(LogicalType::Bool)
        }
        Expr::Not { arg } => match ty(arg)? {
            LogicalType::Bool => Ok(LogicalType::Bool),
            t => Err(format!("NOT requires bool, found {t}")),
        },
        Expr::Between { arg, low, high } => {
            let a = ty(arg)?;
            for bound in [low, high] {
                let b = ty(bound)?;
                if !comparable(a, b) {
                    return Err(format!("type mismatch: {a} BETWEEN {b}"));
                }
            }
            Ok(LogicalType::Bool)
        }
        Expr::Case {
            branches,
            else_value,
        } => {
            if branches.is_empty() {
                return Err("CASE needs at least one WHEN branch".into());
            }
            let mut out = ty(else_value)?;
            for b in branches {
                let c = ty(&b.when)?;
                if c != LogicalType::Bool {
                    return Err(format!("CASE condition must be bool, found {c}"));
                }
                let v = ty(&b.then)?;
                out = unify(out, v).ok_or_else(|| format!("CASE branches mix {out} and {v}"))?;
            }
            Ok(out)
        }
        Expr::Like { arg, pattern } => {
            let t = ty(arg)?;
            if t != LogicalType::Utf8 {
                return Err(format!("LIKE requires Utf8, found {t}"));
            }
            LikePattern::parse(pattern)?;
            Ok(LogicalType::Bool)
        }
        Expr::Predict { model, args } => {
            let spec = catalog
                .model(model)
                .ok_or_else(|| format!("unknown model `{model}`"))?;
            if args.len() != spec.num_features() {
                return Err(format!(
                    "PREDICT({model}) expects {} features, got {}",
                    spec.num_features(),
                    args.len()
                ));
            }
            for (i, a) in args.iter().enumerate() {
                let t = ty(a)?;
                if !t.is_numeric() {
                    return Err(format!("PREDICT({model}) feature {i} must be numeric, found {t}"));
                }
            }
            Ok(LogicalType::Float64)
        }
    }
}

fn unique_name(taken: &HashSet<String>, base: &str) -> String {
    let mut name = format!("{base}_r");
    while taken.contains(&name.to_ascii_lowercase()) {
        name.push_str("_r");
    }
    name
}

/// Output schema of a join: left columns then right columns, with right
/// names that collide renamed by appending `_r`.
pub fn join_schema(left: &Schema, right: &Schema) -> Schema {
    let mut taken: HashSet<String> = left.names().map(str::to_ascii_lowercase).collect();
    let mut cols = left.columns.clone();
    for f in &right.columns {
        let name = if taken.contains(&f.name.to_ascii_lowercase()) {
            unique_name(&taken, &f.name)
        } else {
            f.name.clone()
        };
        taken.insert(name.to_ascii_lowercase());
        cols.push(Field::new(name, f.ty));
    }
    Schema::new(cols)
}

struct Checker<'a> {
    catalog: &'a Catalog,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn report(&mut self, path: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn expr(&mut self, path: &str, e: &Expr, schema: &Schema) -> Option<LogicalType> {
        match expr_type(e, schema, self.catalog) {
            Ok(t) => Some(t),
            Err(msg) => {
                self.report(path, msg);
                None
            }
        }
    }

    fn finish(&mut self, path: &str, schema: Schema) -> Option<Schema> {
        if let Some(d) = schema.duplicate_name() {
            self.report(path, format!("duplicate output name `{d}`"));
            return None;
        }
        Some(schema)
    }

    fn node(&mut self, node: &PlanNode, path: &str) -> Option<Schema> {
        let child = |side: Option<&str>, c: &PlanNode| match side {
            Some(s) => format!("{path}[{s}]/{}", c.op_name()),
            None => format!("{path}/{}", c.op_name()),
        };
        match node {
            PlanNode::Scan { table } => match self.catalog.table(table) {
                Some(s) => Some(s.clone()),
                None => {
                    self.report(path, format!("unknown table `{table}`"));
                    None
                }
            },
            PlanNode::Filter { input, predicate } => {
                let s = self.node(input, &child(None, input))?;
                match self.expr(path, predicate, &s)? {
                    LogicalType::Bool => Some(s),
                    t => {
                        self.report(path, format!("filter predicate must be bool, found {t}"));
                        None
                    }
                }
            }
            PlanNode::Project { input, exprs } => {
                let s = self.node(input, &child(None, input))?;
                if exprs.is_empty() {
                    self.report(path, "projection has no output columns");
                    return None;
                }
                let mut cols = Vec::new();
                let mut ok = true;
                for ne in exprs {
                    match self.expr(path, &ne.expr, &s) {
                        Some(t) => cols.push(Field::new(ne.name.clone(), t)),
                        None => ok = false,
                    }
                }
                if !ok {
                    return None;
                }
                self.finish(path, Schema::new(cols))
            }
            PlanNode::EquiJoin {
                left,
                right,
                left_key,
                right_key,
                ..
            } => {
                let l = self.node(left, &child(Some("left"), left));
                let r = self.node(right, &child(Some("right"), right));
                let (l, r) = (l?, r?);
                let lt = l.field(left_key).map(|f| f.ty);
                let rt = r.field(right_key).map(|f| f.ty);
                match (lt, rt) {
                    (None, _) => self.report(path, format!("unresolved column `{left_key}` in left input")),
                    (_, None) => self.report(path, format!("unresolved column `{right_key}` in right input")),
                    (Some(a), Some(b)) if a != b => {
                        self.report(path, format!("join keys have different types: {a} vs {b}"))
                    }
                    _ => return self.finish(path, join_schema(&l, &r)),
                }
                None
            }
            PlanNode::GroupAggregate { input, keys, aggs } => {
                let s = self.node(input, &child(None, input))?;
                if keys.is_empty() && aggs.is_empty() {
                    self.report(path, "aggregation without keys or aggregates");
                    return None;
                }
                let mut cols = Vec::new();
                let mut ok = true;
                for k in keys {
                    match s.field(k) {
                        Some(f) => cols.push(f.clone()),
                        None => {
                            self.report(path, format!("unresolved column `{k}`"));
                            ok = false;
                        }
                    }
                }
                for a in aggs {
                    let Some(t) = self.expr(path, &a.arg, &s) else {
                        ok = false;
                        continue;
                    };
                    match agg_type(a.func, t) {
                        Ok(out) => cols.push(Field::new(a.name.clone(), out)),
                        Err(msg) => {
                            self.report(path, msg);
                            ok = false;
                        }
                    }
                }
                if !ok {
                    return None;
                }
                self.finish(path, Schema::new(cols))
            }
            PlanNode::Sort { input, keys } => {
                let s = self.node(input, &child(None, input))?;
                if keys.is_empty() {
                    self.report(path, "sort without keys");
                    return None;
                }
                let missing: Vec<&str> = keys
                    .iter()
                    .filter(|k| s.field(&k.column).is_none())
                    .map(|k| k.column.as_str())
                    .collect();
                for m in &missing {
                    self.report(path, format!("unresolved column `{m}`"));
                }
                missing.is_empty().then_some(s)
            }
            PlanNode::Limit { input, .. } => self.node(input, &child(None, input)),
        }
    }
}

/// Checks every structural and typing rule, collecting all diagnostics.
pub fn validate(plan: &PlanNode, catalog: &Catalog) -> std::result::Result<(), Vec<Diagnostic>> {
    let mut c = Checker {
        catalog,
        diags: Vec::new(),
    };
    let out = c.node(plan, plan.op_name());
    if c.diags.is_empty() && out.is_some() {
        Ok(())
    } else {
        Err(c.diags)
    }
}

/// Output schema of `plan`; fails with the first diagnostic.
pub fn infer_schema(plan: &PlanNode, catalog: &Catalog) -> Result<Schema> {
    let mut c = Checker {
        catalog,
        diags: Vec::new(),
    };
    match c.node(plan, plan.op_name()) {
        Some(s) if c.diags.is_empty() => Ok(s),
        _ => Err(Error::Plan(
            c.diags
                .first()
                .map_or_else(|| "invalid plan".to_string(), |d| d.to_string()),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::CmpOp;
    use crate::store::Value;

    fn catalog() -> Catalog {
        Catalog::new()
            .with_table(
                "lineitem",
                Schema::of(&[
                    ("key", LogicalType::Int64),
                    ("x", LogicalType::Float64),
                    ("q", LogicalType::Int64),
                    ("d", LogicalType::Date),
                    ("s", LogicalType::Utf8),
                ]),
            )
            .unwrap()
            .with_table(
                "part",
                Schema::of(&[("key", LogicalType::Int64), ("p_type", LogicalType::Utf8)]),
            )
            .unwrap()
    }

    #[test]
    fn scan_schema() {
        let c = catalog();
        assert_eq!(
            infer_schema(&PlanNode::scan("lineitem"), &c).unwrap(),
            *c.table("lineitem").unwrap()
        );
    }

    #[test]
    fn scalar_sum_schema() {
        let p = PlanNode::scan("lineitem").aggregate(&[], vec![("sum_x", AggFunc::Sum, Expr::col("x"))]);
        let s = infer_schema(&p, &catalog()).unwrap();
        assert_eq!(s, Schema::of(&[("sum_x", LogicalType::Float64)]));
    }

    #[test]
    fn avg_and_count_types() {
        let p = PlanNode::scan("lineitem").aggregate(
            &["s"],
            vec![
                ("a", AggFunc::Avg, Expr::col("q")),
                ("c", AggFunc::Count, Expr::col("s")),
                ("m", AggFunc::Min, Expr::col("d")),
            ],
        );
        let s = infer_schema(&p, &catalog()).unwrap();
        let types: Vec<_> = s.columns.iter().map(|f| f.ty).collect();
        assert_eq!(
            types,
            [LogicalType::Utf8, LogicalType::Float64, LogicalType::Int64, LogicalType::Date]
        );
    }

    #[test]
    fn join_collision_gets_suffix() {
        let p = PlanNode::scan("lineitem").join(PlanNode::scan("part"), "key", "key");
        let s = infer_schema(&p, &catalog()).unwrap();
        let names: Vec<_> = s.names().collect();
        assert_eq!(names, ["key", "x", "q", "d", "s", "key_r", "p_type"]);
    }

    #[test]
    fn like_over_int_is_diagnosed() {
        let p = PlanNode::scan("lineitem").filter(Expr::like(Expr::col("q"), "1%"));
        let d = validate(&p, &catalog()).unwrap_err();
        assert!(d[0].message.contains("LIKE requires Utf8"), "{:?}", d);
        let p = PlanNode::scan("lineitem").filter(Expr::like(Expr::col("s"), "a_c"));
        assert!(validate(&p, &catalog()).is_err());
    }

    #[test]
    fn dangling_column_carries_path() {
        let p = PlanNode::scan("lineitem")
            .join(
                PlanNode::scan("part").filter(Expr::cmp(CmpOp::Eq, Expr::col("nope"), Expr::lit(Value::Int64(1)))),
                "key",
                "key",
            )
            .limit(1);
        let d = validate(&p, &catalog()).unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].path, "limit/join[right]/filter");
        assert!(d[0].message.contains("`nope`"));
    }

    #[test]
    fn duplicate_projection_name() {
        let p = PlanNode::scan("lineitem").project(vec![("a", Expr::col("x")), ("A", Expr::col("q"))]);
        assert!(validate(&p, &catalog()).is_err());
    }

    #[test]
    fn numeric_promotion_and_mismatch() {
        let c = catalog();
        let s = c.table("lineitem").unwrap();
        let e = Expr::arith(ArithOp::Add, Expr::col("q"), Expr::col("x"));
        assert_eq!(expr_type(&e, s, &c).unwrap(), LogicalType::Float64);
        let e = Expr::arith(ArithOp::Div, Expr::col("q"), Expr::col("q"));
        assert_eq!(expr_type(&e, s, &c).unwrap(), LogicalType::Float64);
        let e = Expr::cmp(CmpOp::Lt, Expr::col("d"), Expr::col("q"));
        assert!(expr_type(&e, s, &c).is_err());
    }
}
