//! Row-at-a-time reference interpreter over decoded values.
//!
//! Shares no evaluation code with the tensor path. Expressions are
//! evaluated eagerly over whole columns, with literal-only subexpressions
//! evaluated once, so data errors surface the same way.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ir::{self, AggFunc, Catalog, Expr, PlanNode};
use crate::kernels::{ArithOp, CmpOp, LogicOp};
use crate::store::{encode_table, EncodedTable, Field, LogicalType, Schema, Value};

use super::Tables;

struct Rel {
    fields: Vec<Field>,
    cols: Vec<Vec<Value>>,
    rows: usize,
}

impl Rel {
    fn col(&self, name: &str) -> Result<(usize, LogicalType)> {
        self.fields
            .iter()
            .position(|f| f.name == name)
            .map(|i| (i, self.fields[i].ty))
            .ok_or_else(|| Error::Plan(format!("unresolved column `{name}`")))
    }

    fn take(&self, idx: &[usize]) -> Rel {
        Rel {
            fields: self.fields.clone(),
            cols: self
                .cols
                .iter()
                .map(|c| idx.iter().map(|&i| c[i].clone()).collect())
                .collect(),
            rows: idx.len(),
        }
    }
}

/// Either one value for every row or a full column.
#[derive(Clone)]
enum Vals {
    One(Value),
    Many(Vec<Value>),
}

impl Vals {
    fn get(&self, i: usize) -> &Value {
        match self {
            Vals::One(v) => v,
            Vals::Many(v) => &v[i],
        }
    }

    fn into_column(self, rows: usize) -> Vec<Value> {
        match self {
            Vals::One(v) => vec![v; rows],
            Vals::Many(v) => v,
        }
    }
}

fn zip_map(a: &Vals, b: &Vals, rows: usize, mut f: impl FnMut(&Value, &Value, usize) -> Result<Value>) -> Result<Vals> {
    match (a, b) {
        (Vals::One(x), Vals::One(y)) => Ok(Vals::One(f(x, y, 0)?)),
        _ => (0..rows).map(|i| f(a.get(i), b.get(i), i)).collect::<Result<_>>().map(Vals::Many),
    }
}

fn num(v: &Value) -> f64 {
    match v {
        Value::Int64(x) => *x as f64,
        Value::Float64(x) => *x,
        other => panic!("non-numeric value {other:?}"),
    }
}

fn arith(op: ArithOp, a: &Value, b: &Value, row: usize) -> Result<Value> {
    if let (Value::Int64(x), Value::Int64(y), false) = (a, b, op == ArithOp::Div) {
        let r = match op {
            ArithOp::Add => x.checked_add(*y),
            ArithOp::Sub => x.checked_sub(*y),
            _ => x.checked_mul(*y),
        };
        return r.map(Value::Int64).ok_or(Error::Overflow { kernel: "arith", row });
    }
    let (x, y) = (num(a), num(b));
    Ok(Value::Float64(match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div => {
            if y == 0.0 {
                return Err(Error::DivisionByZero { row });
            }
            x / y
        }
    }))
}

/// SQL-style comparison; `None` when either side is NaN.
fn order(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int64(x), Value::Int64(y)) | (Value::Date(x), Value::Date(y)) => Some(x.cmp(y)),
        (Value::Utf8(x), Value::Utf8(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => num(a).partial_cmp(&num(b)),
    }
}

fn compare(op: CmpOp, a: &Value, b: &Value) -> bool {
    match order(a, b) {
        None => op == CmpOp::Ne,
        Some(o) => match op {
            CmpOp::Eq => o == Ordering::Equal,
            CmpOp::Ne => o != Ordering::Equal,
            CmpOp::Lt => o == Ordering::Less,
            CmpOp::Le => o != Ordering::Greater,
            CmpOp::Gt => o == Ordering::Greater,
            CmpOp::Ge => o != Ordering::Less,
        },
    }
}

fn truth(v: &Value) -> bool {
    matches!(v, Value::Bool(true))
}

/// `%` wildcard matching by greedy segment search.
fn like_match(s: &str, pattern: &str) -> bool {
    let parts: Vec<&str> = pattern.split('%').collect();
    if parts.len() == 1 {
        return s == pattern;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !s.starts_with(first) || !s.ends_with(last) || s.len() < first.len() + last.len() {
        return false;
    }
    let mut rest = &s[first.len()..s.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(p) => rest = &rest[p + mid.len()..],
            None => return false,
        }
    }
    true
}

fn to_float(v: Value) -> Value {
    match v {
        Value::Int64(x) => Value::Float64(x as f64),
        other => other,
    }
}

struct Interp<'a> {
    catalog: &'a Catalog,
    tables: &'a Tables,
}

impl Interp<'_> {
    fn expr(&self, e: &Expr, rel: &Rel) -> Result<Vals> {
        let n = rel.rows;
        Ok(match e {
            Expr::ColRef { name } => Vals::Many(rel.cols[rel.col(name)?.0].clone()),
            Expr::Literal(v) => Vals::One(v.clone()),
            Expr::Arith { op, left, right } => {
                let (a, b) = (self.expr(left, rel)?, self.expr(right, rel)?);
                zip_map(&a, &b, n, |x, y, i| arith(*op, x, y, i))?
            }
            Expr::Compare { op, left, right } => {
                let (a, b) = (self.expr(left, rel)?, self.expr(right, rel)?);
                zip_map(&a, &b, n, |x, y, _| Ok(Value::Bool(compare(*op, x, y))))?
            }
            Expr::Logical { op, left, right } => {
                let (a, b) = (self.expr(left, rel)?, self.expr(right, rel)?);
                zip_map(&a, &b, n, |x, y, _| {
                    Ok(Value::Bool(match op {
                        LogicOp::And => truth(x) && truth(y),
                        LogicOp::Or => truth(x) || truth(y),
                    }))
                })?
            }
            Expr::Not { arg } => match self.expr(arg, rel)? {
                Vals::One(v) => Vals::One(Value::Bool(!truth(&v))),
                Vals::Many(v) => Vals::Many(v.iter().map(|x| Value::Bool(!truth(x))).collect()),
            },
            Expr::Between { arg, low, high } => {
                let a = self.expr(arg, rel)?;
                let lo = self.expr(low, rel)?;
                let hi = self.expr(high, rel)?;
                let ge = zip_map(&a, &lo, n, |x, y, _| Ok(Value::Bool(compare(CmpOp::Ge, x, y))))?;
                let le = zip_map(&a, &hi, n, |x, y, _| Ok(Value::Bool(compare(CmpOp::Le, x, y))))?;
                zip_map(&ge, &le, n, |x, y, _| Ok(Value::Bool(truth(x) && truth(y))))?
            }
            Expr::Case {
                branches,
                else_value,
            } => {
                let schema = Schema::new(rel.fields.clone());
                let ty = ir::expr_type(e, &schema, self.catalog).map_err(Error::Plan)?;
                let fix = |v: Vals| match (ty, v) {
                    (LogicalType::Float64, Vals::One(x)) => Vals::One(to_float(x)),
                    (LogicalType::Float64, Vals::Many(x)) => Vals::Many(x.into_iter().map(to_float).collect()),
                    (_, v) => v,
                };
                let mut arms = Vec::new();
                for b in branches {
                    arms.push((self.expr(&b.when, rel)?, fix(self.expr(&b.then, rel)?)));
                }
                let otherwise = fix(self.expr(else_value, rel)?);
                let pick = |i: usize| {
                    arms.iter()
                        .find(|(c, _)| truth(c.get(i)))
                        .map_or_else(|| otherwise.get(i).clone(), |(_, v)| v.get(i).clone())
                };
                let constant = arms.iter().all(|(c, v)| matches!((c, v), (Vals::One(_), Vals::One(_))))
                    && matches!(otherwise, Vals::One(_));
                if constant {
                    Vals::One(pick(0))
                } else {
                    Vals::Many((0..n).map(pick).collect())
                }
            }
            Expr::Like { arg, pattern } => {
                if pattern.contains('_') {
                    return Err(Error::Plan(format!("unsupported LIKE pattern `{pattern}`")));
                }
                let m = |v: &Value| match v {
                    Value::Utf8(s) => Value::Bool(like_match(s, pattern)),
                    other => panic!("LIKE over {other:?}"),
                };
                match self.expr(arg, rel)? {
                    Vals::One(v) => Vals::One(m(&v)),
                    Vals::Many(v) => Vals::Many(v.iter().map(m).collect()),
                }
            }
            Expr::Predict { model, args } => {
                let spec = self
                    .catalog
                    .model(model)
                    .ok_or_else(|| Error::Plan(format!("unknown model `{model}`")))?;
                let feats = args.iter().map(|a| self.expr(a, rel)).collect::<Result<Vec<_>>>()?;
                Vals::Many(
                    (0..n)
                        .map(|i| {
                            let x: Vec<f64> = feats.iter().map(|f| num(f.get(i))).collect();
                            Value::Float64(spec.predict_row(&x))
                        })
                        .collect(),
                )
            }
        })
    }

    fn node(&self, p: &PlanNode) -> Result<Rel> {
        match p {
            PlanNode::Scan { table } => {
                let t = self
                    .tables
                    .get(table)
                    .ok_or_else(|| Error::Schema(format!("missing input table `{table}`")))?;
                let schema = self
                    .catalog
                    .table(table)
                    .ok_or_else(|| Error::Plan(format!("unknown table `{table}`")))?;
                let mut cols = Vec::new();
                for f in &schema.columns {
                    let c = t
                        .column(&f.name)
                        .ok_or_else(|| Error::Schema(format!("table `{table}` has no column `{}`", f.name)))?;
                    if c.logical != f.ty {
                        return Err(Error::Schema(format!("column `{table}.{}` has type {}", f.name, c.logical)));
                    }
                    cols.push((0..t.row_count()).map(|i| c.value(i)).collect());
                }
                Ok(Rel {
                    fields: schema.columns.clone(),
                    cols,
                    rows: t.row_count(),
                })
            }
            PlanNode::Filter { input, predicate } => {
                let r = self.node(input)?;
                let mask = self.expr(predicate, &r)?;
                let keep: Vec<usize> = (0..r.rows).filter(|&i| truth(mask.get(i))).collect();
                Ok(r.take(&keep))
            }
            PlanNode::Project { input, exprs } => {
                let r = self.node(input)?;
                let schema = Schema::new(r.fields.clone());
                let mut fields = Vec::new();
                let mut cols = Vec::new();
                for ne in exprs {
                    let ty = ir::expr_type(&ne.expr, &schema, self.catalog).map_err(Error::Plan)?;
                    fields.push(Field::new(ne.name.clone(), ty));
                    cols.push(self.expr(&ne.expr, &r)?.into_column(r.rows));
                }
                Ok(Rel {
                    fields,
                    cols,
                    rows: r.rows,
                })
            }
            PlanNode::EquiJoin {
                left,
                right,
                left_key,
                right_key,
                ..
            } => {
                let l = self.node(left)?;
                let r = self.node(right)?;
                let lk = &l.cols[l.col(left_key)?.0];
                let rk = &r.cols[r.col(right_key)?.0];
                for keys in [rk, lk] {
                    if let Some(position) = keys.iter().position(|v| matches!(v, Value::Float64(x) if x.is_nan())) {
                        return Err(Error::NanKey { kernel: "join", position });
                    }
                }
                let mut index: HashMap<HashKey, Vec<usize>> = HashMap::new();
                for (j, v) in rk.iter().enumerate() {
                    index.entry(HashKey::of(v)).or_default().push(j);
                }
                let mut li = Vec::new();
                let mut ri = Vec::new();
                for (i, v) in lk.iter().enumerate() {
                    if let Some(js) = index.get(&HashKey::of(v)) {
                        for &j in js {
                            li.push(i);
                            ri.push(j);
                        }
                    }
                }
                let schema = ir::join_schema(&Schema::new(l.fields.clone()), &Schema::new(r.fields.clone()));
                let (lt, rt) = (l.take(&li), r.take(&ri));
                let mut cols = lt.cols;
                cols.extend(rt.cols);
                Ok(Rel {
                    fields: schema.columns,
                    cols,
                    rows: li.len(),
                })
            }
            PlanNode::GroupAggregate { input, keys, aggs } => self.aggregate(input, keys, aggs),
            PlanNode::Sort { input, keys } => {
                let r = self.node(input)?;
                let mut spec = Vec::new();
                for k in keys {
                    let c = &r.cols[r.col(&k.column)?.0];
                    if let Some(position) = c.iter().position(|v| matches!(v, Value::Float64(x) if x.is_nan())) {
                        return Err(Error::NanKey { kernel: "sort", position });
                    }
                    spec.push((c, k.asc));
                }
                let mut idx: Vec<usize> = (0..r.rows).collect();
                idx.sort_by(|&a, &b| {
                    for (c, asc) in &spec {
                        let o = order(&c[a], &c[b]).expect("NaN rejected");
                        let o = if *asc { o } else { o.reverse() };
                        if o != Ordering::Equal {
                            return o;
                        }
                    }
                    Ordering::Equal
                });
                Ok(r.take(&idx))
            }
            PlanNode::Limit { input, k } => {
                let r = self.node(input)?;
                let n = r.rows.min(usize::try_from(*k).unwrap_or(usize::MAX));
                let idx: Vec<usize> = (0..n).collect();
                Ok(r.take(&idx))
            }
        }
    }

    fn aggregate(&self, input: &PlanNode, keys: &[String], aggs: &[ir::AggExpr]) -> Result<Rel> {
        let r = self.node(input)?;
        let schema = Schema::new(r.fields.clone());
        let args = aggs
            .iter()
            .map(|a| self.expr(&a.arg, &r).map(|v| v.into_column(r.rows)))
            .collect::<Result<Vec<_>>>()?;
        let key_idx = keys.iter().map(|k| r.col(k).map(|c| c.0)).collect::<Result<Vec<_>>>()?;
        for &k in &key_idx {
            if let Some(position) = r.cols[k].iter().position(|v| matches!(v, Value::Float64(x) if x.is_nan())) {
                return Err(Error::NanKey { kernel: "group", position });
            }
        }

        // Groups in first-seen order, then ordered by key.
        let mut groups: Vec<Vec<usize>> = Vec::new();
        if keys.is_empty() {
            groups.push((0..r.rows).collect());
        } else {
            let mut seen: HashMap<Vec<HashKey>, usize> = HashMap::new();
            for i in 0..r.rows {
                let hk: Vec<HashKey> = key_idx.iter().map(|&k| HashKey::of(&r.cols[k][i])).collect();
                let g = *seen.entry(hk).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push(i);
            }
            groups.sort_by(|a, b| {
                for &k in &key_idx {
                    let o = order(&r.cols[k][a[0]], &r.cols[k][b[0]]).expect("NaN rejected");
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                Ordering::Equal
            });
        }

        let mut fields: Vec<Field> = key_idx.iter().map(|&k| r.fields[k].clone()).collect();
        let mut cols: Vec<Vec<Value>> = key_idx
            .iter()
            .map(|&k| groups.iter().map(|g| r.cols[k][g[0]].clone()).collect())
            .collect();
        for (a, vals) in aggs.iter().zip(&args) {
            let in_ty = ir::expr_type(&a.arg, &schema, self.catalog).map_err(Error::Plan)?;
            let out_ty = ir::agg_type(a.func, in_ty).map_err(Error::Plan)?;
            let mut col = Vec::with_capacity(groups.len());
            for (g, rows) in groups.iter().enumerate() {
                let vs: Vec<&Value> = rows.iter().map(|&i| &vals[i]).collect();
                col.push(reduce(a.func, in_ty, &vs, g)?);
            }
            fields.push(Field::new(a.name.clone(), out_ty));
            cols.push(col);
        }
        Ok(Rel {
            fields,
            rows: groups.len(),
            cols,
        })
    }
}

fn sum(ty: LogicalType, vs: &[&Value], segment: usize) -> Result<Value> {
    if ty == LogicalType::Float64 {
        return Ok(Value::Float64(vs.iter().map(|v| num(v)).sum()));
    }
    let mut acc: i128 = 0;
    for v in vs {
        if let Value::Int64(x) = v {
            acc += i128::from(*x);
        }
    }
    i64::try_from(acc).map(Value::Int64).map_err(|_| Error::Overflow {
        kernel: "segmented_reduce",
        row: segment,
    })
}

fn reduce(func: AggFunc, ty: LogicalType, vs: &[&Value], segment: usize) -> Result<Value> {
    match func {
        AggFunc::Count => Ok(Value::Int64(vs.len() as i64)),
        AggFunc::Sum => sum(ty, vs, segment),
        AggFunc::Avg => {
            let s = num(&sum(ty, vs, segment)?);
            if vs.is_empty() {
                return Err(Error::DivisionByZero { row: segment });
            }
            Ok(Value::Float64(s / vs.len() as f64))
        }
        AggFunc::Min | AggFunc::Max => {
            let want = if func == AggFunc::Min { Ordering::Less } else { Ordering::Greater };
            let mut best = (*vs.first().ok_or(Error::EmptySegment {
                op: func.name(),
                segment,
            })?)
            .clone();
            for v in &vs[1..] {
                if matches!(best, Value::Float64(x) if x.is_nan()) {
                    break;
                }
                match order(v, &best) {
                    None => best = (*v).clone(),
                    Some(o) if o == want => best = (*v).clone(),
                    _ => {}
                }
            }
            Ok(best)
        }
    }
}

/// Hashable key with `-0.0` folded into `0.0`.
#[derive(Clone, PartialEq, Eq, Hash)]
enum HashKey {
    Int(i64),
    Float(u64),
    Text(String),
    Bool(bool),
}

impl HashKey {
    fn of(v: &Value) -> HashKey {
        match v {
            Value::Int64(x) | Value::Date(x) => HashKey::Int(*x),
            Value::Float64(x) => HashKey::Float(if *x == 0.0 { 0 } else { x.to_bits() }),
            Value::Utf8(s) => HashKey::Text(s.clone()),
            Value::Bool(b) => HashKey::Bool(*b),
        }
    }
}

/// Evaluates `plan` directly over decoded rows.
pub fn reference_interpreter(plan: &PlanNode, catalog: &Catalog, tables: &Tables) -> Result<EncodedTable> {
    ir::infer_schema(plan, catalog)?;
    let rel = Interp { catalog, tables }.node(plan)?;
    let schema = Schema::new(rel.fields);
    let rows: Vec<Vec<Value>> = (0..rel.rows)
        .map(|i| rel.cols.iter().map(|c| c[i].clone()).collect())
        .collect();
    encode_table(&schema, &rows)
}
