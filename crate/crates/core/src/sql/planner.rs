use super::ast::{self, AstExpr, BinOp, ExprKind, Ident, Query, SelectItem, Span};
use crate::error::{Error, Result};
use crate::ir::{self, AggExpr, AggFunc, Catalog, Expr, NamedExpr, PlanNode, SortKey};
use crate::kernels::{ArithOp, CmpOp, LogicOp};
use crate::store::{date, Schema, Value};

fn err<T>(span: Span, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::Plan(format!("at offset {}: {msg}", span.0)))
}

struct ScopeCol {
    table: usize,
    source: String,
    out: String,
}

struct Scope<'a> {
    tables: Vec<String>,
    cols: Vec<ScopeCol>,
    catalog: &'a Catalog,
}

#[derive(Clone, Copy, PartialEq)]
enum Naming {
    /// Base-table names, below the join.
    Source,
    /// Names of the joined relation.
    Output,
}

#[derive(Default)]
struct Aggs {
    list: Vec<AggExpr>,
}

impl Aggs {
    fn add(&mut self, func: AggFunc, arg: Expr, alias: Option<&str>, reserved: &[String]) -> String {
        if let Some(a) = self.list.iter().find(|a| a.func == func && a.arg == arg) {
            return a.name.clone();
        }
        let base = alias.map_or_else(|| AggExpr::default_name(func, &arg, self.list.len()), str::to_string);
        let taken = |n: &str| {
            reserved.iter().chain(self.list.iter().map(|a| &a.name)).any(|t| t.eq_ignore_ascii_case(n))
        };
        let mut name = base.clone();
        let mut k = 1;
        while taken(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        self.list.push(AggExpr {
            name: name.clone(),
            func,
            arg,
        });
        name
    }
}

impl Scope<'_> {
    fn resolve(&self, table: Option<&Ident>, name: &Ident) -> Result<&ScopeCol> {
        let found: Vec<&ScopeCol> = match table {
            Some(t) => {
                let Some(ti) = self.tables.iter().position(|x| x.eq_ignore_ascii_case(&t.name)) else {
                    return err(t.span, format!("unknown table `{}` in column reference", t.name));
                };
                self.cols
                    .iter()
                    .filter(|c| c.table == ti && c.source.eq_ignore_ascii_case(&name.name))
                    .collect()
            }
            None => self
                .cols
                .iter()
                .filter(|c| c.source.eq_ignore_ascii_case(&name.name))
                .collect(),
        };
        match found.as_slice() {
            [c] => Ok(c),
            [] => err(name.span, format!("unknown column `{}`", name.name)),
            _ => err(name.span, format!("ambiguous column `{}`", name.name)),
        }
    }

    /// Tables referenced by `e`.
    fn tables_of(&self, e: &AstExpr, out: &mut Vec<usize>) -> Result<()> {
        if let ExprKind::Column { table, name } = &e.kind {
            let t = self.resolve(table.as_ref(), name)?.table;
            if !out.contains(&t) {
                out.push(t);
            }
        }
        for c in e.children() {
            self.tables_of(c, out)?;
        }
        Ok(())
    }

    fn lower(&self, e: &AstExpr, naming: Naming, mut aggs: Option<(&mut Aggs, &[String])>) -> Result<Expr> {
        let sub = |x: &AstExpr, aggs: Option<(&mut Aggs, &[String])>| self.lower(x, naming, aggs);
        Ok(match &e.kind {
            ExprKind::Column { table, name } => {
                let c = self.resolve(table.as_ref(), name)?;
                Expr::col(match naming {
                    Naming::Source => c.source.clone(),
                    Naming::Output => c.out.clone(),
                })
            }
            ExprKind::Int(v) => Expr::lit(Value::Int64(*v)),
            ExprKind::Float(v) => Expr::lit(Value::Float64(*v)),
            ExprKind::Str(s) => Expr::lit(Value::Utf8(s.clone())),
            ExprKind::Date(s) => Expr::lit(Value::Date(date::parse(s)?)),
            ExprKind::Bool(b) => Expr::lit(Value::Bool(*b)),
            ExprKind::Neg(inner) => match &inner.kind {
                ExprKind::Int(v) => Expr::lit(Value::Int64(-v)),
                ExprKind::Float(v) => Expr::lit(Value::Float64(-v)),
                _ => Expr::arith(ArithOp::Sub, Expr::lit(Value::Int64(0)), sub(inner, aggs)?),
            },
            ExprKind::Not(inner) => Expr::not(sub(inner, aggs)?),
            ExprKind::Binary { op, left, right } => {
                let l = sub(left, aggs.as_mut().map(|(a, r)| (&mut **a, *r)))?;
                let r = sub(right, aggs)?;
                match op {
                    BinOp::Arith(o) => Expr::arith(*o, l, r),
                    BinOp::Cmp(o) => Expr::cmp(*o, l, r),
                    BinOp::Logic(o) => Expr::logical(*o, l, r),
                }
            }
            ExprKind::Between { arg, low, high } => {
                let a = sub(arg, aggs.as_mut().map(|(a, r)| (&mut **a, *r)))?;
                let lo = sub(low, aggs.as_mut().map(|(a, r)| (&mut **a, *r)))?;
                Expr::between(a, lo, sub(high, aggs)?)
            }
            ExprKind::Like { arg, pattern } => {
                if let Err(msg) = ir::LikePattern::parse(pattern) {
                    return err(e.span, msg);
                }
                Expr::like(sub(arg, aggs)?, pattern.clone())
            }
            ExprKind::Case {
                branches,
                else_value,
            } => {
                let mut bs = Vec::new();
                for (w, t) in branches {
                    let w = sub(w, aggs.as_mut().map(|(a, r)| (&mut **a, *r)))?;
                    let t = sub(t, aggs.as_mut().map(|(a, r)| (&mut **a, *r)))?;
                    bs.push((w, t));
                }
                Expr::case(bs, sub(else_value, aggs)?)
            }
            ExprKind::Aggregate { func, arg } => {
                let Some((collector, reserved)) = aggs else {
                    return err(e.span, format!("aggregate {} is not allowed here", func.name()));
                };
                let arg = match arg {
                    Some(a) => sub(a, None)?,
                    None => Expr::lit(Value::Int64(1)),
                };
                Expr::col(collector.add(*func, arg, None, reserved))
            }
            ExprKind::Predict { model, args } => {
                let Some(spec) = self.catalog.model(&model.name) else {
                    return err(model.span, format!("unknown model `{}`", model.name));
                };
                if spec.num_features() != args.len() {
                    return err(
                        e.span,
                        format!(
                            "PREDICT({}) expects {} features, got {}",
                            model.name,
                            spec.num_features(),
                            args.len()
                        ),
                    );
                }
                let mut lowered = Vec::new();
                for a in args {
                    lowered.push(sub(a, aggs.as_mut().map(|(a, r)| (&mut **a, *r)))?);
                }
                Expr::Predict {
                    model: model.name.clone(),
                    args: lowered,
                }
            }
        })
    }

    /// Rejects columns outside aggregates that are not grouping keys.
    fn check_grouped(&self, e: &AstExpr, keys: &[String]) -> Result<()> {
        match &e.kind {
            ExprKind::Aggregate { .. } => Ok(()),
            ExprKind::Column { table, name } => {
                let c = self.resolve(table.as_ref(), name)?;
                if keys.contains(&c.out) {
                    Ok(())
                } else {
                    err(
                        name.span,
                        format!("column `{}` must appear in GROUP BY or inside an aggregate", name.name),
                    )
                }
            }
            _ => e.children().into_iter().try_for_each(|c| self.check_grouped(c, keys)),
        }
    }
}

fn conjuncts(e: &AstExpr) -> Vec<&AstExpr> {
    match &e.kind {
        ExprKind::Binary {
            op: BinOp::Logic(LogicOp::And),
            left,
            right,
        } => {
            let mut v = conjuncts(left);
            v.extend(conjuncts(right));
            v
        }
        _ => vec![e],
    }
}

fn reject_aggregates(e: &AstExpr, clause: &str) -> Result<()> {
    if e.contains_aggregate() {
        return err(e.span, format!("aggregates are not allowed in {clause}"));
    }
    Ok(())
}

/// `(left column, right column)` if `e` is `a = b` across the two tables.
fn equi_key(scope: &Scope, e: &AstExpr) -> Result<Option<(String, String)>> {
    let ExprKind::Binary {
        op: BinOp::Cmp(CmpOp::Eq),
        left,
        right,
    } = &e.kind
    else {
        return Ok(None);
    };
    let (ExprKind::Column { table: ta, name: na }, ExprKind::Column { table: tb, name: nb }) = (&left.kind, &right.kind)
    else {
        return Ok(None);
    };
    let a = scope.resolve(ta.as_ref(), na)?;
    let b = scope.resolve(tb.as_ref(), nb)?;
    Ok(match (a.table, b.table) {
        (0, 1) => Some((a.source.clone(), b.source.clone())),
        (1, 0) => Some((b.source.clone(), a.source.clone())),
        _ => None,
    })
}

fn select_name(item: &AstExpr, alias: Option<&Ident>, scope: &Scope, position: usize) -> Result<String> {
    Ok(match (alias, &item.kind) {
        (Some(a), _) => a.name.clone(),
        (None, ExprKind::Column { table, name }) => scope.resolve(table.as_ref(), name)?.out.clone(),
        _ => format!("expr{position}"),
    })
}

/// Builds the physical plan for a parsed query.
pub fn plan_query(q: &Query, catalog: &Catalog) -> Result<PlanNode> {
    let tables = q.from.tables();
    let mut schemas: Vec<Schema> = Vec::new();
    for t in &tables {
        match catalog.table(&t.name) {
            Some(s) => schemas.push(s.clone()),
            None => return err(t.span, format!("unknown table `{}`", t.name)),
        }
    }
    if tables.len() == 2 && tables[0].name.eq_ignore_ascii_case(&tables[1].name) {
        return err(tables[1].span, "self-joins are not supported");
    }
    let out_schema = match schemas.as_slice() {
        [l, r] => ir::join_schema(l, r),
        [s] => s.clone(),
        _ => unreachable!("one or two tables"),
    };
    let mut cols = Vec::new();
    let mut k = 0;
    for (ti, s) in schemas.iter().enumerate() {
        for f in &s.columns {
            cols.push(ScopeCol {
                table: ti,
                source: f.name.clone(),
                out: out_schema.columns[k].name.clone(),
            });
            k += 1;
        }
    }
    let scope = Scope {
        tables: tables.iter().map(|t| t.name.clone()).collect(),
        cols,
        catalog,
    };

    let mut plan = match &q.from {
        ast::From::Table(t) => {
            let mut p = PlanNode::scan(t.name.clone());
            if let Some(w) = &q.where_clause {
                reject_aggregates(w, "WHERE")?;
                p = p.filter(scope.lower(w, Naming::Output, None)?);
            }
            p
        }
        ast::From::Comma(..) | ast::From::Join { .. } => {
            let mut preds: Vec<&AstExpr> = q.where_clause.as_ref().map(conjuncts).unwrap_or_default();
            for p in &preds {
                reject_aggregates(p, "WHERE")?;
            }
            let key = match &q.from {
                ast::From::Join { on, .. } => {
                    reject_aggregates(on, "JOIN ... ON")?;
                    match equi_key(&scope, on)? {
                        Some(k) => k,
                        None => {
                            return err(
                                on.span,
                                "join condition must be an equality between a column of each table",
                            )
                        }
                    }
                }
                _ => {
                    let mut found = None;
                    for (i, p) in preds.iter().enumerate() {
                        if let Some(k) = equi_key(&scope, p)? {
                            found = Some((i, k));
                            break;
                        }
                    }
                    match found {
                        Some((i, k)) => {
                            preds.remove(i);
                            k
                        }
                        None => {
                            return err(
                                q.span,
                                format!(
                                    "no equality predicate joins `{}` and `{}`; cross products are not supported",
                                    tables[0].name, tables[1].name
                                ),
                            )
                        }
                    }
                }
            };
            let mut side: [Vec<Expr>; 2] = [Vec::new(), Vec::new()];
            let mut residual = Vec::new();
            for p in preds {
                let mut ts = Vec::new();
                scope.tables_of(p, &mut ts)?;
                match ts.as_slice() {
                    [t] => side[*t].push(scope.lower(p, Naming::Source, None)?),
                    _ => residual.push(scope.lower(p, Naming::Output, None)?),
                }
            }
            let [lp, rp] = side;
            let mut left = PlanNode::scan(tables[0].name.clone());
            if let Some(e) = Expr::conjoin(lp) {
                left = left.filter(e);
            }
            let mut right = PlanNode::scan(tables[1].name.clone());
            if let Some(e) = Expr::conjoin(rp) {
                right = right.filter(e);
            }
            let mut p = left.join(right, &key.0, &key.1);
            if let Some(e) = Expr::conjoin(residual) {
                p = p.filter(e);
            }
            p
        }
    };

    let items: Vec<(&AstExpr, Option<&Ident>)> = q
        .select
        .iter()
        .filter_map(|s| match s {
            SelectItem::Expr { expr, alias } => Some((expr, alias.as_ref())),
            SelectItem::Wildcard(_) => None,
        })
        .collect();
    let wildcard = q.select.iter().find_map(|s| match s {
        SelectItem::Wildcard(sp) => Some(*sp),
        _ => None,
    });
    let grouped = !q.group_by.is_empty() || items.iter().any(|(e, _)| e.contains_aggregate());

    if grouped {
        if let Some(sp) = wildcard {
            return err(sp, "`*` cannot be combined with aggregation");
        }
        let mut keys = Vec::new();
        for g in &q.group_by {
            let ExprKind::Column { table, name } = &g.kind else {
                return err(g.span, "GROUP BY accepts column names only");
            };
            let c = scope.resolve(table.as_ref(), name)?;
            if !keys.contains(&c.out) {
                keys.push(c.out.clone());
            }
        }
        let mut aggs = Aggs::default();
        for (e, alias) in &items {
            scope.check_grouped(e, &keys)?;
            if let (ExprKind::Aggregate { func, arg }, Some(a)) = (&e.kind, alias) {
                let arg = match arg {
                    Some(x) => scope.lower(x, Naming::Output, None)?,
                    None => Expr::lit(Value::Int64(1)),
                };
                aggs.add(*func, arg, Some(&a.name), &keys);
            }
        }
        let mut exprs = Vec::new();
        for (i, (e, alias)) in items.iter().enumerate() {
            let expr = scope.lower(e, Naming::Output, Some((&mut aggs, &keys)))?;
            let name = match (&expr, alias, &e.kind) {
                (_, Some(a), _) => a.name.clone(),
                (Expr::ColRef { name }, None, ExprKind::Aggregate { .. }) => name.clone(),
                _ => select_name(e, *alias, &scope, i + 1)?,
            };
            exprs.push(NamedExpr { name, expr });
        }
        let out_names: Vec<String> = keys.iter().cloned().chain(aggs.list.iter().map(|a| a.name.clone())).collect();
        let identity = exprs.len() == out_names.len()
            && exprs
                .iter()
                .zip(&out_names)
                .all(|(ne, n)| ne.name == *n && matches!(&ne.expr, Expr::ColRef { name } if name == n));
        plan = PlanNode::GroupAggregate {
            input: Box::new(plan),
            keys,
            aggs: aggs.list,
        };
        if !identity {
            plan = PlanNode::Project {
                input: Box::new(plan),
                exprs,
            };
        }
    } else if wildcard.is_none() {
        let mut exprs = Vec::new();
        for (i, (e, alias)) in items.iter().enumerate() {
            exprs.push(NamedExpr {
                name: select_name(e, *alias, &scope, i + 1)?,
                expr: scope.lower(e, Naming::Output, None)?,
            });
        }
        plan = PlanNode::Project {
            input: Box::new(plan),
            exprs,
        };
    }

    if !q.order_by.is_empty() {
        let schema = ir::infer_schema(&plan, catalog)?;
        let mut keys = Vec::new();
        for o in &q.order_by {
            let Some(f) = schema.columns.iter().find(|f| f.name.eq_ignore_ascii_case(&o.column.name)) else {
                return err(o.column.span, format!("ORDER BY column `{}` is not in the result", o.column.name));
            };
            keys.push(SortKey {
                column: f.name.clone(),
                asc: o.asc,
            });
        }
        plan = PlanNode::Sort {
            input: Box::new(plan),
            keys,
        };
    }
    if let Some(k) = q.limit {
        plan = plan.limit(k);
    }
    ir::infer_schema(&plan, catalog)?;
    Ok(plan)
}
