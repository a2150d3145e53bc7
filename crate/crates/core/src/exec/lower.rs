//! Lowering of IR plans to operator plans.

use std::collections::HashMap;

use super::program::{Instr, OperatorPlan, OutputColumn, ProgramBuilder, SlotId};
use crate::error::{Error, Result};
use crate::ir::{self, AggFunc, Catalog, Expr, LikePattern, PlanNode};
use crate::kernels::{ArithOp, CmpOp, LogicOp, ReduceOp, Side, UnaryOp};
use crate::ml::{self, TensorizedModel};
use crate::store::{LogicalType, Value};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
struct Col {
    name: String,
    logical: LogicalType,
    slot: SlotId,
}

/// A relation during lowering: its columns and a `1 x 1` row count slot.
#[derive(Clone, Debug)]
struct Rel {
    cols: Vec<Col>,
    rows: SlotId,
}

impl Rel {
    fn col(&self, name: &str) -> Result<&Col> {
        self.cols
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Plan(format!("unresolved column `{name}`")))
    }
}

/// A lowered expression. Scalars are single-row tensors that broadcast.
#[derive(Clone, Copy, Debug)]
struct Val {
    slot: SlotId,
    ty: LogicalType,
    scalar: bool,
}

#[derive(Clone, Copy)]
enum Bin {
    Cmp(CmpOp),
    Arith(ArithOp),
    Logic(LogicOp),
}

struct Lowerer<'a> {
    b: ProgramBuilder,
    catalog: &'a Catalog,
    models: HashMap<String, TensorizedModel>,
}

fn literal_tensor(v: &Value) -> Result<Tensor> {
    Ok(match v {
        Value::Int64(x) | Value::Date(x) => Tensor::from_i64(vec![*x]),
        Value::Float64(x) => Tensor::from_f64(vec![*x]),
        Value::Bool(x) => Tensor::from_bool(vec![*x]),
        Value::Utf8(s) => {
            if s.as_bytes().contains(&0) {
                return Err(Error::Plan("string literals cannot contain NUL".into()));
            }
            let mut bytes: Vec<i32> = s.bytes().map(i32::from).collect();
            if bytes.is_empty() {
                bytes.push(0);
            }
            let w = bytes.len();
            Tensor::new(bytes, 1, w)?
        }
    })
}

impl Lowerer<'_> {
    fn emit(&mut self, i: Instr) -> SlotId {
        self.b.emit(i)
    }

    fn materialize(&mut self, v: Val, rows: SlotId) -> Val {
        if v.scalar {
            Val {
                slot: self.b.broadcast(v.slot, rows),
                ty: v.ty,
                scalar: false,
            }
        } else {
            v
        }
    }

    fn to_float(&mut self, v: Val) -> Val {
        if v.ty == LogicalType::Float64 {
            return v;
        }
        Val {
            slot: self.b.unary(v.slot, UnaryOp::ToFloat64),
            ty: LogicalType::Float64,
            scalar: v.scalar,
        }
    }

    fn binary(&mut self, kind: Bin, a: Val, b: Val, ty: LogicalType, rows: SlotId) -> Val {
        let (mut a, mut b, mut kind) = (a, b, kind);
        if a.scalar && !b.scalar {
            match kind {
                Bin::Cmp(op) => {
                    std::mem::swap(&mut a, &mut b);
                    kind = Bin::Cmp(op.flip());
                }
                Bin::Arith(ArithOp::Add | ArithOp::Mul) => std::mem::swap(&mut a, &mut b),
                Bin::Arith(_) | Bin::Logic(_) => a = self.materialize(a, rows),
            }
        }
        if matches!(kind, Bin::Logic(_)) && b.scalar && !a.scalar {
            b = self.materialize(b, rows);
        }
        let broadcast = b.scalar && !a.scalar;
        let strings = a.ty == LogicalType::Utf8;
        let slot = match kind {
            Bin::Cmp(op) if strings => self.emit(Instr::CompareRows {
                a: a.slot,
                b: b.slot,
                op,
                broadcast,
            }),
            Bin::Cmp(op) => self.b.compare(a.slot, b.slot, op, broadcast),
            Bin::Arith(op) => {
                let s = self.b.arith(a.slot, b.slot, op, broadcast);
                if op == ArithOp::Div || ty == LogicalType::Int64 {
                    self.b.pin(s);
                }
                s
            }
            Bin::Logic(op) => self.emit(Instr::Logical {
                a: a.slot,
                b: b.slot,
                op,
            }),
        };
        Val {
            slot,
            ty,
            scalar: a.scalar && b.scalar,
        }
    }

    fn compare(&mut self, op: CmpOp, a: Val, b: Val, rows: SlotId) -> Val {
        let (a, b) = if a.ty != b.ty && a.ty.is_numeric() && b.ty.is_numeric() {
            (self.to_float(a), self.to_float(b))
        } else {
            (a, b)
        };
        self.binary(Bin::Cmp(op), a, b, LogicalType::Bool, rows)
    }

    fn model(&mut self, name: &str) -> Result<TensorizedModel> {
        if let Some(m) = self.models.get(name) {
            return Ok(m.clone());
        }
        let spec = self
            .catalog
            .model(name)
            .ok_or_else(|| Error::Plan(format!("unknown model `{name}`")))?;
        let t = ml::tensorize(spec);
        self.models.insert(name.to_string(), t.clone());
        Ok(t)
    }

    fn expr(&mut self, e: &Expr, rel: &Rel) -> Result<Val> {
        let rows = rel.rows;
        Ok(match e {
            Expr::ColRef { name } => {
                let c = rel.col(name)?;
                Val {
                    slot: c.slot,
                    ty: c.logical,
                    scalar: false,
                }
            }
            Expr::Literal(v) => Val {
                slot: self.b.constant(literal_tensor(v)?),
                ty: v.logical_type(),
                scalar: true,
            },
            Expr::Arith { op, left, right } => {
                let (a, b) = (self.expr(left, rel)?, self.expr(right, rel)?);
                let ty = ir::arith_type(*op, a.ty, b.ty);
                let (a, b) = if ty == LogicalType::Float64 {
                    (self.to_float(a), self.to_float(b))
                } else {
                    (a, b)
                };
                self.binary(Bin::Arith(*op), a, b, ty, rows)
            }
            Expr::Compare { op, left, right } => {
                let (a, b) = (self.expr(left, rel)?, self.expr(right, rel)?);
                self.compare(*op, a, b, rows)
            }
            Expr::Logical { op, left, right } => {
                let (a, b) = (self.expr(left, rel)?, self.expr(right, rel)?);
                self.binary(Bin::Logic(*op), a, b, LogicalType::Bool, rows)
            }
            Expr::Not { arg } => {
                let a = self.expr(arg, rel)?;
                Val {
                    slot: self.emit(Instr::Not { a: a.slot }),
                    ..a
                }
            }
            Expr::Between { arg, low, high } => {
                let a = self.expr(arg, rel)?;
                let lo = self.expr(low, rel)?;
                let hi = self.expr(high, rel)?;
                let ge = self.compare(CmpOp::Ge, a, lo, rows);
                let le = self.compare(CmpOp::Le, a, hi, rows);
                self.binary(Bin::Logic(LogicOp::And), ge, le, LogicalType::Bool, rows)
            }
            Expr::Case {
                branches,
                else_value,
            } => self.case(branches, else_value, rel)?,
            Expr::Like { arg, pattern } => {
                let a = self.expr(arg, rel)?;
                let p = LikePattern::parse(pattern).map_err(Error::Plan)?;
                Val {
                    slot: self.emit(Instr::SubstringMatch {
                        chars: a.slot,
                        pattern: p.literal,
                        anchor: p.anchor,
                    }),
                    ty: LogicalType::Bool,
                    scalar: a.scalar,
                }
            }
            Expr::Predict { model, args } => {
                let m = self.model(model)?;
                let mut feats = Vec::with_capacity(args.len());
                for a in args {
                    let v = self.expr(a, rel)?;
                    let v = self.to_float(v);
                    feats.push(self.materialize(v, rows).slot);
                }
                let slot = ml::lower_predict(&mut self.b, &m, &feats, rows)?;
                Val {
                    slot,
                    ty: LogicalType::Float64,
                    scalar: false,
                }
            }
        })
    }

    /// Every branch is evaluated; `select_where` picks per row, last
    /// branch first so earlier branches win.
    fn case(&mut self, branches: &[ir::CaseBranch], else_value: &Expr, rel: &Rel) -> Result<Val> {
        let rows = rel.rows;
        let mut conds = Vec::new();
        let mut vals = Vec::new();
        for br in branches {
            conds.push(self.expr(&br.when, rel)?);
            vals.push(self.expr(&br.then, rel)?);
        }
        vals.push(self.expr(else_value, rel)?);
        let mut ty = vals[0].ty;
        for v in &vals[1..] {
            ty = ir::unify(ty, v.ty).ok_or_else(|| Error::Plan("CASE branches have incompatible types".into()))?;
        }
        let all_scalar = conds.iter().chain(&vals).all(|v| v.scalar);
        let mut fixed = Vec::with_capacity(vals.len());
        for v in vals {
            let v = if ty == LogicalType::Float64 { self.to_float(v) } else { v };
            fixed.push(if all_scalar { v } else { self.materialize(v, rows) });
        }
        let conds: Vec<Val> = conds
            .into_iter()
            .map(|c| if all_scalar { c } else { self.materialize(c, rows) })
            .collect();
        if ty == LogicalType::Utf8 {
            let like: Vec<SlotId> = fixed.iter().map(|v| v.slot).collect();
            for v in fixed.iter_mut() {
                v.slot = self.emit(Instr::Widen {
                    src: v.slot,
                    like: like.clone(),
                });
            }
        }
        let mut acc = fixed.pop().expect("else value");
        for (c, v) in conds.iter().zip(fixed).rev() {
            acc = Val {
                slot: self.b.select_where(c.slot, v.slot, acc.slot),
                ty,
                scalar: all_scalar,
            };
        }
        Ok(acc)
    }

    fn value_col(&mut self, e: &Expr, rel: &Rel) -> Result<Val> {
        let v = self.expr(e, rel)?;
        Ok(self.materialize(v, rel.rows))
    }

    /// Stable multi-key permutation: one stable pass per key, last key first.
    fn sort_perm(&mut self, keys: &[(Val, bool)], rows: SlotId) -> SlotId {
        let iota = self.b.iota(rows);
        let mut rev = None;
        let mut perm: Option<SlotId> = None;
        for (k, desc) in keys.iter().rev() {
            if k.ty == LogicalType::Utf8 {
                let p = perm.unwrap_or(iota);
                perm = Some(self.emit(Instr::ArgsortRows {
                    keys: k.slot,
                    perm: p,
                    desc: *desc,
                }));
                continue;
            }
            let kv = match perm {
                Some(p) => self.b.gather(k.slot, p),
                None => k.slot,
            };
            let float = k.ty == LogicalType::Float64;
            let step = if *desc {
                let r = *rev.get_or_insert_with(|| {
                    let one = self.b.scalar_i64(1);
                    let last = self.b.arith(rows, one, ArithOp::Sub, false);
                    let neg = self.b.unary(iota, UnaryOp::Neg);
                    self.b.arith(neg, last, ArithOp::Add, true)
                });
                let kr = self.b.gather(kv, r);
                let q = self.emit(Instr::ArgsortStable { keys: kr });
                if float {
                    self.b.pin(q);
                }
                let qr = self.b.gather(q, r);
                self.b.gather(r, qr)
            } else {
                let q = self.emit(Instr::ArgsortStable { keys: kv });
                if float {
                    self.b.pin(q);
                }
                q
            };
            perm = Some(match perm {
                Some(p) => self.b.gather(p, step),
                None => step,
            });
        }
        perm.unwrap_or(iota)
    }

    fn gather_all(&mut self, cols: &[Col], idx: SlotId) -> Vec<Col> {
        cols.iter()
            .map(|c| Col {
                name: c.name.clone(),
                logical: c.logical,
                slot: self.b.gather(c.slot, idx),
            })
            .collect()
    }

    fn node(&mut self, n: &PlanNode) -> Result<Rel> {
        match n {
            PlanNode::Scan { table } => {
                let schema = self
                    .catalog
                    .table(table)
                    .ok_or_else(|| Error::Plan(format!("unknown table `{table}`")))?
                    .clone();
                if schema.is_empty() {
                    return Err(Error::Plan(format!("table `{table}` has no columns")));
                }
                self.b.begin("scan", table.clone());
                let cols: Vec<Col> = schema
                    .columns
                    .iter()
                    .map(|f| Col {
                        name: f.name.clone(),
                        logical: f.ty,
                        slot: self.emit(Instr::Input {
                            table: table.clone(),
                            column: f.name.clone(),
                            logical: f.ty,
                        }),
                    })
                    .collect();
                let rows = self.b.row_count(cols[0].slot);
                self.b.end(rows);
                Ok(Rel { cols, rows })
            }
            PlanNode::Filter { input, predicate } => {
                let r = self.node(input)?;
                self.b.begin("filter", predicate.to_string());
                let mask = self.value_col(predicate, &r)?;
                let iota = self.b.iota(r.rows);
                let idx = self.emit(Instr::Compact {
                    values: iota,
                    mask: mask.slot,
                });
                let cols = self.gather_all(&r.cols, idx);
                let rows = self.b.row_count(idx);
                self.b.end(rows);
                Ok(Rel { cols, rows })
            }
            PlanNode::Project { input, exprs } => {
                let r = self.node(input)?;
                let names: Vec<&str> = exprs.iter().map(|e| e.name.as_str()).collect();
                self.b.begin("project", names.join(", "));
                let mut cols = Vec::with_capacity(exprs.len());
                for ne in exprs {
                    let v = self.value_col(&ne.expr, &r)?;
                    cols.push(Col {
                        name: ne.name.clone(),
                        logical: v.ty,
                        slot: v.slot,
                    });
                }
                self.b.end(r.rows);
                Ok(Rel { cols, rows: r.rows })
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
                self.b.begin("join", format!("{left_key} = {right_key}"));
                let lk = l.col(left_key)?.clone();
                let rk = r.col(right_key)?.clone();
                let perm = self.sort_perm(
                    &[(
                        Val {
                            slot: rk.slot,
                            ty: rk.logical,
                            scalar: false,
                        },
                        false,
                    )],
                    r.rows,
                );
                let sorted = self.b.gather(rk.slot, perm);
                let lo = self.emit(Instr::SearchSorted {
                    sorted,
                    probes: lk.slot,
                    side: Side::Left,
                });
                let hi = self.emit(Instr::SearchSorted {
                    sorted,
                    probes: lk.slot,
                    side: Side::Right,
                });
                if lk.logical == LogicalType::Float64 {
                    self.b.pin(lo);
                }
                let counts = self.b.arith(hi, lo, ArithOp::Sub, false);
                let pos = self.emit(Instr::ExpandSegments { starts: lo, counts });
                let right_ids = self.b.gather(perm, pos);
                let starts = self.emit(Instr::PrefixSumExclusive { x: counts });
                let total = self.b.row_count(pos);
                let out_pos = self.b.iota(total);
                let after = self.emit(Instr::SearchSorted {
                    sorted: starts,
                    probes: out_pos,
                    side: Side::Right,
                });
                let one = self.b.scalar_i64(1);
                let left_ids = self.b.arith(after, one, ArithOp::Sub, true);
                let mut cols = self.gather_all(&l.cols, left_ids);
                let schema = ir::join_schema(&schema_of(&l), &schema_of(&r));
                let right_cols = self.gather_all(&r.cols, right_ids);
                for (c, f) in right_cols.into_iter().zip(&schema.columns[l.cols.len()..]) {
                    cols.push(Col {
                        name: f.name.clone(),
                        ..c
                    });
                }
                self.b.end(total);
                Ok(Rel { cols, rows: total })
            }
            PlanNode::GroupAggregate { input, keys, aggs } => self.aggregate(input, keys, aggs),
            PlanNode::Sort { input, keys } => {
                let r = self.node(input)?;
                let label: Vec<String> = keys
                    .iter()
                    .map(|k| format!("{} {}", k.column, if k.asc { "asc" } else { "desc" }))
                    .collect();
                self.b.begin("sort", label.join(", "));
                let mut ks = Vec::new();
                for k in keys {
                    let c = r.col(&k.column)?;
                    ks.push((
                        Val {
                            slot: c.slot,
                            ty: c.logical,
                            scalar: false,
                        },
                        !k.asc,
                    ));
                }
                let perm = self.sort_perm(&ks, r.rows);
                let cols = self.gather_all(&r.cols, perm);
                self.b.end(r.rows);
                Ok(Rel { cols, rows: r.rows })
            }
            PlanNode::Limit { input, k } => {
                let r = self.node(input)?;
                self.b.begin("limit", k.to_string());
                let idx = self.emit(Instr::Iota {
                    len: r.rows,
                    cap: Some(*k),
                });
                let cols = self.gather_all(&r.cols, idx);
                let rows = self.b.row_count(idx);
                self.b.end(rows);
                Ok(Rel { cols, rows })
            }
        }
    }

    fn aggregate(&mut self, input: &PlanNode, keys: &[String], aggs: &[ir::AggExpr]) -> Result<Rel> {
        let r = self.node(input)?;
        let label: Vec<String> = keys
            .iter()
            .cloned()
            .chain(aggs.iter().map(|a| format!("{}({})", a.func.name(), a.arg)))
            .collect();
        self.b.begin("aggregate", label.join(", "));
        let mut values = Vec::with_capacity(aggs.len());
        for a in aggs {
            values.push(self.value_col(&a.arg, &r)?);
        }
        let mut cols = Vec::new();
        let (ids, nseg, perm) = if keys.is_empty() {
            let zero = self.b.scalar_i64(0);
            let ids = self.b.broadcast(zero, r.rows);
            (ids, self.b.scalar_i64(1), None)
        } else {
            let kcols: Vec<Col> = keys.iter().map(|k| r.col(k).cloned()).collect::<Result<_>>()?;
            let kvals: Vec<(Val, bool)> = kcols
                .iter()
                .map(|c| {
                    (
                        Val {
                            slot: c.slot,
                            ty: c.logical,
                            scalar: false,
                        },
                        false,
                    )
                })
                .collect();
            let perm = self.sort_perm(&kvals, r.rows);
            let sorted: Vec<SlotId> = kcols.iter().map(|c| self.b.gather(c.slot, perm)).collect();
            let mut starts = self.emit(Instr::SegmentStarts { keys: sorted[0] });
            for &s in &sorted[1..] {
                let more = self.emit(Instr::SegmentStarts { keys: s });
                starts = self.emit(Instr::Logical {
                    a: starts,
                    b: more,
                    op: LogicOp::Or,
                });
            }
            let starts_i = self.b.unary(starts, UnaryOp::ToInt64);
            let before = self.emit(Instr::PrefixSumExclusive { x: starts_i });
            let inclusive = self.b.arith(before, starts_i, ArithOp::Add, false);
            let one = self.b.scalar_i64(1);
            let ids = self.b.arith(inclusive, one, ArithOp::Sub, true);
            let iota = self.b.iota(r.rows);
            let first = self.emit(Instr::Compact {
                values: iota,
                mask: starts,
            });
            let nseg = self.b.row_count(first);
            for (c, &s) in kcols.iter().zip(&sorted) {
                cols.push(Col {
                    name: c.name.clone(),
                    logical: c.logical,
                    slot: self.b.gather(s, first),
                });
            }
            (ids, nseg, Some(perm))
        };
        for (a, v) in aggs.iter().zip(values) {
            let vals = match perm {
                Some(p) => self.b.gather(v.slot, p),
                None => v.slot,
            };
            let reduce = |me: &mut Self, values: SlotId, op: ReduceOp| {
                me.emit(Instr::SegmentedReduce {
                    values,
                    ids,
                    num_segments: nseg,
                    op,
                })
            };
            let ty = ir::agg_type(a.func, v.ty).map_err(Error::Plan)?;
            let slot = match a.func {
                AggFunc::Count => reduce(self, ids, ReduceOp::Count),
                AggFunc::Sum => {
                    let s = reduce(self, vals, ReduceOp::Sum);
                    if v.ty != LogicalType::Float64 {
                        self.b.pin(s);
                    }
                    s
                }
                AggFunc::Min | AggFunc::Max => {
                    let op = if a.func == AggFunc::Min { ReduceOp::Min } else { ReduceOp::Max };
                    let s = reduce(self, vals, op);
                    self.b.pin(s);
                    s
                }
                AggFunc::Avg => {
                    let s = reduce(self, vals, ReduceOp::Sum);
                    let c = reduce(self, ids, ReduceOp::Count);
                    let sf = self.b.unary(s, UnaryOp::ToFloat64);
                    let cf = self.b.unary(c, UnaryOp::ToFloat64);
                    let q = self.b.arith(sf, cf, ArithOp::Div, false);
                    self.b.pin(q);
                    q
                }
            };
            cols.push(Col {
                name: a.name.clone(),
                logical: ty,
                slot,
            });
        }
        self.b.end(nseg);
        Ok(Rel { cols, rows: nseg })
    }
}

fn schema_of(r: &Rel) -> crate::store::Schema {
    crate::store::Schema::new(
        r.cols
            .iter()
            .map(|c| crate::store::Field::new(c.name.clone(), c.logical))
            .collect(),
    )
}

/// Lowers a validated plan. Dead instructions are removed, except those
/// that can fail on data.
pub fn plan_operators(plan: &PlanNode, catalog: &Catalog) -> Result<OperatorPlan> {
    ir::infer_schema(plan, catalog)?;
    let mut l = Lowerer {
        b: ProgramBuilder::new(),
        catalog,
        models: HashMap::new(),
    };
    let rel = l.node(plan)?;
    let outputs = rel
        .cols
        .iter()
        .map(|c| OutputColumn {
            name: c.name.clone(),
            logical: c.logical,
            slot: c.slot,
        })
        .collect();
    let mut op = l.b.finish(outputs, rel.rows);
    op.eliminate_dead_code();
    debug_assert!(op.check_slots().is_ok());
    Ok(op)
}
