use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use super::program::{Instr, OperatorPlan, SlotId};
use super::trace::{KernelEvent, OperatorEvent, ProfileTrace};
use crate::error::{Error, Result};
use crate::kernels::{KernelBackend, Operand};
use crate::store::{EncodedColumn, EncodedTable};
use crate::tensor::Tensor;

/// Input tables by name.
pub type Tables = BTreeMap<String, EncodedTable>;

/// An operator plan bound to a backend, ready to run.
#[derive(Debug, Clone)]
pub struct Executor {
    plan: Arc<OperatorPlan>,
    backend: Arc<dyn KernelBackend>,
    last_use: Vec<Option<usize>>,
}

fn scalar(t: &Tensor, what: &str) -> Result<i64> {
    match t.as_i64() {
        Ok([v]) => Ok(*v),
        _ => Err(Error::InvalidArgument(format!("{what}: expected a 1x1 Int64 scalar"))),
    }
}

fn to_usize(v: i64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what}: negative length {v}")))
}

impl Executor {
    pub fn new(plan: OperatorPlan, backend: Arc<dyn KernelBackend>) -> Self {
        let last_use = plan.last_uses();
        Executor {
            plan: Arc::new(plan),
            backend,
            last_use,
        }
    }

    pub fn plan(&self) -> &OperatorPlan {
        &self.plan
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    fn operand<'a>(&self, slots: &'a [Option<Tensor>], s: SlotId, broadcast: bool) -> Operand<'a> {
        let t = slots[s].as_ref().expect("slot live");
        if broadcast {
            Operand::Broadcast(t)
        } else {
            Operand::Tensor(t)
        }
    }

    fn eval(&self, instr: &Instr, slots: &[Option<Tensor>], tables: &Tables) -> Result<Tensor> {
        let k = &*self.backend;
        let get = |s: SlotId| slots[s].as_ref().expect("slot live");
        Ok(match instr {
            Instr::Input {
                table,
                column,
                logical,
            } => {
                let t = tables
                    .get(table)
                    .ok_or_else(|| Error::Schema(format!("missing input table `{table}`")))?;
                let c = t
                    .column(column)
                    .ok_or_else(|| Error::Schema(format!("table `{table}` has no column `{column}`")))?;
                if c.logical != *logical {
                    return Err(Error::Schema(format!(
                        "column `{table}.{column}` is {}, plan expects {logical}",
                        c.logical
                    )));
                }
                c.tensor.clone()
            }
            Instr::Const(t) => t.clone(),
            Instr::RowCount { src } => Tensor::from_i64(vec![get(*src).rows() as i64]),
            Instr::Iota { len, cap } => {
                let n = to_usize(scalar(get(*len), "iota")?, "iota")?;
                let n = cap.map_or(n, |c| n.min(usize::try_from(c).unwrap_or(usize::MAX)));
                Tensor::arange(n)
            }
            Instr::Broadcast { row, len } => {
                let n = to_usize(scalar(get(*len), "broadcast")?, "broadcast")?;
                Tensor::broadcast_rows(get(*row), n)?
            }
            Instr::Column { src, col } => get(*src).column(*col)?,
            Instr::HStack { parts } => {
                let ts: Vec<Tensor> = parts.iter().map(|&p| get(p).clone()).collect();
                Tensor::hstack(&ts)?
            }
            Instr::Widen { src, like } => {
                let w = like.iter().map(|&s| get(s).width()).max().unwrap_or(1);
                let src = get(*src);
                src.widen(w.max(src.width()))?
            }
            Instr::ArgsortRows { keys, perm, desc } => self.argsort_rows(get(*keys), get(*perm), *desc)?,
            Instr::Compare { a, b, op, broadcast } => k.compare(get(*a), self.operand(slots, *b, *broadcast), *op)?,
            Instr::CompareRows { a, b, op, broadcast } => {
                k.compare_rows(get(*a), self.operand(slots, *b, *broadcast), *op)?
            }
            Instr::Arith { a, b, op, broadcast } => k.arith(get(*a), self.operand(slots, *b, *broadcast), *op)?,
            Instr::Logical { a, b, op } => k.logical(get(*a), get(*b), *op)?,
            Instr::Not { a } => k.not(get(*a))?,
            Instr::Unary { a, op } => k.unary(get(*a), *op)?,
            Instr::SelectWhere { cond, a, b } => k.select_where(get(*cond), get(*a), get(*b))?,
            Instr::PrefixSumExclusive { x } => k.prefix_sum_exclusive(get(*x))?,
            Instr::Compact { values, mask } => k.compact(get(*values), get(*mask))?,
            Instr::ArgsortStable { keys } => k.argsort_stable(get(*keys))?,
            Instr::Gather { values, idx } => k.gather(get(*values), get(*idx))?,
            Instr::SearchSorted { sorted, probes, side } => k.searchsorted(get(*sorted), get(*probes), *side)?,
            Instr::ExpandSegments { starts, counts } => k.expand_segments(get(*starts), get(*counts))?,
            Instr::SegmentStarts { keys } => k.segment_starts(get(*keys))?,
            Instr::SegmentedReduce {
                values,
                ids,
                num_segments,
                op,
            } => {
                let n = to_usize(scalar(get(*num_segments), "segmented_reduce")?, "segmented_reduce")?;
                k.segmented_reduce(get(*values), get(*ids), n, *op)?
            }
            Instr::Matmul { a, b } => k.matmul(get(*a), get(*b))?,
            Instr::SubstringMatch {
                chars,
                pattern,
                anchor,
            } => k.substring_match(get(*chars), pattern, *anchor)?,
        })
    }

    /// Composes one stable argsort per byte column, last column first.
    /// Descending order sorts the reversed sequence ascending and reverses
    /// the result, which keeps ties in their original order.
    fn argsort_rows(&self, keys: &Tensor, perm: &Tensor, desc: bool) -> Result<Tensor> {
        let k = &*self.backend;
        let n = perm.rows();
        let rev = Tensor::from_i64((0..n as i64).rev().collect());
        let mut perm = perm.clone();
        for c in (0..keys.width()).rev() {
            let col = keys.column(c)?;
            let kv = k.gather(&col, &perm)?;
            let step = if desc {
                let q = k.argsort_stable(&k.gather(&kv, &rev)?)?;
                k.gather(&rev, &k.gather(&q, &rev)?)?
            } else {
                k.argsort_stable(&kv)?
            };
            perm = k.gather(&perm, &step)?;
        }
        Ok(perm)
    }

    fn run(&self, tables: &Tables, mut trace: Option<&mut ProfileTrace>) -> Result<Vec<Tensor>> {
        let plan = &*self.plan;
        let mut slots: Vec<Option<Tensor>> = vec![None; plan.num_slots];
        let origin = Instant::now();
        let mut global = 0usize;
        for step in &plan.steps {
            let step_start = Instant::now();
            let mut step_bytes = 0usize;
            for a in &step.instrs {
                let t0 = Instant::now();
                let out = self.eval(&a.instr, &slots, tables).map_err(|e| Error::Execution {
                    operator: step.op_id,
                    name: format!("{} ({})", step.op, a.instr.name()),
                    source: Box::new(e),
                })?;
                if let Some(tr) = trace.as_deref_mut() {
                    let bytes = if matches!(a.instr, Instr::Input { .. }) { 0 } else { out.byte_size() };
                    step_bytes += bytes;
                    tr.kernels.push(KernelEvent {
                        op_id: step.op_id,
                        name: a.instr.name(),
                        start_ns: (t0 - origin).as_nanos() as u64,
                        dur_ns: t0.elapsed().as_nanos() as u64,
                        rows: out.rows(),
                        bytes,
                    });
                }
                slots[a.out] = Some(out);
                for r in a.instr.reads() {
                    if self.last_use[r] == Some(global) {
                        slots[r] = None;
                    }
                }
                global += 1;
            }
            if let Some(tr) = trace.as_deref_mut() {
                let rows = slots[step.rows]
                    .as_ref()
                    .and_then(|t| t.as_i64().ok().and_then(|v| v.first().copied()))
                    .unwrap_or(0);
                tr.operators.push(OperatorEvent {
                    op_id: step.op_id,
                    name: step.op,
                    label: step.label.clone(),
                    start_ns: (step_start - origin).as_nanos() as u64,
                    dur_ns: step_start.elapsed().as_nanos() as u64,
                    rows_out: rows.max(0) as usize,
                    bytes: step_bytes,
                });
            }
        }
        plan.outputs
            .iter()
            .map(|o| {
                slots[o.slot]
                    .clone()
                    .ok_or_else(|| Error::Plan(format!("output `{}` was not produced", o.name)))
            })
            .collect()
    }

    /// Output tensors in plan order, without table assembly.
    pub fn run_raw(&self, tables: &Tables) -> Result<Vec<Tensor>> {
        self.run(tables, None)
    }

    fn assemble(&self, tensors: Vec<Tensor>) -> Result<EncodedTable> {
        let rows = tensors.first().map_or(0, |t| t.rows());
        let cols = self
            .plan
            .outputs
            .iter()
            .zip(tensors)
            .map(|(o, t)| EncodedColumn::new(o.name.clone(), o.logical, t))
            .collect::<Result<Vec<_>>>()?;
        EncodedTable::new(cols, rows)
    }

    pub fn execute(&self, tables: &Tables) -> Result<EncodedTable> {
        let out = self.run(tables, None)?;
        self.assemble(out)
    }

    pub fn profile_execute(&self, tables: &Tables) -> Result<(EncodedTable, ProfileTrace)> {
        let mut trace = ProfileTrace::new(self.backend.name());
        let out = self.run(tables, Some(&mut trace))?;
        Ok((self.assemble(out)?, trace))
    }
}

/// Binds `plan` to `backend`.
pub fn build_executor(plan: OperatorPlan, backend: Arc<dyn KernelBackend>) -> Executor {
    Executor::new(plan, backend)
}
