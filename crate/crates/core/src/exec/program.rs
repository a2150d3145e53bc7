//! Operator plans: relational operators lowered to straight-line kernel
//! instructions over numbered slots.

use std::collections::HashSet;
use std::fmt;

use crate::kernels::{Anchor, ArithOp, CmpOp, LogicOp, ReduceOp, Side, UnaryOp};
use crate::store::LogicalType;
use crate::tensor::Tensor;

pub type SlotId = usize;

/// One instruction writing one slot. Kernel instructions map 1:1 onto
/// [`KernelBackend`](crate::kernels::KernelBackend) calls; the rest move
/// or reshape data without computing on values.
#[derive(Clone, Debug)]
pub enum Instr {
    /// Column of an input table.
    Input {
        table: String,
        column: String,
        logical: LogicalType,
    },
    Const(Tensor),
    /// `1 x 1` Int64 holding the row count of `src`.
    RowCount { src: SlotId },
    /// `[0, n)` where `n` is the scalar in `len`, capped at `cap`.
    Iota { len: SlotId, cap: Option<u64> },
    /// Repeats the single row of `row` as many times as the scalar in `len`.
    Broadcast { row: SlotId, len: SlotId },
    Column { src: SlotId, col: usize },
    HStack { parts: Vec<SlotId> },
    /// Zero-extends `src` to the widest of `like`.
    Widen { src: SlotId, like: Vec<SlotId> },
    /// Stable permutation ordering the rows of a byte matrix, composed by
    /// one stable argsort per byte column from last to first. Starts from
    /// the permutation `perm`.
    ArgsortRows { keys: SlotId, perm: SlotId, desc: bool },

    Compare { a: SlotId, b: SlotId, op: CmpOp, broadcast: bool },
    CompareRows { a: SlotId, b: SlotId, op: CmpOp, broadcast: bool },
    Arith { a: SlotId, b: SlotId, op: ArithOp, broadcast: bool },
    Logical { a: SlotId, b: SlotId, op: LogicOp },
    Not { a: SlotId },
    Unary { a: SlotId, op: UnaryOp },
    SelectWhere { cond: SlotId, a: SlotId, b: SlotId },
    PrefixSumExclusive { x: SlotId },
    Compact { values: SlotId, mask: SlotId },
    ArgsortStable { keys: SlotId },
    Gather { values: SlotId, idx: SlotId },
    SearchSorted { sorted: SlotId, probes: SlotId, side: Side },
    ExpandSegments { starts: SlotId, counts: SlotId },
    SegmentStarts { keys: SlotId },
    /// `num_segments` is a `1 x 1` Int64 slot.
    SegmentedReduce { values: SlotId, ids: SlotId, num_segments: SlotId, op: ReduceOp },
    Matmul { a: SlotId, b: SlotId },
    SubstringMatch { chars: SlotId, pattern: Vec<u8>, anchor: Anchor },
}

impl Instr {
    pub fn name(&self) -> &'static str {
        match self {
            Instr::Input { .. } => "input",
            Instr::Const(_) => "const",
            Instr::RowCount { .. } => "row_count",
            Instr::Iota { .. } => "iota",
            Instr::Broadcast { .. } => "broadcast",
            Instr::Column { .. } => "column",
            Instr::HStack { .. } => "hstack",
            Instr::Widen { .. } => "widen",
            Instr::ArgsortRows { .. } => "argsort_rows",
            Instr::Compare { .. } => "compare",
            Instr::CompareRows { .. } => "compare_rows",
            Instr::Arith { .. } => "arith",
            Instr::Logical { .. } => "logical",
            Instr::Not { .. } => "not",
            Instr::Unary { .. } => "unary",
            Instr::SelectWhere { .. } => "select_where",
            Instr::PrefixSumExclusive { .. } => "prefix_sum_exclusive",
            Instr::Compact { .. } => "compact",
            Instr::ArgsortStable { .. } => "argsort_stable",
            Instr::Gather { .. } => "gather",
            Instr::SearchSorted { .. } => "searchsorted",
            Instr::ExpandSegments { .. } => "expand_segments",
            Instr::SegmentStarts { .. } => "segment_starts",
            Instr::SegmentedReduce { .. } => "segmented_reduce",
            Instr::Matmul { .. } => "matmul",
            Instr::SubstringMatch { .. } => "substring_match",
        }
    }

    /// Short operator detail for listings, e.g. `lt` or `sum`.
    pub fn detail(&self) -> String {
        match self {
            Instr::Input { table, column, .. } => format!("{table}.{column}"),
            Instr::Const(t) => format!("{:?} {}x{}", t.dtype(), t.rows(), t.width()),
            Instr::Iota { cap: Some(k), .. } => format!("cap {k}"),
            Instr::Column { col, .. } => format!("#{col}"),
            Instr::ArgsortRows { desc, .. } => if *desc { "desc" } else { "asc" }.into(),
            Instr::Compare { op, .. } | Instr::CompareRows { op, .. } => op.symbol().into(),
            Instr::Arith { op, .. } => op.symbol().into(),
            Instr::Logical { op, .. } => format!("{op:?}").to_ascii_lowercase(),
            Instr::Unary { op, .. } => format!("{op:?}").to_ascii_lowercase(),
            Instr::SearchSorted { side, .. } => format!("{side:?}").to_ascii_lowercase(),
            Instr::SegmentedReduce { op, .. } => op.name().to_ascii_lowercase(),
            Instr::SubstringMatch { pattern, anchor, .. } => {
                format!("{anchor:?} '{}'", String::from_utf8_lossy(pattern))
            }
            _ => String::new(),
        }
    }

    pub fn is_kernel(&self) -> bool {
        !matches!(
            self,
            Instr::Input { .. }
                | Instr::Const(_)
                | Instr::RowCount { .. }
                | Instr::Iota { .. }
                | Instr::Broadcast { .. }
                | Instr::Column { .. }
                | Instr::HStack { .. }
                | Instr::Widen { .. }
                | Instr::ArgsortRows { .. }
        )
    }

    pub fn reads(&self) -> Vec<SlotId> {
        match self {
            Instr::Input { .. } | Instr::Const(_) => vec![],
            Instr::RowCount { src } | Instr::Column { src, .. } => vec![*src],
            Instr::Iota { len, .. } => vec![*len],
            Instr::Broadcast { row, len } => vec![*row, *len],
            Instr::HStack { parts } => parts.clone(),
            Instr::Widen { src, like } => std::iter::once(*src).chain(like.iter().copied()).collect(),
            Instr::ArgsortRows { keys, perm, .. } => vec![*keys, *perm],
            Instr::Compare { a, b, .. }
            | Instr::CompareRows { a, b, .. }
            | Instr::Arith { a, b, .. }
            | Instr::Logical { a, b, .. }
            | Instr::Matmul { a, b } => vec![*a, *b],
            Instr::Not { a } | Instr::Unary { a, .. } => vec![*a],
            Instr::SelectWhere { cond, a, b } => vec![*cond, *a, *b],
            Instr::PrefixSumExclusive { x } => vec![*x],
            Instr::Compact { values, mask } => vec![*values, *mask],
            Instr::ArgsortStable { keys } | Instr::SegmentStarts { keys } => vec![*keys],
            Instr::Gather { values, idx } => vec![*values, *idx],
            Instr::SearchSorted { sorted, probes, .. } => vec![*sorted, *probes],
            Instr::ExpandSegments { starts, counts } => vec![*starts, *counts],
            Instr::SegmentedReduce {
                values,
                ids,
                num_segments,
                ..
            } => vec![*values, *ids, *num_segments],
            Instr::SubstringMatch { chars, .. } => vec![*chars],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Assign {
    pub out: SlotId,
    pub instr: Instr,
}

/// The subprogram of one relational operator.
#[derive(Clone, Debug)]
pub struct Step {
    pub op_id: usize,
    /// The operator's plan tag (`scan`, `filter`, ...).
    pub op: &'static str,
    pub label: String,
    pub instrs: Vec<Assign>,
    /// Slots read here but written by earlier steps.
    pub inputs: Vec<SlotId>,
    /// Slots written here and read later (or returned).
    pub outputs: Vec<SlotId>,
    /// `1 x 1` row count of the operator's output relation.
    pub rows: SlotId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputColumn {
    pub name: String,
    pub logical: LogicalType,
    pub slot: SlotId,
}

#[derive(Clone, Debug)]
pub struct OperatorPlan {
    pub steps: Vec<Step>,
    pub num_slots: usize,
    pub outputs: Vec<OutputColumn>,
    pub result_rows: SlotId,
    /// Instructions that can fail on data. They survive dead-code
    /// elimination so unused values still raise their errors.
    pub pinned: Vec<SlotId>,
}

impl OperatorPlan {
    pub fn instr_count(&self) -> usize {
        self.steps.iter().map(|s| s.instrs.len()).sum()
    }

    /// Counts instructions with the given name across all steps.
    pub fn count(&self, name: &str) -> usize {
        self.steps
            .iter()
            .flat_map(|s| &s.instrs)
            .filter(|a| a.instr.name() == name)
            .count()
    }

    /// Checks that every slot is written once and read only after it is written.
    pub fn check_slots(&self) -> Result<(), String> {
        let mut written = vec![false; self.num_slots];
        for step in &self.steps {
            for a in &step.instrs {
                for r in a.instr.reads() {
                    if !written.get(r).copied().unwrap_or(false) {
                        return Err(format!("slot {r} read before it is written"));
                    }
                }
                match written.get_mut(a.out) {
                    Some(w) if !*w => *w = true,
                    Some(_) => return Err(format!("slot {} written twice", a.out)),
                    None => return Err(format!("slot {} out of range", a.out)),
                }
            }
        }
        for o in self.outputs.iter().map(|o| o.slot).chain([self.result_rows]) {
            if !written[o] {
                return Err(format!("output slot {o} never written"));
            }
        }
        Ok(())
    }

    /// Removes instructions whose results are never used, then recomputes
    /// step boundaries. Step row counts and outputs are always kept.
    pub fn eliminate_dead_code(&mut self) {
        let mut live: HashSet<SlotId> = self.outputs.iter().map(|o| o.slot).collect();
        live.insert(self.result_rows);
        live.extend(self.steps.iter().map(|s| s.rows));
        live.extend(self.pinned.iter().copied());
        for step in self.steps.iter_mut().rev() {
            let mut kept = Vec::with_capacity(step.instrs.len());
            for a in step.instrs.drain(..).rev() {
                if live.contains(&a.out) {
                    live.extend(a.instr.reads());
                    kept.push(a);
                }
            }
            kept.reverse();
            step.instrs = kept;
        }
        self.recompute_boundaries();
    }

    fn recompute_boundaries(&mut self) {
        let mut owner = vec![usize::MAX; self.num_slots];
        for (si, step) in self.steps.iter().enumerate() {
            for a in &step.instrs {
                owner[a.out] = si;
            }
        }
        let mut read_later = vec![false; self.num_slots];
        for o in &self.outputs {
            read_later[o.slot] = true;
        }
        read_later[self.result_rows] = true;
        let mut inputs: Vec<Vec<SlotId>> = vec![Vec::new(); self.steps.len()];
        for (si, step) in self.steps.iter().enumerate() {
            for a in &step.instrs {
                for r in a.instr.reads() {
                    if owner[r] != si {
                        read_later[r] = true;
                        if !inputs[si].contains(&r) {
                            inputs[si].push(r);
                        }
                    }
                }
            }
        }
        for (si, step) in self.steps.iter_mut().enumerate() {
            step.inputs = std::mem::take(&mut inputs[si]);
            step.outputs = step
                .instrs
                .iter()
                .map(|a| a.out)
                .filter(|&s| read_later[s])
                .collect();
        }
    }

    /// For each slot, the global index of the last instruction reading it.
    /// Returned slots, step row counts and unread slots map to `None`.
    pub fn last_uses(&self) -> Vec<Option<usize>> {
        let mut last = vec![None; self.num_slots];
        let mut k = 0;
        for step in &self.steps {
            for a in &step.instrs {
                for r in a.instr.reads() {
                    last[r] = Some(k);
                }
                k += 1;
            }
        }
        for o in &self.outputs {
            last[o.slot] = None;
        }
        last[self.result_rows] = None;
        for s in &self.steps {
            last[s.rows] = None;
        }
        last
    }
}

impl fmt::Display for OperatorPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "op {} {} [{}]", step.op_id, step.op, step.label)?;
            for a in &step.instrs {
                let reads: Vec<String> = a.instr.reads().iter().map(|r| format!("%{r}")).collect();
                let detail = a.instr.detail();
                writeln!(
                    f,
                    "  %{} = {}{}({})",
                    a.out,
                    a.instr.name(),
                    if detail.is_empty() { String::new() } else { format!("[{detail}]") },
                    reads.join(", ")
                )?;
            }
        }
        let outs: Vec<String> = self.outputs.iter().map(|o| format!("{}=%{}", o.name, o.slot)).collect();
        writeln!(f, "return {}", outs.join(", "))
    }
}

/// Incrementally builds an [`OperatorPlan`], one operator step at a time.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    steps: Vec<Step>,
    next_slot: SlotId,
    open: Option<Step>,
    pinned: Vec<SlotId>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        ProgramBuilder::default()
    }

    pub fn begin(&mut self, op: &'static str, label: impl Into<String>) -> usize {
        assert!(self.open.is_none(), "previous step still open");
        let op_id = self.steps.len();
        self.open = Some(Step {
            op_id,
            op,
            label: label.into(),
            instrs: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            rows: usize::MAX,
        });
        op_id
    }

    pub fn emit(&mut self, instr: Instr) -> SlotId {
        let out = self.next_slot;
        self.next_slot += 1;
        self.open
            .as_mut()
            .expect("emit outside a step")
            .instrs
            .push(Assign { out, instr });
        out
    }

    pub fn end(&mut self, rows: SlotId) {
        let mut step = self.open.take().expect("no open step");
        step.rows = rows;
        self.steps.push(step);
    }

    pub fn finish(self, outputs: Vec<OutputColumn>, result_rows: SlotId) -> OperatorPlan {
        assert!(self.open.is_none(), "step left open");
        let mut plan = OperatorPlan {
            steps: self.steps,
            num_slots: self.next_slot,
            outputs,
            result_rows,
            pinned: self.pinned,
        };
        plan.recompute_boundaries();
        plan
    }

    /// Keeps `slot` through dead-code elimination.
    pub fn pin(&mut self, slot: SlotId) {
        self.pinned.push(slot);
    }

    // Shorthands for frequently emitted instructions.

    pub fn constant(&mut self, t: Tensor) -> SlotId {
        self.emit(Instr::Const(t))
    }

    pub fn scalar_i64(&mut self, v: i64) -> SlotId {
        self.constant(Tensor::from_i64(vec![v]))
    }

    pub fn row_count(&mut self, src: SlotId) -> SlotId {
        self.emit(Instr::RowCount { src })
    }

    pub fn iota(&mut self, len: SlotId) -> SlotId {
        self.emit(Instr::Iota { len, cap: None })
    }

    pub fn broadcast(&mut self, row: SlotId, len: SlotId) -> SlotId {
        self.emit(Instr::Broadcast { row, len })
    }

    pub fn gather(&mut self, values: SlotId, idx: SlotId) -> SlotId {
        self.emit(Instr::Gather { values, idx })
    }

    pub fn arith(&mut self, a: SlotId, b: SlotId, op: ArithOp, broadcast: bool) -> SlotId {
        self.emit(Instr::Arith { a, b, op, broadcast })
    }

    pub fn compare(&mut self, a: SlotId, b: SlotId, op: CmpOp, broadcast: bool) -> SlotId {
        self.emit(Instr::Compare { a, b, op, broadcast })
    }

    pub fn unary(&mut self, a: SlotId, op: UnaryOp) -> SlotId {
        self.emit(Instr::Unary { a, op })
    }

    pub fn select_where(&mut self, cond: SlotId, a: SlotId, b: SlotId) -> SlotId {
        self.emit(Instr::SelectWhere { cond, a, b })
    }

    pub fn matmul(&mut self, a: SlotId, b: SlotId) -> SlotId {
        self.emit(Instr::Matmul { a, b })
    }
}
