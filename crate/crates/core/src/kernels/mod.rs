//! The fixed kernel set every relational operator lowers onto.
//!
//! Kernels are written once against a [`Strategy`] that decides how row
//! ranges are traversed. [`Sequential`] runs everything on the calling
//! thread in row order; [`Chunked`] splits rows into fixed 4096-row chunks
//! and processes them on the rayon pool. Floating point reductions combine
//! chunk partials left to right, so parallel results are deterministic
//! regardless of the thread count.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

mod imp;
mod strategy;

pub use strategy::{Chunked, Sequential, Strategy, CHUNK_LEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }

    /// The operator obtained by swapping operands (`a < b` iff `b > a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogicOp {
    And,
    Or,
}

/// Elementwise unary maps. The casts and `exp` are needed by numeric
/// promotion and the logistic model; they are not relational kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    ToFloat64,
    /// Bool/Int32 widen; Float64 must hold an exact integer.
    ToInt64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReduceOp {
    Sum,
    Count,
    Min,
    Max,
}

impl ReduceOp {
    pub fn name(self) -> &'static str {
        match self {
            ReduceOp::Sum => "SUM",
            ReduceOp::Count => "COUNT",
            ReduceOp::Min => "MIN",
            ReduceOp::Max => "MAX",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Anchor {
    Start,
    End,
    Any,
    Exact,
}

/// Right-hand operand of a binary elementwise kernel.
#[derive(Clone, Copy, Debug)]
pub enum Operand<'a> {
    /// Same shape as the left operand.
    Tensor(&'a Tensor),
    /// A single row applied to every row of the left operand.
    Broadcast(&'a Tensor),
}

impl<'a> Operand<'a> {
    pub fn tensor(&self) -> &'a Tensor {
        match self {
            Operand::Tensor(t) | Operand::Broadcast(t) => t,
        }
    }
}

/// The kernel contract shared by all backends.
///
/// Integer and boolean kernels are bit-identical across backends. Float64
/// reductions may differ in summation order only.
pub trait KernelBackend: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Elementwise comparison over all `n*m` elements.
    fn compare(&self, a: &Tensor, b: Operand<'_>, op: CmpOp) -> Result<Tensor>;

    /// Row-wise lexicographic comparison producing one Bool per row. Rows of
    /// different widths are compared as if the narrower were zero-extended.
    fn compare_rows(&self, a: &Tensor, b: Operand<'_>, op: CmpOp) -> Result<Tensor>;

    fn arith(&self, a: &Tensor, b: Operand<'_>, op: ArithOp) -> Result<Tensor>;

    fn logical(&self, a: &Tensor, b: &Tensor, op: LogicOp) -> Result<Tensor>;

    fn not(&self, a: &Tensor) -> Result<Tensor>;

    fn unary(&self, a: &Tensor, op: UnaryOp) -> Result<Tensor>;

    fn select_where(&self, cond: &Tensor, a: &Tensor, b: &Tensor) -> Result<Tensor>;

    fn prefix_sum_exclusive(&self, x: &Tensor) -> Result<Tensor>;

    fn compact(&self, values: &Tensor, mask: &Tensor) -> Result<Tensor>;

    fn argsort_stable(&self, keys: &Tensor) -> Result<Tensor>;

    fn gather(&self, values: &Tensor, idx: &Tensor) -> Result<Tensor>;

    fn searchsorted(&self, sorted: &Tensor, probes: &Tensor, side: Side) -> Result<Tensor>;

    fn expand_segments(&self, starts: &Tensor, counts: &Tensor) -> Result<Tensor>;

    fn segment_starts(&self, sorted_keys: &Tensor) -> Result<Tensor>;

    fn segmented_reduce(
        &self,
        values: &Tensor,
        segment_ids: &Tensor,
        num_segments: usize,
        op: ReduceOp,
    ) -> Result<Tensor>;

    fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor>;

    fn substring_match(&self, chars: &Tensor, pattern: &[u8], anchor: Anchor) -> Result<Tensor>;
}

/// Single-threaded backend that evaluates rows strictly in order.
pub type ReferenceBackend = imp::Kernels<Sequential>;

/// Multi-threaded backend over the global rayon pool.
pub type ParallelBackend = imp::Kernels<Chunked>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Reference,
    Parallel,
}

impl BackendKind {
    pub fn create(self) -> Arc<dyn KernelBackend> {
        match self {
            BackendKind::Reference => Arc::new(ReferenceBackend::default()),
            BackendKind::Parallel => Arc::new(ParallelBackend::default()),
        }
    }

    pub fn all() -> [BackendKind; 2] {
        [BackendKind::Reference, BackendKind::Parallel]
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ref" | "reference" => Ok(BackendKind::Reference),
            "par" | "parallel" => Ok(BackendKind::Parallel),
            other => Err(Error::InvalidArgument(format!(
                "unknown backend `{other}` (expected ref|par)"
            ))),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Reference => "ref",
            BackendKind::Parallel => "par",
        })
    }
}
