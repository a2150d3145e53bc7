//! Dense rectangular tensors: the value carrier for every kernel.
//!
//! A [`Tensor`] has `rows` (n) rows of `width` (m) elements stored
//! row-major. Column vectors have width 1. Buffers are reference counted so
//! cloning a tensor never copies data; tensors are never mutated after
//! construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DType {
    Bool,
    Int32,
    Int64,
    Float64,
}

impl DType {
    pub fn size_of(self) -> usize {
        match self {
            DType::Bool => 1,
            DType::Int32 => 4,
            DType::Int64 | DType::Float64 => 8,
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DType::Bool => "bool",
            DType::Int32 => "int32",
            DType::Int64 => "int64",
            DType::Float64 => "float64",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    Bool(Vec<bool>),
    Int32(Vec<i32>),
    Int64(Vec<i64>),
    Float64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::Bool(_) => DType::Bool,
            TensorData::Int32(_) => DType::Int32,
            TensorData::Int64(_) => DType::Int64,
            TensorData::Float64(_) => DType::Float64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::Bool(v) => v.len(),
            TensorData::Int32(v) => v.len(),
            TensorData::Int64(v) => v.len(),
            TensorData::Float64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl From<Vec<bool>> for TensorData {
    fn from(v: Vec<bool>) -> Self {
        TensorData::Bool(v)
    }
}
impl From<Vec<i32>> for TensorData {
    fn from(v: Vec<i32>) -> Self {
        TensorData::Int32(v)
    }
}
impl From<Vec<i64>> for TensorData {
    fn from(v: Vec<i64>) -> Self {
        TensorData::Int64(v)
    }
}
impl From<Vec<f64>> for TensorData {
    fn from(v: Vec<f64>) -> Self {
        TensorData::Float64(v)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    data: Arc<TensorData>,
    rows: usize,
    width: usize,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor<{}>({}x{}) ", self.dtype(), self.rows, self.width)?;
        match &*self.data {
            TensorData::Bool(v) => v.fmt(f),
            TensorData::Int32(v) => v.fmt(f),
            TensorData::Int64(v) => v.fmt(f),
            TensorData::Float64(v) => v.fmt(f),
        }
    }
}

impl Tensor {
    /// Builds an `rows x width` tensor. Fails when the buffer length is not
    /// exactly `rows * width` or `width` is zero.
    pub fn new(data: impl Into<TensorData>, rows: usize, width: usize) -> Result<Self> {
        let data = data.into();
        if width == 0 {
            return Err(Error::ShapeMismatch {
                kernel: "tensor",
                detail: "width must be at least 1".into(),
            });
        }
        if rows.checked_mul(width) != Some(data.len()) {
            return Err(Error::ShapeMismatch {
                kernel: "tensor",
                detail: format!(
                    "buffer of {} elements cannot hold {rows}x{width}",
                    data.len()
                ),
            });
        }
        Ok(Tensor {
            data: Arc::new(data),
            rows,
            width,
        })
    }

    /// Column vector (width 1).
    pub fn vector(data: impl Into<TensorData>) -> Self {
        let data = data.into();
        let rows = data.len();
        Tensor {
            data: Arc::new(data),
            rows,
            width: 1,
        }
    }

    pub fn from_bool(v: Vec<bool>) -> Self {
        Self::vector(v)
    }
    pub fn from_i32(v: Vec<i32>) -> Self {
        Self::vector(v)
    }
    pub fn from_i64(v: Vec<i64>) -> Self {
        Self::vector(v)
    }
    pub fn from_f64(v: Vec<f64>) -> Self {
        Self::vector(v)
    }

    pub fn empty(dtype: DType, width: usize) -> Self {
        let data = match dtype {
            DType::Bool => TensorData::Bool(Vec::new()),
            DType::Int32 => TensorData::Int32(Vec::new()),
            DType::Int64 => TensorData::Int64(Vec::new()),
            DType::Float64 => TensorData::Float64(Vec::new()),
        };
        Tensor {
            data: Arc::new(data),
            rows: 0,
            width: width.max(1),
        }
    }

    /// `[0, 1, ..., n-1]` as Int64.
    pub fn arange(n: usize) -> Self {
        Self::from_i64((0..n as i64).collect())
    }

    /// Repeats the single row of `row` `n` times.
    pub fn broadcast_rows(row: &Tensor, n: usize) -> Result<Self> {
        if row.rows != 1 {
            return Err(Error::ShapeMismatch {
                kernel: "broadcast",
                detail: format!("expected a single row, found {}", row.rows),
            });
        }
        fn rep<T: Clone>(v: &[T], n: usize) -> Vec<T> {
            let mut out = Vec::with_capacity(v.len() * n);
            for _ in 0..n {
                out.extend_from_slice(v);
            }
            out
        }
        let data = match row.data() {
            TensorData::Bool(v) => TensorData::Bool(rep(v, n)),
            TensorData::Int32(v) => TensorData::Int32(rep(v, n)),
            TensorData::Int64(v) => TensorData::Int64(rep(v, n)),
            TensorData::Float64(v) => TensorData::Float64(rep(v, n)),
        };
        Tensor::new(data, n, row.width)
    }

    /// Concatenates vectors (or matrices) of equal row count side by side.
    pub fn hstack(parts: &[Tensor]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::ShapeMismatch {
            kernel: "hstack",
            detail: "no inputs".into(),
        })?;
        let rows = first.rows;
        let dtype = first.dtype();
        let width: usize = parts.iter().map(|p| p.width).sum();
        for p in parts {
            if p.rows != rows {
                return Err(Error::ShapeMismatch {
                    kernel: "hstack",
                    detail: format!("row counts {} and {}", rows, p.rows),
                });
            }
            if p.dtype() != dtype {
                return Err(Error::DTypeMismatch {
                    kernel: "hstack",
                    expected: dtype.to_string(),
                    found: p.dtype().to_string(),
                });
            }
        }
        macro_rules! stack {
            ($variant:ident, $acc:ident) => {{
                let slices: Vec<&[_]> = parts.iter().map(|p| p.$acc().unwrap()).collect();
                let mut out = Vec::with_capacity(rows * width);
                for r in 0..rows {
                    for (s, p) in slices.iter().zip(parts) {
                        out.extend_from_slice(&s[r * p.width..(r + 1) * p.width]);
                    }
                }
                TensorData::$variant(out)
            }};
        }
        let data = match dtype {
            DType::Bool => stack!(Bool, as_bool),
            DType::Int32 => stack!(Int32, as_i32),
            DType::Int64 => stack!(Int64, as_i64),
            DType::Float64 => stack!(Float64, as_f64),
        };
        Tensor::new(data, rows, width)
    }

    /// Extracts column `col` of a matrix as a vector.
    pub fn column(&self, col: usize) -> Result<Self> {
        if col >= self.width {
            return Err(Error::ShapeMismatch {
                kernel: "column",
                detail: format!("column {col} of width {}", self.width),
            });
        }
        fn pick<T: Copy>(v: &[T], w: usize, c: usize) -> Vec<T> {
            v.iter().skip(c).step_by(w).copied().collect()
        }
        let w = self.width;
        let data = match self.data() {
            TensorData::Bool(v) => TensorData::Bool(pick(v, w, col)),
            TensorData::Int32(v) => TensorData::Int32(pick(v, w, col)),
            TensorData::Int64(v) => TensorData::Int64(pick(v, w, col)),
            TensorData::Float64(v) => TensorData::Float64(pick(v, w, col)),
        };
        Ok(Tensor::vector(data))
    }

    /// Zero-extends every row to `width` columns.
    pub fn widen(&self, width: usize) -> Result<Self> {
        if width < self.width {
            return Err(Error::ShapeMismatch {
                kernel: "widen",
                detail: format!("cannot narrow width {} to {width}", self.width),
            });
        }
        if width == self.width {
            return Ok(self.clone());
        }
        fn pad<T: Copy + Default>(v: &[T], from: usize, to: usize) -> Vec<T> {
            let rows = if from == 0 { 0 } else { v.len() / from };
            let mut out = Vec::with_capacity(rows * to);
            for r in 0..rows {
                out.extend_from_slice(&v[r * from..(r + 1) * from]);
                out.resize(out.len() + (to - from), T::default());
            }
            out
        }
        let (f, t) = (self.width, width);
        let data = match self.data() {
            TensorData::Bool(v) => TensorData::Bool(pad(v, f, t)),
            TensorData::Int32(v) => TensorData::Int32(pad(v, f, t)),
            TensorData::Int64(v) => TensorData::Int64(pad(v, f, t)),
            TensorData::Float64(v) => TensorData::Float64(pad(v, f, t)),
        };
        Tensor::new(data, self.rows, width)
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.width)
    }

    pub fn is_vector(&self) -> bool {
        self.width == 1
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn byte_size(&self) -> usize {
        self.data.len() * self.dtype().size_of()
    }

    pub fn as_bool(&self) -> Result<&[bool]> {
        match &*self.data {
            TensorData::Bool(v) => Ok(v),
            _ => Err(self.mismatch(DType::Bool)),
        }
    }

    pub fn as_i32(&self) -> Result<&[i32]> {
        match &*self.data {
            TensorData::Int32(v) => Ok(v),
            _ => Err(self.mismatch(DType::Int32)),
        }
    }

    pub fn as_i64(&self) -> Result<&[i64]> {
        match &*self.data {
            TensorData::Int64(v) => Ok(v),
            _ => Err(self.mismatch(DType::Int64)),
        }
    }

    pub fn as_f64(&self) -> Result<&[f64]> {
        match &*self.data {
            TensorData::Float64(v) => Ok(v),
            _ => Err(self.mismatch(DType::Float64)),
        }
    }

    fn mismatch(&self, expected: DType) -> Error {
        Error::DTypeMismatch {
            kernel: "tensor",
            expected: expected.to_string(),
            found: self.dtype().to_string(),
        }
    }

    /// Equality that treats floats by bit pattern, so NaN equals NaN.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        if self.shape() != other.shape() {
            return false;
        }
        match (self.data(), other.data()) {
            (TensorData::Float64(a), TensorData::Float64(b)) => {
                a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (a, b) => a == b,
        }
    }
}
