use std::cmp::Ordering;
use std::marker::PhantomData;
use std::ops::Range;

use super::{
    Anchor, ArithOp, CmpOp, KernelBackend, LogicOp, Operand, ReduceOp, Side, Strategy, UnaryOp,
};
use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor, TensorData};

#[derive(Debug, Default)]
pub struct Kernels<S: Strategy> {
    strategy: S,
    _marker: PhantomData<S>,
}

/// Element types the generic kernels operate on. `Default` is the padding
/// value (zero / false).
trait Elem: Copy + PartialOrd + Default + Send + Sync + 'static {}
impl Elem for bool {}
impl Elem for i32 {}
impl Elem for i64 {}
impl Elem for f64 {}

/// Dispatches `$body` with `$v` bound to the typed slice of `$t`.
macro_rules! with_slice {
    ($t:expr, $v:ident => $body:expr) => {
        match $t.data() {
            TensorData::Bool($v) => TensorData::from($body),
            TensorData::Int32($v) => TensorData::from($body),
            TensorData::Int64($v) => TensorData::from($body),
            TensorData::Float64($v) => TensorData::from($body),
        }
    };
}

/// Dispatches over two tensors already checked to share a dtype.
macro_rules! with_pair {
    ($a:expr, $b:expr, ($x:ident, $y:ident) => $body:expr) => {
        match ($a.data(), $b.data()) {
            (TensorData::Bool($x), TensorData::Bool($y)) => $body,
            (TensorData::Int32($x), TensorData::Int32($y)) => $body,
            (TensorData::Int64($x), TensorData::Int64($y)) => $body,
            (TensorData::Float64($x), TensorData::Float64($y)) => $body,
            _ => unreachable!("dtypes checked by caller"),
        }
    };
}

fn same_dtype(kernel: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dtype() != b.dtype() {
        return Err(Error::DTypeMismatch {
            kernel,
            expected: a.dtype().to_string(),
            found: b.dtype().to_string(),
        });
    }
    Ok(())
}

fn want_vector(kernel: &'static str, t: &Tensor) -> Result<()> {
    if !t.is_vector() {
        return Err(Error::ShapeMismatch {
            kernel,
            detail: format!("expected a vector, found {}x{}", t.rows(), t.width()),
        });
    }
    Ok(())
}

fn shape_err(kernel: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { kernel, detail }
}

/// Validates `b` against `a` for elementwise kernels and returns how to
/// index `b` for element `j` of `a`: `true` when `b` is a broadcast row.
fn elementwise_shape(kernel: &'static str, a: &Tensor, b: Operand<'_>) -> Result<bool> {
    match b {
        Operand::Tensor(t) => {
            if t.shape() != a.shape() {
                return Err(shape_err(
                    kernel,
                    format!("{:?} vs {:?}", a.shape(), t.shape()),
                ));
            }
            Ok(false)
        }
        Operand::Broadcast(t) => {
            if t.rows() != 1 || t.width() != a.width() {
                return Err(shape_err(
                    kernel,
                    format!("broadcast operand {:?} for {:?}", t.shape(), a.shape()),
                ));
            }
            Ok(true)
        }
    }
}

#[inline]
fn cmp_elem<T: PartialOrd>(a: T, b: T, op: CmpOp) -> bool {
    match op {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
    }
}

/// Lexicographic comparison with zero extension of the shorter row.
/// `None` when an unordered (NaN) pair is met before the rows differ.
#[inline]
fn row_cmp<T: Elem>(a: &[T], b: &[T]) -> Option<Ordering> {
    let len = a.len().max(b.len());
    for k in 0..len {
        let x = a.get(k).copied().unwrap_or_default();
        let y = b.get(k).copied().unwrap_or_default();
        match x.partial_cmp(&y)? {
            Ordering::Equal => continue,
            ord => return Some(ord),
        }
    }
    Some(Ordering::Equal)
}

fn first_nan(kernel: &'static str, t: &Tensor) -> Result<()> {
    if let TensorData::Float64(v) = t.data() {
        if let Some(position) = v.iter().position(|x| x.is_nan()) {
            return Err(Error::NanKey {
                kernel,
                position: position / t.width(),
            });
        }
    }
    Ok(())
}

impl<S: Strategy> Kernels<S> {
    /// Maps `f` over `0..n`; on failure reports the smallest failing index.
    fn try_map<T, F>(&self, n: usize, f: F) -> std::result::Result<Vec<T>, usize>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        let out = self.strategy.map(n, f);
        if let Some(p) = out.iter().position(Option::is_none) {
            return Err(p);
        }
        Ok(out.into_iter().map(|x| x.unwrap()).collect())
    }

    /// Smallest `i` in `0..n` with `bad(i)`.
    fn first_violation<F>(&self, n: usize, bad: F) -> Option<usize>
    where
        F: Fn(usize) -> bool + Sync + Send,
    {
        self.strategy
            .map_ranges(n, |r| r.into_iter().find(|&i| bad(i)))
            .into_iter()
            .flatten()
            .next()
    }

    /// Writes `windows.len()` variable-size output windows, each produced by
    /// `f(range_index, window)`.
    fn fill<T, F>(&self, total: usize, windows: &[Range<usize>], f: F) -> Vec<T>
    where
        T: Elem,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let mut out = vec![T::default(); total];
        self.strategy.fill_windows(&mut out, windows, f);
        out
    }

    fn compare_typed<T: Elem>(&self, a: &[T], b: &[T], bcast: bool, m: usize, op: CmpOp) -> Vec<bool> {
        if bcast {
            self.strategy.map(a.len(), |j| cmp_elem(a[j], b[j % m], op))
        } else {
            self.strategy.map(a.len(), |j| cmp_elem(a[j], b[j], op))
        }
    }

    fn compare_rows_typed<T: Elem>(
        &self,
        a: &[T],
        ma: usize,
        b: &[T],
        mb: usize,
        bcast: bool,
        n: usize,
        op: CmpOp,
    ) -> Vec<bool> {
        self.strategy.map(n, |i| {
            let ra = &a[i * ma..(i + 1) * ma];
            let rb = if bcast { b } else { &b[i * mb..(i + 1) * mb] };
            match row_cmp(ra, rb) {
                Some(ord) => op.holds(ord),
                None => op == CmpOp::Ne,
            }
        })
    }

    fn arith_int<T, F>(&self, a: &[T], b: &[T], bcast: bool, m: usize, f: F) -> Result<Vec<T>>
    where
        T: Elem,
        F: Fn(T, T) -> Option<T> + Sync + Send,
    {
        let r = if bcast {
            self.try_map(a.len(), |j| f(a[j], b[j % m]))
        } else {
            self.try_map(a.len(), |j| f(a[j], b[j]))
        };
        r.map_err(|j| Error::Overflow {
            kernel: "arith",
            row: j / m,
        })
    }

    fn arith_f64(&self, a: &[f64], b: &[f64], bcast: bool, m: usize, op: ArithOp) -> Result<Vec<f64>> {
        let rhs = |j: usize| if bcast { b[j % m] } else { b[j] };
        Ok(match op {
            ArithOp::Add => self.strategy.map(a.len(), |j| a[j] + rhs(j)),
            ArithOp::Sub => self.strategy.map(a.len(), |j| a[j] - rhs(j)),
            ArithOp::Mul => self.strategy.map(a.len(), |j| a[j] * rhs(j)),
            ArithOp::Div => {
                if let Some(j) = self.first_violation(a.len(), |j| rhs(j) == 0.0) {
                    return Err(Error::DivisionByZero { row: j / m });
                }
                self.strategy.map(a.len(), |j| a[j] / rhs(j))
            }
        })
    }

    fn compact_typed<T: Elem>(&self, v: &[T], m: usize, mask: &[bool]) -> Vec<T> {
        let n = mask.len();
        let ranges = self.strategy.ranges(n);
        let counts: Vec<usize> = self
            .strategy
            .map_ranges(n, |r| mask[r].iter().filter(|&&x| x).count());
        let mut windows = Vec::with_capacity(ranges.len());
        let mut pos = 0;
        for c in &counts {
            windows.push(pos * m..(pos + c) * m);
            pos += c;
        }
        self.fill(pos * m, &windows, |w, out| {
            let mut o = 0;
            for i in ranges[w].clone() {
                if mask[i] {
                    out[o..o + m].copy_from_slice(&v[i * m..(i + 1) * m]);
                    o += m;
                }
            }
        })
    }

    fn gather_typed<T: Elem>(&self, v: &[T], m: usize, idx: &[i64]) -> Vec<T> {
        if m == 1 {
            self.strategy.map(idx.len(), |i| v[idx[i] as usize])
        } else {
            self.strategy
                .map(idx.len() * m, |j| v[idx[j / m] as usize * m + j % m])
        }
    }

    fn argsort_typed<T: Elem>(&self, keys: &[T]) -> Vec<i64> {
        // Ties broken by position: equal keys keep their input order.
        let mut pairs: Vec<(T, i64)> = keys.iter().copied().zip(0..).collect();
        self.strategy.sort_by_total(&mut pairs, |a, b| {
            a.0.partial_cmp(&b.0)
                .expect("NaN keys rejected before sorting")
                .then(a.1.cmp(&b.1))
        });
        pairs.into_iter().map(|(_, i)| i).collect()
    }

    fn searchsorted_typed<T: Elem>(
        &self,
        sorted: &[T],
        ms: usize,
        probes: &[T],
        mp: usize,
        side: Side,
    ) -> Vec<i64> {
        let n = sorted.len() / ms;
        let k = probes.len() / mp;
        self.strategy.map(k, |i| {
            let p = &probes[i * mp..(i + 1) * mp];
            let (mut lo, mut hi) = (0usize, n);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                let row = &sorted[mid * ms..(mid + 1) * ms];
                let ord = row_cmp(row, p).expect("NaN keys rejected before search");
                let go_right = match side {
                    Side::Left => ord == Ordering::Less,
                    Side::Right => ord != Ordering::Greater,
                };
                if go_right {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            lo as i64
        })
    }

    fn segment_starts_typed<T: Elem>(&self, v: &[T], m: usize, n: usize) -> Vec<bool> {
        self.strategy.map(n, |i| {
            i == 0 || v[i * m..(i + 1) * m] != v[(i - 1) * m..i * m]
        })
    }

    /// Per-range, per-segment partial reductions; ranges touch a contiguous
    /// run of segments because ids are non-decreasing.
    fn partials<A, F>(&self, ids: &[i64], init: A, step: F) -> Vec<Vec<(usize, A)>>
    where
        A: Copy + Send + Sync,
        F: Fn(A, usize) -> A + Sync + Send,
    {
        self.strategy.map_ranges(ids.len(), |r| {
            let mut out: Vec<(usize, A)> = Vec::new();
            for i in r {
                let seg = ids[i] as usize;
                match out.last_mut() {
                    Some((s, acc)) if *s == seg => *acc = step(*acc, i),
                    _ => out.push((seg, step(init, i))),
                }
            }
            out
        })
    }

    fn reduce_minmax<T: Elem>(
        &self,
        v: &[T],
        ids: &[i64],
        num_segments: usize,
        op: ReduceOp,
        pick: fn(T, T, bool) -> T,
    ) -> Result<Vec<T>> {
        let is_min = op == ReduceOp::Min;
        let parts = self.partials(ids, None::<T>, |acc, i| {
            Some(match acc {
                None => v[i],
                Some(a) => pick(a, v[i], is_min),
            })
        });
        let mut out: Vec<Option<T>> = vec![None; num_segments];
        for (seg, p) in parts.into_iter().flatten() {
            let p = p.expect("partials are populated");
            out[seg] = Some(match out[seg] {
                None => p,
                Some(a) => pick(a, p, is_min),
            });
        }
        if let Some(segment) = out.iter().position(Option::is_none) {
            return Err(Error::EmptySegment {
                op: op.name(),
                segment,
            });
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }
}

fn pick_ord<T: PartialOrd>(a: T, b: T, is_min: bool) -> T {
    let take_b = if is_min { b < a } else { b > a };
    if take_b {
        b
    } else {
        a
    }
}

fn pick_f64(a: f64, b: f64, is_min: bool) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        pick_ord(a, b, is_min)
    }
}

impl<S: Strategy> KernelBackend for Kernels<S> {
    fn name(&self) -> &'static str {
        S::NAME
    }

    fn compare(&self, a: &Tensor, b: Operand<'_>, op: CmpOp) -> Result<Tensor> {
        let bt = b.tensor();
        same_dtype("compare", a, bt)?;
        let bcast = elementwise_shape("compare", a, b)?;
        let m = a.width();
        let out = with_pair!(a, bt, (x, y) => self.compare_typed(x, y, bcast, m, op));
        Tensor::new(out, a.rows(), m)
    }

    fn compare_rows(&self, a: &Tensor, b: Operand<'_>, op: CmpOp) -> Result<Tensor> {
        let bt = b.tensor();
        same_dtype("compare_rows", a, bt)?;
        let bcast = match b {
            Operand::Tensor(t) if t.rows() == a.rows() => false,
            Operand::Broadcast(t) if t.rows() == 1 => true,
            _ => {
                return Err(shape_err(
                    "compare_rows",
                    format!("{:?} vs {:?}", a.shape(), bt.shape()),
                ))
            }
        };
        let (n, ma, mb) = (a.rows(), a.width(), bt.width());
        let out = with_pair!(a, bt, (x, y) => self.compare_rows_typed(x, ma, y, mb, bcast, n, op));
        Ok(Tensor::from_bool(out))
    }

    fn arith(&self, a: &Tensor, b: Operand<'_>, op: ArithOp) -> Result<Tensor> {
        let bt = b.tensor();
        same_dtype("arith", a, bt)?;
        let bcast = elementwise_shape("arith", a, b)?;
        let m = a.width();
        if op == ArithOp::Div && a.dtype() != DType::Float64 {
            return Err(Error::DTypeMismatch {
                kernel: "arith(div)",
                expected: DType::Float64.to_string(),
                found: a.dtype().to_string(),
            });
        }
        let out: TensorData = match (a.data(), bt.data()) {
            (TensorData::Int32(x), TensorData::Int32(y)) => TensorData::from(match op {
                ArithOp::Add => self.arith_int(x, y, bcast, m, i32::checked_add)?,
                ArithOp::Sub => self.arith_int(x, y, bcast, m, i32::checked_sub)?,
                ArithOp::Mul => self.arith_int(x, y, bcast, m, i32::checked_mul)?,
                ArithOp::Div => unreachable!(),
            }),
            (TensorData::Int64(x), TensorData::Int64(y)) => TensorData::from(match op {
                ArithOp::Add => self.arith_int(x, y, bcast, m, i64::checked_add)?,
                ArithOp::Sub => self.arith_int(x, y, bcast, m, i64::checked_sub)?,
                ArithOp::Mul => self.arith_int(x, y, bcast, m, i64::checked_mul)?,
                ArithOp::Div => unreachable!(),
            }),
            (TensorData::Float64(x), TensorData::Float64(y)) => {
                TensorData::from(self.arith_f64(x, y, bcast, m, op)?)
            }
            _ => {
                return Err(Error::DTypeMismatch {
                    kernel: "arith",
                    expected: "numeric".into(),
                    found: a.dtype().to_string(),
                })
            }
        };
        Tensor::new(out, a.rows(), m)
    }

    fn logical(&self, a: &Tensor, b: &Tensor, op: LogicOp) -> Result<Tensor> {
        let x = a.as_bool()?;
        let y = b.as_bool().map_err(|_| Error::DTypeMismatch {
            kernel: "logical",
            expected: "bool".into(),
            found: b.dtype().to_string(),
        })?;
        if a.shape() != b.shape() {
            return Err(shape_err("logical", format!("{:?} vs {:?}", a.shape(), b.shape())));
        }
        let out = match op {
            LogicOp::And => self.strategy.map(x.len(), |i| x[i] && y[i]),
            LogicOp::Or => self.strategy.map(x.len(), |i| x[i] || y[i]),
        };
        Tensor::new(out, a.rows(), a.width())
    }

    fn not(&self, a: &Tensor) -> Result<Tensor> {
        let x = a.as_bool()?;
        Tensor::new(self.strategy.map(x.len(), |i| !x[i]), a.rows(), a.width())
    }

    fn unary(&self, a: &Tensor, op: UnaryOp) -> Result<Tensor> {
        let m = a.width();
        let overflow = |j: usize| Error::Overflow {
            kernel: "unary",
            row: j / m,
        };
        let out: TensorData = match (op, a.data()) {
            (UnaryOp::Neg, TensorData::Int32(v)) => self
                .try_map(v.len(), |j| v[j].checked_neg())
                .map_err(overflow)?
                .into(),
            (UnaryOp::Neg, TensorData::Int64(v)) => self
                .try_map(v.len(), |j| v[j].checked_neg())
                .map_err(overflow)?
                .into(),
            (UnaryOp::Neg, TensorData::Float64(v)) => self.strategy.map(v.len(), |j| -v[j]).into(),
            (UnaryOp::Exp, TensorData::Float64(v)) => {
                self.strategy.map(v.len(), |j| v[j].exp()).into()
            }
            (UnaryOp::ToFloat64, TensorData::Bool(v)) => self
                .strategy
                .map(v.len(), |j| if v[j] { 1.0 } else { 0.0 })
                .into(),
            (UnaryOp::ToFloat64, TensorData::Int32(v)) => {
                self.strategy.map(v.len(), |j| v[j] as f64).into()
            }
            (UnaryOp::ToFloat64, TensorData::Int64(v)) => {
                self.strategy.map(v.len(), |j| v[j] as f64).into()
            }
            (UnaryOp::ToFloat64, TensorData::Float64(_)) => return Ok(a.clone()),
            (UnaryOp::ToInt64, TensorData::Bool(v)) => {
                self.strategy.map(v.len(), |j| v[j] as i64).into()
            }
            (UnaryOp::ToInt64, TensorData::Int32(v)) => {
                self.strategy.map(v.len(), |j| v[j] as i64).into()
            }
            (UnaryOp::ToInt64, TensorData::Int64(_)) => return Ok(a.clone()),
            (UnaryOp::ToInt64, TensorData::Float64(v)) => self
                .try_map(v.len(), |j| {
                    let x = v[j];
                    // 2^63 is exactly representable; anything at or above it is out of range.
                    let in_range = x >= -9_223_372_036_854_775_808.0 && x < 9_223_372_036_854_775_808.0;
                    (x.fract() == 0.0 && in_range).then_some(x as i64)
                })
                .map_err(overflow)?
                .into(),
            (op, _) => {
                return Err(Error::DTypeMismatch {
                    kernel: "unary",
                    expected: format!("operand valid for {op:?}"),
                    found: a.dtype().to_string(),
                })
            }
        };
        Tensor::new(out, a.rows(), m)
    }

    fn select_where(&self, cond: &Tensor, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let c = cond.as_bool()?;
        same_dtype("select_where", a, b)?;
        if a.shape() != b.shape() {
            return Err(shape_err("select_where", format!("{:?} vs {:?}", a.shape(), b.shape())));
        }
        let m = a.width();
        // Either one flag per element or one flag per row.
        let per_row = if cond.shape() == a.shape() {
            false
        } else if cond.is_vector() && cond.rows() == a.rows() {
            true
        } else {
            return Err(shape_err(
                "select_where",
                format!("condition {:?} for {:?}", cond.shape(), a.shape()),
            ));
        };
        let out = with_pair!(a, b, (x, y) => TensorData::from(self.strategy.map(x.len(), |j| {
            let keep = if per_row { c[j / m] } else { c[j] };
            if keep { x[j] } else { y[j] }
        })));
        Tensor::new(out, a.rows(), m)
    }

    fn prefix_sum_exclusive(&self, x: &Tensor) -> Result<Tensor> {
        want_vector("prefix_sum_exclusive", x)?;
        let v = x.as_i64()?;
        let n = v.len();
        let ranges = self.strategy.ranges(n);
        let totals: Vec<i128> = self
            .strategy
            .map_ranges(n, |r| v[r].iter().map(|&e| e as i128).sum());
        let mut offsets = Vec::with_capacity(totals.len());
        let mut acc = 0i128;
        for t in &totals {
            offsets.push(acc);
            acc += t;
        }
        let mut out = vec![0i64; n];
        let bad: Vec<Option<usize>> = {
            let mut result = vec![None; ranges.len()];
            let flags = std::sync::Mutex::new(&mut result);
            self.strategy.fill_windows(&mut out, &ranges, |w, dst| {
                let mut run = offsets[w];
                let base = ranges[w].start;
                for (k, slot) in dst.iter_mut().enumerate() {
                    match i64::try_from(run) {
                        Ok(val) => *slot = val,
                        Err(_) => {
                            flags.lock().unwrap()[w] = Some(base + k);
                            return;
                        }
                    }
                    run += v[base + k] as i128;
                }
            });
            result
        };
        if let Some(row) = bad.into_iter().flatten().next() {
            return Err(Error::Overflow {
                kernel: "prefix_sum_exclusive",
                row,
            });
        }
        Ok(Tensor::from_i64(out))
    }

    fn compact(&self, values: &Tensor, mask: &Tensor) -> Result<Tensor> {
        want_vector("compact", mask)?;
        let mk = mask.as_bool()?;
        if mk.len() != values.rows() {
            return Err(shape_err(
                "compact",
                format!("mask of {} rows for {} rows", mk.len(), values.rows()),
            ));
        }
        let m = values.width();
        let out = with_slice!(values, v => self.compact_typed(v, m, mk));
        let rows = out.len() / m;
        Tensor::new(out, rows, m)
    }

    fn argsort_stable(&self, keys: &Tensor) -> Result<Tensor> {
        want_vector("argsort_stable", keys)?;
        first_nan("argsort_stable", keys)?;
        let idx = match keys.data() {
            TensorData::Bool(v) => self.argsort_typed(v),
            TensorData::Int32(v) => self.argsort_typed(v),
            TensorData::Int64(v) => self.argsort_typed(v),
            TensorData::Float64(v) => self.argsort_typed(v),
        };
        Ok(Tensor::from_i64(idx))
    }

    fn gather(&self, values: &Tensor, idx: &Tensor) -> Result<Tensor> {
        want_vector("gather", idx)?;
        let ix = idx.as_i64()?;
        let n = values.rows();
        if let Some(position) = self.first_violation(ix.len(), |i| ix[i] < 0 || ix[i] as usize >= n) {
            return Err(Error::IndexOutOfBounds {
                position,
                index: ix[position],
                len: n,
            });
        }
        let m = values.width();
        let out = with_slice!(values, v => self.gather_typed(v, m, ix));
        Tensor::new(out, ix.len(), m)
    }

    fn searchsorted(&self, sorted: &Tensor, probes: &Tensor, side: Side) -> Result<Tensor> {
        same_dtype("searchsorted", sorted, probes)?;
        first_nan("searchsorted", sorted)?;
        first_nan("searchsorted", probes)?;
        let (ms, mp) = (sorted.width(), probes.width());
        let out = with_pair!(sorted, probes, (s, p) => self.searchsorted_typed(s, ms, p, mp, side));
        Ok(Tensor::from_i64(out))
    }

    fn expand_segments(&self, starts: &Tensor, counts: &Tensor) -> Result<Tensor> {
        want_vector("expand_segments", starts)?;
        want_vector("expand_segments", counts)?;
        let st = starts.as_i64()?;
        let ct = counts.as_i64()?;
        if st.len() != ct.len() {
            return Err(shape_err(
                "expand_segments",
                format!("{} starts for {} counts", st.len(), ct.len()),
            ));
        }
        let k = st.len();
        if let Some(position) = self.first_violation(k, |i| ct[i] < 0) {
            return Err(Error::NegativeCount {
                position,
                count: ct[position],
            });
        }
        if let Some(row) = self.first_violation(k, |i| {
            ct[i] > 0 && st[i].checked_add(ct[i] - 1).is_none()
        }) {
            return Err(Error::Overflow {
                kernel: "expand_segments",
                row,
            });
        }
        let ranges = self.strategy.ranges(k);
        let totals: Vec<usize> = self
            .strategy
            .map_ranges(k, |r| ct[r].iter().map(|&c| c as usize).sum());
        let mut windows = Vec::with_capacity(ranges.len());
        let mut pos = 0usize;
        for t in &totals {
            windows.push(pos..pos + t);
            pos += t;
        }
        let out = self.fill(pos, &windows, |w, dst| {
            let mut o = 0;
            for i in ranges[w].clone() {
                for step in 0..ct[i] {
                    dst[o] = st[i] + step;
                    o += 1;
                }
            }
        });
        Ok(Tensor::from_i64(out))
    }

    fn segment_starts(&self, sorted_keys: &Tensor) -> Result<Tensor> {
        let (n, m) = sorted_keys.shape();
        let out = match sorted_keys.data() {
            TensorData::Bool(v) => self.segment_starts_typed(v, m, n),
            TensorData::Int32(v) => self.segment_starts_typed(v, m, n),
            TensorData::Int64(v) => self.segment_starts_typed(v, m, n),
            TensorData::Float64(v) => self.segment_starts_typed(v, m, n),
        };
        Ok(Tensor::from_bool(out))
    }

    fn segmented_reduce(
        &self,
        values: &Tensor,
        segment_ids: &Tensor,
        num_segments: usize,
        op: ReduceOp,
    ) -> Result<Tensor> {
        want_vector("segmented_reduce", values)?;
        want_vector("segmented_reduce", segment_ids)?;
        let ids = segment_ids.as_i64()?;
        if ids.len() != values.rows() {
            return Err(shape_err(
                "segmented_reduce",
                format!("{} ids for {} values", ids.len(), values.rows()),
            ));
        }
        if let Some(row) = self.first_violation(ids.len(), |i| {
            ids[i] < 0 || ids[i] as usize >= num_segments || (i > 0 && ids[i] < ids[i - 1])
        }) {
            return Err(Error::BadSegmentIds { row, num_segments });
        }
        match (op, values.data()) {
            (ReduceOp::Count, _) => {
                let parts = self.partials(ids, 0i64, |acc, _| acc + 1);
                let mut out = vec![0i64; num_segments];
                for (seg, c) in parts.into_iter().flatten() {
                    out[seg] += c;
                }
                Ok(Tensor::from_i64(out))
            }
            (ReduceOp::Sum, TensorData::Int64(v)) => {
                let parts = self.partials(ids, 0i128, |acc, i| acc + v[i] as i128);
                let mut acc = vec![0i128; num_segments];
                for (seg, p) in parts.into_iter().flatten() {
                    acc[seg] += p;
                }
                let out = acc
                    .iter()
                    .enumerate()
                    .map(|(seg, &s)| {
                        i64::try_from(s).map_err(|_| Error::Overflow {
                            kernel: "segmented_reduce",
                            row: seg,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Tensor::from_i64(out))
            }
            (ReduceOp::Sum, TensorData::Float64(v)) => {
                let parts = self.partials(ids, 0.0f64, |acc, i| acc + v[i]);
                let mut out = vec![0.0f64; num_segments];
                for (seg, p) in parts.into_iter().flatten() {
                    out[seg] += p;
                }
                Ok(Tensor::from_f64(out))
            }
            (ReduceOp::Min | ReduceOp::Max, TensorData::Int64(v)) => Ok(Tensor::from_i64(
                self.reduce_minmax(v, ids, num_segments, op, pick_ord)?,
            )),
            (ReduceOp::Min | ReduceOp::Max, TensorData::Int32(v)) => Ok(Tensor::from_i32(
                self.reduce_minmax(v, ids, num_segments, op, pick_ord)?,
            )),
            (ReduceOp::Min | ReduceOp::Max, TensorData::Float64(v)) => Ok(Tensor::from_f64(
                self.reduce_minmax(v, ids, num_segments, op, pick_f64)?,
            )),
            _ => Err(Error::DTypeMismatch {
                kernel: "segmented_reduce",
                expected: format!("numeric values for {}", op.name()),
                found: values.dtype().to_string(),
            }),
        }
    }

    fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let x = a.as_f64()?;
        let y = b.as_f64().map_err(|_| Error::DTypeMismatch {
            kernel: "matmul",
            expected: "float64".into(),
            found: b.dtype().to_string(),
        })?;
        let (n, k) = a.shape();
        let (k2, p) = b.shape();
        if k != k2 {
            return Err(shape_err("matmul", format!("({n}x{k}) * ({k2}x{p})")));
        }
        let row_ranges = self.strategy.ranges(n);
        let windows: Vec<Range<usize>> = row_ranges.iter().map(|r| r.start * p..r.end * p).collect();
        let out = self.fill::<f64, _>(n * p, &windows, |w, dst| {
            let rows = row_ranges[w].clone();
            for (local, i) in rows.enumerate() {
                let acc = &mut dst[local * p..(local + 1) * p];
                for t in 0..k {
                    let av = x[i * k + t];
                    let brow = &y[t * p..(t + 1) * p];
                    for (o, bv) in acc.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
        });
        Tensor::new(out, n, p)
    }

    fn substring_match(&self, chars: &Tensor, pattern: &[u8], anchor: Anchor) -> Result<Tensor> {
        let v = chars.as_i32()?;
        let (n, m) = chars.shape();
        let pat: Vec<i32> = pattern.iter().map(|&b| b as i32).collect();
        let pl = pat.len();
        let out = self.strategy.map(n, |i| {
            let row = &v[i * m..(i + 1) * m];
            let len = row.iter().rposition(|&c| c != 0).map_or(0, |p| p + 1);
            let s = &row[..len];
            match anchor {
                Anchor::Start => s.starts_with(&pat),
                Anchor::End => s.ends_with(&pat),
                Anchor::Exact => s == pat.as_slice(),
                Anchor::Any => pl == 0 || (pl <= len && s.windows(pl).any(|w| w == pat.as_slice())),
            }
        });
        Ok(Tensor::from_bool(out))
    }
}
