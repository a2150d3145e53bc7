//! Linear-scan oracles for the fourteen relational kernels.

use std::cmp::Ordering;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tensql::kernels::{Anchor, ArithOp, BackendKind, CmpOp, KernelBackend, LogicOp, Operand, ReduceOp, Side};
use tensql::{DType, Error, Tensor, TensorData};

pub const KERNELS: [&str; 14] = [
    "compare",
    "arith",
    "logical",
    "select_where",
    "prefix_sum_exclusive",
    "compact",
    "argsort_stable",
    "gather",
    "searchsorted",
    "expand_segments",
    "segment_starts",
    "segmented_reduce",
    "matmul",
    "substring_match",
];

pub const MAX_N: usize = 10_000;

type Run = Box<dyn Fn(&dyn KernelBackend) -> tensql::Result<Tensor>>;

/// One randomized kernel call and what it must return.
struct Case {
    label: String,
    run: Run,
    expect: Result<Tensor, Error>,
    /// Float64 reductions may differ by summation order.
    tolerant: bool,
}

fn size(rng: &mut ChaCha8Rng) -> usize {
    match rng.gen_range(0..10) {
        0 => rng.gen_range(0..4),
        1..=3 => rng.gen_range(0..MAX_N + 1),
        _ => rng.gen_range(0..600),
    }
}

fn float(rng: &mut ChaCha8Rng, nan: bool) -> f64 {
    match rng.gen_range(0..12) {
        0 => -0.0,
        1 => 0.0,
        2 if nan => f64::NAN,
        3 => 1.5,
        4 => -2.25,
        _ => (rng.gen_range(-1000.0..1000.0f64) * 4.0).round() / 4.0,
    }
}

fn values(rng: &mut ChaCha8Rng, dtype: DType, len: usize, nan: bool) -> TensorData {
    let narrow = rng.gen_bool(0.5);
    match dtype {
        DType::Bool => TensorData::Bool((0..len).map(|_| rng.gen_bool(0.5)).collect()),
        DType::Int32 => TensorData::Int32(
            (0..len)
                .map(|_| if narrow { rng.gen_range(0..4) } else { rng.gen_range(0..128) })
                .collect(),
        ),
        DType::Int64 => TensorData::Int64(
            (0..len)
                .map(|_| if narrow { rng.gen_range(-3..4) } else { rng.gen_range(-1_000_000..1_000_000) })
                .collect(),
        ),
        DType::Float64 => TensorData::Float64((0..len).map(|_| float(rng, nan)).collect()),
    }
}

fn tensor(rng: &mut ChaCha8Rng, dtype: DType, rows: usize, width: usize, nan: bool) -> Tensor {
    Tensor::new(values(rng, dtype, rows * width, nan), rows, width).unwrap()
}

fn any_dtype(rng: &mut ChaCha8Rng) -> DType {
    [DType::Bool, DType::Int32, DType::Int64, DType::Float64][rng.gen_range(0..4)]
}

fn width(rng: &mut ChaCha8Rng, dtype: DType) -> usize {
    if dtype == DType::Int32 {
        rng.gen_range(1..5)
    } else {
        1
    }
}

/// Elements of `t` as f64 for ordering, or exact integers for ints.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
enum Scalar {
    B(bool),
    I(i64),
    F(f64),
}

fn scalars(t: &Tensor) -> Vec<Scalar> {
    match t.data() {
        TensorData::Bool(v) => v.iter().map(|&x| Scalar::B(x)).collect(),
        TensorData::Int32(v) => v.iter().map(|&x| Scalar::I(x as i64)).collect(),
        TensorData::Int64(v) => v.iter().map(|&x| Scalar::I(x)).collect(),
        TensorData::Float64(v) => v.iter().map(|&x| Scalar::F(x)).collect(),
    }
}

fn rebuild(dtype: DType, items: &[Scalar], rows: usize, width: usize) -> Tensor {
    let data = match dtype {
        DType::Bool => TensorData::Bool(items.iter().map(|s| matches!(s, Scalar::B(true))).collect()),
        DType::Int32 => TensorData::Int32(
            items
                .iter()
                .map(|s| match s {
                    Scalar::I(x) => *x as i32,
                    _ => unreachable!(),
                })
                .collect(),
        ),
        DType::Int64 => TensorData::Int64(
            items
                .iter()
                .map(|s| match s {
                    Scalar::I(x) => *x,
                    _ => unreachable!(),
                })
                .collect(),
        ),
        DType::Float64 => TensorData::Float64(
            items
                .iter()
                .map(|s| match s {
                    Scalar::F(x) => *x,
                    _ => unreachable!(),
                })
                .collect(),
        ),
    };
    Tensor::new(data, rows, width).unwrap()
}

fn holds(op: CmpOp, ord: Option<Ordering>) -> bool {
    match ord {
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

fn row_cmp(a: &[Scalar], b: &[Scalar]) -> Option<Ordering> {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y)? {
            Ordering::Equal => {}
            o => return Some(o),
        }
    }
    Some(Ordering::Equal)
}

const CMP_OPS: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

fn case_compare(rng: &mut ChaCha8Rng) -> Case {
    let dtype = any_dtype(rng);
    let (n, m) = (size(rng), width(rng, dtype));
    let a = tensor(rng, dtype, n, m, true);
    let bcast = rng.gen_bool(0.3);
    let b = tensor(rng, dtype, if bcast { 1 } else { n }, m, true);
    let op = CMP_OPS[rng.gen_range(0..6)];
    let (xa, xb) = (scalars(&a), scalars(&b));
    let out: Vec<bool> = (0..n * m)
        .map(|j| holds(op, xa[j].partial_cmp(&xb[if bcast { j % m } else { j }])))
        .collect();
    Case {
        label: format!("{op:?} {dtype} n={n} m={m} broadcast={bcast}"),
        expect: Ok(Tensor::new(out, n, m).unwrap()),
        run: Box::new(move |k| {
            let rhs = if bcast { Operand::Broadcast(&b) } else { Operand::Tensor(&b) };
            k.compare(&a, rhs, op)
        }),
        tolerant: false,
    }
}

fn case_arith(rng: &mut ChaCha8Rng) -> Case {
    let n = size(rng);
    let bcast = rng.gen_bool(0.3);
    let bn = if bcast { 1 } else { n };
    let float = rng.gen_bool(0.5);
    let (a, b, op, expect) = if float {
        let op = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div][rng.gen_range(0..4)];
        let a = tensor(rng, DType::Float64, n, 1, true);
        let mut b = tensor(rng, DType::Float64, bn, 1, true);
        if op == ArithOp::Div && rng.gen_bool(0.7) {
            // Mostly divide by non-zero values so both outcomes are covered.
            let v: Vec<f64> = b.as_f64().unwrap().iter().map(|&x| if x == 0.0 { 0.5 } else { x }).collect();
            b = Tensor::from_f64(v);
        }
        let (x, y) = (a.as_f64().unwrap().to_vec(), b.as_f64().unwrap().to_vec());
        let rhs = |j: usize| y[if bcast { 0 } else { j }];
        let expect = match (op, (0..n).find(|&j| rhs(j) == 0.0)) {
            (ArithOp::Div, Some(row)) => Err(Error::DivisionByZero { row }),
            _ => Ok(Tensor::from_f64(
                (0..n)
                    .map(|j| match op {
                        ArithOp::Add => x[j] + rhs(j),
                        ArithOp::Sub => x[j] - rhs(j),
                        ArithOp::Mul => x[j] * rhs(j),
                        ArithOp::Div => x[j] / rhs(j),
                    })
                    .collect(),
            )),
        };
        (a, b, op, expect)
    } else {
        let op = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul][rng.gen_range(0..3)];
        let big = rng.gen_bool(0.2);
        let gen = |rng: &mut ChaCha8Rng, len: usize| -> Vec<i64> {
            (0..len)
                .map(|_| {
                    if big && rng.gen_bool(0.001) {
                        [i64::MAX - 1, i64::MIN + 1, 1 << 40][rng.gen_range(0..3)]
                    } else {
                        rng.gen_range(-100_000..100_000)
                    }
                })
                .collect()
        };
        let (x, y) = (gen(rng, n), gen(rng, bn));
        let rhs = |j: usize| y[if bcast { 0 } else { j }];
        let mut out = Vec::with_capacity(n);
        let mut err = None;
        for (j, &xv) in x.iter().enumerate() {
            let r = match op {
                ArithOp::Add => xv.checked_add(rhs(j)),
                ArithOp::Sub => xv.checked_sub(rhs(j)),
                _ => xv.checked_mul(rhs(j)),
            };
            match r {
                Some(v) => out.push(v),
                None => {
                    err = Some(Error::Overflow { kernel: "arith", row: j });
                    break;
                }
            }
        }
        let expect = err.map_or_else(|| Ok(Tensor::from_i64(out)), Err);
        (Tensor::from_i64(x), Tensor::from_i64(y), op, expect)
    };
    Case {
        label: format!("{op:?} float={float} n={n} broadcast={bcast}"),
        expect,
        run: Box::new(move |k| {
            let rhs = if bcast { Operand::Broadcast(&b) } else { Operand::Tensor(&b) };
            k.arith(&a, rhs, op)
        }),
        tolerant: false,
    }
}

fn case_logical(rng: &mut ChaCha8Rng) -> Case {
    let n = size(rng);
    let a = tensor(rng, DType::Bool, n, 1, false);
    let b = tensor(rng, DType::Bool, n, 1, false);
    let (x, y) = (a.as_bool().unwrap().to_vec(), b.as_bool().unwrap().to_vec());
    let which = rng.gen_range(0..3);
    let out: Vec<bool> = (0..n)
        .map(|i| match which {
            0 => x[i] && y[i],
            1 => x[i] || y[i],
            _ => !x[i],
        })
        .collect();
    Case {
        label: format!("variant {which} n={n}"),
        expect: Ok(Tensor::from_bool(out)),
        run: Box::new(move |k| match which {
            0 => k.logical(&a, &b, LogicOp::And),
            1 => k.logical(&a, &b, LogicOp::Or),
            _ => k.not(&a),
        }),
        tolerant: false,
    }
}

fn case_select_where(rng: &mut ChaCha8Rng) -> Case {
    let dtype = any_dtype(rng);
    let (n, m) = (size(rng), width(rng, dtype));
    let c = tensor(rng, DType::Bool, n, 1, false);
    let a = tensor(rng, dtype, n, m, true);
    let b = tensor(rng, dtype, n, m, true);
    let (cv, xa, xb) = (c.as_bool().unwrap().to_vec(), scalars(&a), scalars(&b));
    let out: Vec<Scalar> = (0..n * m).map(|j| if cv[j / m] { xa[j] } else { xb[j] }).collect();
    Case {
        label: format!("{dtype} n={n} m={m}"),
        expect: Ok(rebuild(dtype, &out, n, m)),
        run: Box::new(move |k| k.select_where(&c, &a, &b)),
        tolerant: false,
    }
}

fn case_prefix_sum(rng: &mut ChaCha8Rng) -> Case {
    let n = size(rng);
    let big = rng.gen_bool(0.15);
    let x: Vec<i64> = (0..n)
        .map(|_| {
            if big && rng.gen_bool(0.01) {
                i64::MAX / 3
            } else {
                rng.gen_range(0..100)
            }
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    let mut run = 0i128;
    let mut expect = None;
    for (i, &v) in x.iter().enumerate() {
        match i64::try_from(run) {
            Ok(r) => out.push(r),
            Err(_) => {
                expect = Some(Error::Overflow {
                    kernel: "prefix_sum_exclusive",
                    row: i,
                });
                break;
            }
        }
        run += v as i128;
    }
    let t = Tensor::from_i64(x);
    Case {
        label: format!("n={n} big={big}"),
        expect: expect.map_or_else(|| Ok(Tensor::from_i64(out)), Err),
        run: Box::new(move |k| k.prefix_sum_exclusive(&t)),
        tolerant: false,
    }
}

fn case_compact(rng: &mut ChaCha8Rng) -> Case {
    let dtype = any_dtype(rng);
    let (n, m) = (size(rng), width(rng, dtype));
    let v = tensor(rng, dtype, n, m, true);
    let p = rng.gen_range(0.0..=1.0);
    let mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
    let xs = scalars(&v);
    let kept: Vec<Scalar> = (0..n)
        .filter(|&i| mask[i])
        .flat_map(|i| xs[i * m..(i + 1) * m].to_vec())
        .collect();
    let rows = kept.len() / m;
    let mt = Tensor::from_bool(mask);
    Case {
        label: format!("{dtype} n={n} m={m} p={p:.2}"),
        expect: Ok(rebuild(dtype, &kept, rows, m)),
        run: Box::new(move |k| k.compact(&v, &mt)),
        tolerant: false,
    }
}

fn case_argsort(rng: &mut ChaCha8Rng) -> Case {
    let dtype = any_dtype(rng);
    let n = size(rng);
    let nan = rng.gen_bool(0.1);
    let keys = tensor(rng, dtype, n, 1, nan);
    let xs = scalars(&keys);
    let expect = match xs.iter().position(|s| matches!(s, Scalar::F(f) if f.is_nan())) {
        Some(position) => Err(Error::NanKey {
            kernel: "argsort_stable",
            position,
        }),
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            // `sort_by` is stable, so equal keys keep input order.
            idx.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap());
            Ok(Tensor::from_i64(idx.into_iter().map(|i| i as i64).collect()))
        }
    };
    Case {
        label: format!("{dtype} n={n}"),
        expect,
        run: Box::new(move |k| k.argsort_stable(&keys)),
        tolerant: false,
    }
}

fn case_gather(rng: &mut ChaCha8Rng) -> Case {
    let dtype = any_dtype(rng);
    let (n, m, k) = (size(rng), width(rng, dtype), size(rng));
    let v = tensor(rng, dtype, n, m, true);
    let bad = rng.gen_bool(0.1);
    let idx: Vec<i64> = (0..k)
        .map(|_| {
            if n == 0 || (bad && rng.gen_bool(0.01)) {
                [-1, n as i64][rng.gen_range(0..2)]
            } else {
                rng.gen_range(0..n as i64)
            }
        })
        .collect();
    let expect = match idx.iter().position(|&i| i < 0 || i as usize >= n) {
        Some(position) => Err(Error::IndexOutOfBounds {
            position,
            index: idx[position],
            len: n,
        }),
        None => {
            let xs = scalars(&v);
            let out: Vec<Scalar> = idx.iter().flat_map(|&i| xs[i as usize * m..(i as usize + 1) * m].to_vec()).collect();
            Ok(rebuild(dtype, &out, k, m))
        }
    };
    let it = Tensor::from_i64(idx);
    Case {
        label: format!("{dtype} n={n} m={m} k={k}"),
        expect,
        run: Box::new(move |b| b.gather(&v, &it)),
        tolerant: false,
    }
}

fn sorted_rows(rng: &mut ChaCha8Rng, dtype: DType, n: usize, m: usize, nan: bool) -> Tensor {
    let t = tensor(rng, dtype, n, m, nan);
    let xs = scalars(&t);
    let mut rows: Vec<&[Scalar]> = xs.chunks(m).collect();
    rows.sort_by(|a, b| a.iter().zip(*b).map(|(x, y)| total_cmp(x, y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal));
    let flat: Vec<Scalar> = rows.concat();
    rebuild(dtype, &flat, n, m)
}

/// Total order for sorting test inputs; NaN sorts last.
fn total_cmp(a: &Scalar, b: &Scalar) -> Ordering {
    match (a, b) {
        (Scalar::F(x), Scalar::F(y)) => x.total_cmp(y),
        _ => a.partial_cmp(b).expect("non-float scalars are ordered"),
    }
}

fn first_nan_row(t: &Tensor) -> Option<usize> {
    match t.data() {
        TensorData::Float64(v) => v.iter().position(|x| x.is_nan()).map(|p| p / t.width()),
        _ => None,
    }
}

fn case_searchsorted(rng: &mut ChaCha8Rng) -> Case {
    let dtype = [DType::Int32, DType::Int64, DType::Float64][rng.gen_range(0..3)];
    let m = width(rng, dtype);
    let (n, k) = (size(rng), size(rng));
    let nan = rng.gen_bool(0.05);
    let sorted = sorted_rows(rng, dtype, n, m, nan);
    let probes = tensor(rng, dtype, k, m, nan);
    let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
    let expect = if let Some(position) = first_nan_row(&sorted).or_else(|| first_nan_row(&probes)) {
        Err(Error::NanKey {
            kernel: "searchsorted",
            position,
        })
    } else {
        let (s, p) = (scalars(&sorted), scalars(&probes));
        let out: Vec<i64> = p
            .chunks(m)
            .map(|probe| {
                s.chunks(m)
                    .filter(|row| match row_cmp(row, probe).unwrap() {
                        Ordering::Less => true,
                        Ordering::Equal => side == Side::Right,
                        Ordering::Greater => false,
                    })
                    .count() as i64
            })
            .collect();
        Ok(Tensor::from_i64(out))
    };
    Case {
        label: format!("{dtype} n={n} k={k} m={m} {side:?}"),
        expect,
        run: Box::new(move |b| b.searchsorted(&sorted, &probes, side)),
        tolerant: false,
    }
}

fn case_expand_segments(rng: &mut ChaCha8Rng) -> Case {
    let k = size(rng);
    let bad = rng.gen_range(0..10);
    let mut starts: Vec<i64> = (0..k).map(|_| rng.gen_range(-1000..1_000_000)).collect();
    let mut counts: Vec<i64> = (0..k).map(|_| rng.gen_range(0..6)).collect();
    if k > 0 && bad == 0 {
        counts[rng.gen_range(0..k)] = -rng.gen_range(1..5);
    }
    if k > 0 && bad == 1 {
        let i = rng.gen_range(0..k);
        starts[i] = i64::MAX - 1;
        counts[i] = 3;
    }
    let expect = if let Some(position) = counts.iter().position(|&c| c < 0) {
        Err(Error::NegativeCount {
            position,
            count: counts[position],
        })
    } else if let Some(row) = (0..k).find(|&i| counts[i] > 0 && starts[i].checked_add(counts[i] - 1).is_none()) {
        Err(Error::Overflow {
            kernel: "expand_segments",
            row,
        })
    } else {
        let mut out = Vec::new();
        for (s, c) in starts.iter().zip(&counts) {
            out.extend(*s..*s + *c);
        }
        Ok(Tensor::from_i64(out))
    };
    let (st, ct) = (Tensor::from_i64(starts), Tensor::from_i64(counts));
    Case {
        label: format!("k={k} bad={bad}"),
        expect,
        run: Box::new(move |b| b.expand_segments(&st, &ct)),
        tolerant: false,
    }
}

fn case_segment_starts(rng: &mut ChaCha8Rng) -> Case {
    let dtype = any_dtype(rng);
    let (n, m) = (size(rng), width(rng, dtype));
    let nan = rng.gen_bool(0.05);
    let keys = sorted_rows(rng, dtype, n, m, nan);
    let xs = scalars(&keys);
    let out: Vec<bool> = (0..n)
        .map(|i| i == 0 || (0..m).any(|c| xs[i * m + c] != xs[(i - 1) * m + c]))
        .collect();
    Case {
        label: format!("{dtype} n={n} m={m}"),
        expect: Ok(Tensor::from_bool(out)),
        run: Box::new(move |b| b.segment_starts(&keys)),
        tolerant: false,
    }
}

fn pick(acc: Scalar, x: Scalar, is_min: bool) -> Scalar {
    if let (Scalar::F(a), Scalar::F(b)) = (acc, x) {
        if a.is_nan() || b.is_nan() {
            return Scalar::F(f64::NAN);
        }
    }
    let take = if is_min { x < acc } else { x > acc };
    if take {
        x
    } else {
        acc
    }
}

fn case_segmented_reduce(rng: &mut ChaCha8Rng) -> Case {
    let op = [ReduceOp::Sum, ReduceOp::Count, ReduceOp::Min, ReduceOp::Max][rng.gen_range(0..4)];
    let dtype = match op {
        ReduceOp::Sum => [DType::Int64, DType::Float64][rng.gen_range(0..2)],
        ReduceOp::Count => any_dtype(rng),
        _ => [DType::Int32, DType::Int64, DType::Float64][rng.gen_range(0..3)],
    };
    let n = size(rng);
    let segs = if rng.gen_bool(0.5) { rng.gen_range(1..8) } else { rng.gen_range(1..n.max(1) * 2 + 2) };
    let mut ids: Vec<i64> = (0..n).map(|_| rng.gen_range(0..segs as i64)).collect();
    ids.sort_unstable();
    if n > 1 && rng.gen_bool(0.05) {
        let i = rng.gen_range(1..n);
        ids[i] = ids[i - 1] - 1;
    }
    let values = match (op, dtype) {
        (ReduceOp::Sum, DType::Float64) => Tensor::from_f64((0..n).map(|_| rng.gen_range(0.0..1000.0)).collect()),
        (ReduceOp::Sum, DType::Int64) if rng.gen_bool(0.1) => {
            Tensor::from_i64((0..n).map(|_| if rng.gen_bool(0.01) { i64::MAX / 2 } else { 7 }).collect())
        }
        _ => tensor(rng, dtype, n, 1, true),
    };
    let expect = if let Some(row) =
        (0..n).find(|&i| ids[i] < 0 || ids[i] as usize >= segs || (i > 0 && ids[i] < ids[i - 1]))
    {
        Err(Error::BadSegmentIds { row, num_segments: segs })
    } else {
        let xs = scalars(&values);
        let mut members: Vec<Vec<Scalar>> = vec![Vec::new(); segs];
        for (i, &id) in ids.iter().enumerate() {
            members[id as usize].push(xs[i]);
        }
        match op {
            ReduceOp::Count => Ok(Tensor::from_i64(members.iter().map(|m| m.len() as i64).collect())),
            ReduceOp::Sum if dtype == DType::Int64 => {
                let sums: Vec<i128> = members
                    .iter()
                    .map(|m| {
                        m.iter()
                            .map(|s| match s {
                                Scalar::I(x) => *x as i128,
                                _ => 0,
                            })
                            .sum()
                    })
                    .collect();
                match sums.iter().position(|s| i64::try_from(*s).is_err()) {
                    Some(row) => Err(Error::Overflow {
                        kernel: "segmented_reduce",
                        row,
                    }),
                    None => Ok(Tensor::from_i64(sums.iter().map(|&s| s as i64).collect())),
                }
            }
            ReduceOp::Sum => Ok(Tensor::from_f64(
                members
                    .iter()
                    .map(|m| {
                        m.iter().fold(0.0, |acc, s| match s {
                            Scalar::F(x) => acc + x,
                            _ => acc,
                        })
                    })
                    .collect(),
            )),
            _ => match members.iter().position(|m| m.is_empty()) {
                Some(segment) => Err(Error::EmptySegment { op: op.name(), segment }),
                None => {
                    let out: Vec<Scalar> = members
                        .iter()
                        .map(|m| m[1..].iter().fold(m[0], |acc, &x| pick(acc, x, op == ReduceOp::Min)))
                        .collect();
                    Ok(rebuild(dtype, &out, segs, 1))
                }
            },
        }
    };
    let it = Tensor::from_i64(ids);
    Case {
        label: format!("{op:?} {dtype} n={n} segments={segs}"),
        expect,
        run: Box::new(move |b| b.segmented_reduce(&values, &it, segs, op)),
        tolerant: dtype == DType::Float64 && op == ReduceOp::Sum,
    }
}

fn case_matmul(rng: &mut ChaCha8Rng) -> Case {
    let n = size(rng) / 4;
    let (k, p) = (rng.gen_range(1..9), rng.gen_range(1..9));
    let gen = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect() };
    let (x, y) = (gen(rng, n * k), gen(rng, k * p));
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            let mut acc = 0.0;
            for t in 0..k {
                acc += x[i * k + t] * y[t * p + j];
            }
            out[i * p + j] = acc;
        }
    }
    let a = Tensor::new(x, n, k).unwrap();
    let b = Tensor::new(y, k, p).unwrap();
    Case {
        label: format!("({n}x{k})*({k}x{p})"),
        expect: Ok(Tensor::new(out, n, p).unwrap()),
        run: Box::new(move |be| be.matmul(&a, &b)),
        tolerant: true,
    }
}

fn case_substring_match(rng: &mut ChaCha8Rng) -> Case {
    const ALPHABET: &[u8] = b"ABOMR P";
    let n = size(rng);
    let max_len = rng.gen_range(0..12);
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|_| {
            let len = rng.gen_range(0..=max_len);
            (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
        })
        .collect();
    let plen = rng.gen_range(0..=max_len + 2);
    let pattern: Vec<u8> = (0..plen).map(|_| ALPHABET[rng.gen_range(0..3)]).collect();
    let anchor = [Anchor::Start, Anchor::End, Anchor::Any, Anchor::Exact][rng.gen_range(0..4)];
    let out: Vec<bool> = rows
        .iter()
        .map(|s| {
            let s = s.as_slice();
            let p = pattern.as_slice();
            match anchor {
                Anchor::Start => s.len() >= p.len() && &s[..p.len()] == p,
                Anchor::End => s.len() >= p.len() && &s[s.len() - p.len()..] == p,
                Anchor::Exact => s == p,
                Anchor::Any => p.is_empty() || (0..s.len()).any(|o| s[o..].starts_with(p)),
            }
        })
        .collect();
    let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
    let chars = tensql::store::encode_string_bytes("s", &refs).unwrap().tensor;
    Case {
        label: format!("{anchor:?} n={n} pattern={:?}", String::from_utf8_lossy(&pattern)),
        expect: Ok(Tensor::from_bool(out)),
        run: Box::new(move |b| b.substring_match(&chars, &pattern, anchor)),
        tolerant: false,
    }
}

fn close(a: &Tensor, b: &Tensor, rel: f64) -> bool {
    match (a.data(), b.data()) {
        (TensorData::Float64(x), TensorData::Float64(y)) if a.shape() == b.shape() => x.iter().zip(y).all(|(p, q)| {
            p.to_bits() == q.to_bits() || (p - q).abs() <= rel * p.abs().max(q.abs())
        }),
        _ => a.bit_eq(b),
    }
}

fn describe(r: &tensql::Result<Tensor>) -> String {
    match r {
        Ok(t) if t.rows() * t.width() <= 16 => format!("{t:?}"),
        Ok(t) => format!("tensor {:?} {}", t.shape(), t.dtype()),
        Err(e) => format!("error `{e}`"),
    }
}

/// Checks `case` on both backends: reference against the oracle, parallel
/// against reference.
fn check(case: &Case) -> Result<(), String> {
    let reference = (case.run)(&*BackendKind::Reference.create());
    let parallel = (case.run)(&*BackendKind::Parallel.create());
    let oracle_ok = match (&case.expect, &reference) {
        (Ok(e), Ok(r)) => e.shape() == r.shape() && if case.tolerant { close(e, r, 1e-9) } else { e.bit_eq(r) },
        (Err(e), Err(r)) => e.to_string() == r.to_string(),
        _ => false,
    };
    if !oracle_ok {
        let expect = match &case.expect {
            Ok(t) => describe(&Ok(t.clone())),
            Err(e) => format!("error `{e}`"),
        };
        return Err(format!("{}: reference {} but oracle expects {expect}", case.label, describe(&reference)));
    }
    let agree = match (&reference, &parallel) {
        (Ok(r), Ok(p)) => r.shape() == p.shape() && if case.tolerant { close(r, p, 1e-9) } else { r.bit_eq(p) },
        (Err(r), Err(p)) => r.to_string() == p.to_string(),
        _ => false,
    };
    if !agree {
        return Err(format!(
            "{}: parallel {} but reference {}",
            case.label,
            describe(&parallel),
            describe(&reference)
        ));
    }
    Ok(())
}

/// Runs `trials` random cases of `kernel`. Returns the number of cases that
/// ended in an error on both sides.
pub fn kernel_trials(kernel: &str, trials: usize, seed: u64) -> Result<usize, String> {
    let make: fn(&mut ChaCha8Rng) -> Case = match kernel {
        "compare" => case_compare,
        "arith" => case_arith,
        "logical" => case_logical,
        "select_where" => case_select_where,
        "prefix_sum_exclusive" => case_prefix_sum,
        "compact" => case_compact,
        "argsort_stable" => case_argsort,
        "gather" => case_gather,
        "searchsorted" => case_searchsorted,
        "expand_segments" => case_expand_segments,
        "segment_starts" => case_segment_starts,
        "segmented_reduce" => case_segmented_reduce,
        "matmul" => case_matmul,
        "substring_match" => case_substring_match,
        other => return Err(format!("unknown kernel `{other}`")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = 0;
    for t in 0..trials {
        let case = make(&mut rng);
        check(&case).map_err(|e| format!("{kernel} trial {t}: {e}"))?;
        errors += case.expect.is_err() as usize;
    }
    Ok(errors)
}
