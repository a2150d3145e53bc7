//! Civil-calendar and byte-string oracles for the columnar encoding.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tensql::kernels::{BackendKind, CmpOp, Operand};
use tensql::store::{date, decode_table, encode_string_column, encode_table};
use tensql::{Field, LogicalType, Schema, Tensor, Value};

pub const NS_PER_DAY: i64 = 86_400_000_000_000;

/// Days since 1970-01-01 of a proleptic Gregorian date (H. Hinnant's
/// `days_from_civil`).
pub fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

pub fn days_in_month(y: i64, m: i64) -> i64 {
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    match m {
        2 if leap => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

/// `n` random dates in 1678..=2261 (the range of i64 epoch nanoseconds),
/// checked against the day-count oracle, the renderer and ordering.
pub fn check_dates(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut encoded = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.gen_range(1678..=2261);
        let m = rng.gen_range(1..=12);
        let d = rng.gen_range(1..=days_in_month(y, m));
        let text = format!("{y:04}-{m:02}-{d:02}");
        let got = date::parse(&text).map_err(|e| format!("{text}: {e}"))?;
        let expect = days_from_civil(y, m, d) * NS_PER_DAY;
        if got != expect {
            return Err(format!("{text}: encoded {got}, civil oracle {expect}"));
        }
        if date::render(got) != text {
            return Err(format!("{text}: renders as {}", date::render(got)));
        }
        encoded.push(((y, m, d), got));
    }
    for pair in encoded.windows(2) {
        let ((a, ea), (b, eb)) = (pair[0], pair[1]);
        if a.cmp(&b) != ea.cmp(&eb) {
            return Err(format!("order of {a:?} and {b:?} not preserved"));
        }
    }
    for bad in ["1994-02-29", "1900-02-29", "2023-13-01", "2023-04-31", "1994-1-01"] {
        if date::parse(bad).is_ok() {
            return Err(format!("`{bad}` should not parse"));
        }
    }
    Ok(())
}

const PIECES: [&str; 10] = ["a", "b", "z", "A", " ", "é", "ß", "中", "😀", "~"];

fn random_string(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(0..7)).map(|_| PIECES[rng.gen_range(0..PIECES.len())]).collect()
}

/// Padding layout and round trip of random multi-byte strings.
pub fn check_strings(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..n {
        let rows: Vec<String> = (0..rng.gen_range(0..20)).map(|_| random_string(&mut rng)).collect();
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let col = encode_string_column("s", &refs).map_err(|e| e.to_string())?;
        let m = rows.iter().map(|s| s.len()).max().unwrap_or(0).max(1);
        if col.width_m() != m {
            return Err(format!("trial {trial}: width {} for longest {m} bytes", col.width_m()));
        }
        let bytes = col.tensor.as_i32().map_err(|e| e.to_string())?;
        for (i, s) in rows.iter().enumerate() {
            let row = &bytes[i * m..(i + 1) * m];
            let mut expect: Vec<i32> = s.bytes().map(i32::from).collect();
            expect.resize(m, 0);
            if row != expect.as_slice() {
                return Err(format!("trial {trial}: row {i} {s:?} encoded as {row:?}"));
            }
            if col.value(i) != Value::Utf8(s.clone()) {
                return Err(format!("trial {trial}: row {i} {s:?} decodes to {:?}", col.value(i)));
            }
        }
    }
    Ok(())
}

/// Row comparison of padded byte matrices of different widths must order
/// like the strings' UTF-8 bytes.
pub fn check_string_order(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<String> = (0..n).map(|_| random_string(&mut rng)).collect();
    let b: Vec<String> = (0..n).map(|_| random_string(&mut rng)).collect();
    let enc = |v: &[String]| -> Result<Tensor, String> {
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        Ok(encode_string_column("s", &refs).map_err(|e| e.to_string())?.tensor)
    };
    let (ta, tb) = (enc(&a)?, enc(&b)?);
    for backend in BackendKind::all() {
        let k = backend.create();
        for op in [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge] {
            let got = k.compare_rows(&ta, Operand::Tensor(&tb), op).map_err(|e| e.to_string())?;
            let got = got.as_bool().map_err(|e| e.to_string())?;
            for i in 0..n {
                let expect = op.holds(a[i].as_bytes().cmp(b[i].as_bytes()));
                if got[i] != expect {
                    return Err(format!("{backend}: {:?} {op:?} {:?} gave {}", a[i], b[i], got[i]));
                }
            }
        }
    }
    Ok(())
}

const TYPES: [LogicalType; 5] = [
    LogicalType::Int64,
    LogicalType::Float64,
    LogicalType::Date,
    LogicalType::Utf8,
    LogicalType::Bool,
];

fn random_value(rng: &mut ChaCha8Rng, ty: LogicalType) -> Value {
    match ty {
        LogicalType::Int64 => Value::Int64(rng.gen()),
        LogicalType::Float64 => {
            let f = f64::from_bits(rng.gen());
            Value::Float64(if f.is_nan() { -0.0 } else { f })
        }
        LogicalType::Date => Value::Date(rng.gen_range(-106_751..=106_750) * NS_PER_DAY),
        LogicalType::Utf8 => Value::Utf8(random_string(rng)),
        LogicalType::Bool => Value::Bool(rng.gen()),
    }
}

/// Random tables survive encode then decode unchanged; floats bitwise.
pub fn check_table_round_trip(tables: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..tables {
        let schema = Schema::new(
            (0..rng.gen_range(1..=6))
                .map(|i| Field::new(format!("c{i}"), TYPES[rng.gen_range(0..TYPES.len())]))
                .collect(),
        );
        let rows: Vec<Vec<Value>> = (0..rng.gen_range(0..=100))
            .map(|_| schema.columns.iter().map(|f| random_value(&mut rng, f.ty)).collect())
            .collect();
        let back = decode_table(&encode_table(&schema, &rows).map_err(|e| format!("table {t}: {e}"))?);
        let same = |x: &Value, y: &Value| match (x, y) {
            (Value::Float64(p), Value::Float64(q)) => p.to_bits() == q.to_bits(),
            _ => x == y,
        };
        if back.len() != rows.len() {
            return Err(format!("table {t}: {} rows back from {}", back.len(), rows.len()));
        }
        for (i, (a, b)) in back.iter().zip(&rows).enumerate() {
            if let Some(c) = (0..a.len()).find(|&c| !same(&a[c], &b[c])) {
                return Err(format!("table {t}, row {i}, column {c}: {:?} came back as {:?}", b[c], a[c]));
            }
        }
    }
    Ok(())
}
