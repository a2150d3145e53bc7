//! Random inputs and independent oracles shared by the test suites.

pub mod encoding;
pub mod kernels;
pub mod predict;
pub mod relational;

use tensql::store::decode_table;
use tensql::{EncodedTable, Value};

/// True if `a` and `b` agree, with Float64 values within relative `rel`.
pub fn values_close(a: &Value, b: &Value, rel: f64) -> bool {
    match (a, b) {
        (Value::Float64(x), Value::Float64(y)) => {
            x.to_bits() == y.to_bits()
                || (x.is_nan() && y.is_nan())
                || x == y
                || (x - y).abs() <= rel * x.abs().max(y.abs())
        }
        _ => a == b,
    }
}

/// Same schema, same rows in the same order, floats within `rel`.
pub fn tables_match(a: &EncodedTable, b: &EncodedTable, rel: f64) -> Result<(), String> {
    if a.schema() != b.schema() {
        return Err(format!("schemas differ: {:?} vs {:?}", a.schema(), b.schema()));
    }
    if a.row_count() != b.row_count() {
        return Err(format!("{} rows vs {} rows", a.row_count(), b.row_count()));
    }
    for (i, (x, y)) in decode_table(a).iter().zip(decode_table(b)).enumerate() {
        if let Some(c) = (0..x.len()).find(|&c| !values_close(&x[c], &y[c], rel)) {
            return Err(format!(
                "row {i}, column `{}`: {:?} vs {:?}",
                a.schema().columns[c].name,
                x[c],
                y[c]
            ));
        }
    }
    Ok(())
}
