//! Columnar tensor encoding of relations.
//!
//! Every column becomes one tensor: numeric and boolean columns are `n x 1`,
//! dates are `n x 1` Int64 epoch nanoseconds, and strings are `n x m` Int32
//! matrices holding UTF-8 bytes right-padded with zeros, where `m` is the
//! longest byte length in the column.

pub mod csv;
pub mod date;
mod value;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use value::{LogicalType, Value};

use crate::error::{Error, Result};
use crate::tensor::{Tensor, TensorData};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: LogicalType,
}

impl Field {
    pub fn new(name: impl Into<String>, ty: LogicalType) -> Self {
        Field {
            name: name.into(),
            ty,
        }
    }
}

/// Ordered `(name, type)` pairs. Serializes as the CSV schema sidecar
/// `{"columns":[{"name":..,"type":..}]}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Field>,
}

impl Schema {
    pub fn new(columns: Vec<Field>) -> Self {
        Schema { columns }
    }

    pub fn of(pairs: &[(&str, LogicalType)]) -> Self {
        Schema::new(pairs.iter().map(|(n, t)| Field::new(*n, *t)).collect())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|f| f.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.columns.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|f| f.name.as_str())
    }

    /// First name that repeats (case-insensitively), if any.
    pub fn duplicate_name(&self) -> Option<&str> {
        let mut seen = HashSet::new();
        self.columns
            .iter()
            .find(|f| !seen.insert(f.name.to_ascii_lowercase()))
            .map(|f| f.name.as_str())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        if let Some(d) = schema.duplicate_name() {
            return Err(Error::Schema(format!("duplicate column `{d}`")));
        }
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedColumn {
    pub name: String,
    pub logical: LogicalType,
    pub tensor: Tensor,
}

impl EncodedColumn {
    pub fn new(name: impl Into<String>, logical: LogicalType, tensor: Tensor) -> Result<Self> {
        let name = name.into();
        if tensor.dtype() != logical.physical() {
            return Err(Error::Schema(format!(
                "column `{name}`: {} tensor for {logical} column",
                tensor.dtype()
            )));
        }
        if logical != LogicalType::Utf8 && !tensor.is_vector() {
            return Err(Error::Schema(format!("column `{name}`: {logical} must be a vector")));
        }
        Ok(EncodedColumn {
            name,
            logical,
            tensor,
        })
    }

    /// Byte width `m` of a string column; 1 for other types.
    pub fn width_m(&self) -> usize {
        self.tensor.width()
    }

    pub fn rows(&self) -> usize {
        self.tensor.rows()
    }

    pub fn value(&self, row: usize) -> Value {
        let t = &self.tensor;
        match (self.logical, t.data()) {
            (LogicalType::Int64, TensorData::Int64(v)) => Value::Int64(v[row]),
            (LogicalType::Date, TensorData::Int64(v)) => Value::Date(v[row]),
            (LogicalType::Float64, TensorData::Float64(v)) => Value::Float64(v[row]),
            (LogicalType::Bool, TensorData::Bool(v)) => Value::Bool(v[row]),
            (LogicalType::Utf8, TensorData::Int32(v)) => {
                let m = t.width();
                Value::Utf8(decode_padded(&v[row * m..(row + 1) * m]))
            }
            _ => unreachable!("dtype checked at construction"),
        }
    }
}

fn decode_padded(row: &[i32]) -> String {
    let len = row.iter().rposition(|&b| b != 0).map_or(0, |p| p + 1);
    let bytes: Vec<u8> = row[..len].iter().map(|&b| b as u8).collect();
    String::from_utf8(bytes).expect("encoded strings are valid UTF-8")
}

/// Encodes strings as a zero-padded byte matrix.
pub fn encode_string_column(name: &str, values: &[&str]) -> Result<EncodedColumn> {
    let rows: Vec<&[u8]> = values.iter().map(|s| s.as_bytes()).collect();
    encode_string_bytes(name, &rows)
}

/// Like [`encode_string_column`] but validates raw bytes as UTF-8.
pub fn encode_string_bytes(name: &str, values: &[&[u8]]) -> Result<EncodedColumn> {
    for (row, v) in values.iter().enumerate() {
        if std::str::from_utf8(v).is_err() {
            return Err(Error::InvalidUtf8 { row });
        }
        if v.contains(&0) {
            return Err(Error::Parse {
                row,
                column: name.to_string(),
                msg: "NUL bytes are not representable in padded strings".into(),
            });
        }
    }
    let m = values.iter().map(|v| v.len()).max().unwrap_or(0).max(1);
    let mut data = Vec::with_capacity(values.len() * m);
    for v in values {
        data.extend(v.iter().map(|&b| b as i32));
        data.resize(data.len() + (m - v.len()), 0);
    }
    let tensor = Tensor::new(data, values.len(), m)?;
    EncodedColumn::new(name, LogicalType::Utf8, tensor)
}

pub fn encode_date_column(name: &str, values: &[&str]) -> Result<EncodedColumn> {
    let data = values.iter().map(|s| date::parse(s)).collect::<Result<Vec<_>>>()?;
    EncodedColumn::new(name, LogicalType::Date, Tensor::from_i64(data))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedTable {
    columns: Vec<EncodedColumn>,
    row_count: usize,
}

impl EncodedTable {
    pub fn new(columns: Vec<EncodedColumn>, row_count: usize) -> Result<Self> {
        let table = EncodedTable { columns, row_count };
        if let Some(c) = table.columns.iter().find(|c| c.rows() != row_count) {
            return Err(Error::Schema(format!(
                "column `{}` has {} rows, table has {row_count}",
                c.name,
                c.rows()
            )));
        }
        if let Some(d) = table.schema().duplicate_name() {
            return Err(Error::Schema(format!("duplicate column `{d}`")));
        }
        Ok(table)
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column(&self, name: &str) -> Option<&EncodedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn schema(&self) -> Schema {
        Schema::new(
            self.columns
                .iter()
                .map(|c| Field::new(c.name.clone(), c.logical))
                .collect(),
        )
    }

    pub fn row(&self, i: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.value(i)).collect()
    }

    /// Renders the table as `,`-delimited CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.row_count {
            let cells: Vec<String> = self.row(i).iter().map(Value::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Encodes typed rows into tensors.
pub fn encode_table(schema: &Schema, rows: &[Vec<Value>]) -> Result<EncodedTable> {
    if let Some(d) = schema.duplicate_name() {
        return Err(Error::Schema(format!("duplicate column `{d}`")));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != schema.len() {
            return Err(Error::Parse {
                row: r,
                column: String::new(),
                msg: format!("expected {} values, found {}", schema.len(), row.len()),
            });
        }
    }
    let mut columns = Vec::with_capacity(schema.len());
    for (c, field) in schema.columns.iter().enumerate() {
        let bad = |r: usize, v: &Value| Error::Parse {
            row: r,
            column: field.name.clone(),
            msg: format!("expected {}, found {}", field.ty, v.logical_type()),
        };
        let tensor = match field.ty {
            LogicalType::Int64 | LogicalType::Date => {
                let mut out = Vec::with_capacity(rows.len());
                for (r, row) in rows.iter().enumerate() {
                    match (&row[c], field.ty) {
                        (Value::Int64(v), LogicalType::Int64) | (Value::Date(v), LogicalType::Date) => {
                            out.push(*v)
                        }
                        (v, _) => return Err(bad(r, v)),
                    }
                }
                Tensor::from_i64(out)
            }
            LogicalType::Float64 => {
                let mut out = Vec::with_capacity(rows.len());
                for (r, row) in rows.iter().enumerate() {
                    match &row[c] {
                        Value::Float64(v) => out.push(*v),
                        v => return Err(bad(r, v)),
                    }
                }
                Tensor::from_f64(out)
            }
            LogicalType::Bool => {
                let mut out = Vec::with_capacity(rows.len());
                for (r, row) in rows.iter().enumerate() {
                    match &row[c] {
                        Value::Bool(v) => out.push(*v),
                        v => return Err(bad(r, v)),
                    }
                }
                Tensor::from_bool(out)
            }
            LogicalType::Utf8 => {
                let mut strs = Vec::with_capacity(rows.len());
                for (r, row) in rows.iter().enumerate() {
                    match &row[c] {
                        Value::Utf8(s) => strs.push(s.as_bytes()),
                        v => return Err(bad(r, v)),
                    }
                }
                encode_string_bytes(&field.name, &strs)?.tensor
            }
        };
        columns.push(EncodedColumn::new(field.name.clone(), field.ty, tensor)?);
    }
    EncodedTable::new(columns, rows.len())
}

pub fn decode_table(table: &EncodedTable) -> Vec<Vec<Value>> {
    (0..table.row_count()).map(|i| table.row(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_encoding_examples() {
        let c = encode_string_column("s", &["abc", "hello"]).unwrap();
        assert_eq!(c.width_m(), 5);
        assert_eq!(&c.tensor.as_i32().unwrap()[..5], &[97, 98, 99, 0, 0]);

        let c = encode_string_column("s", &[""]).unwrap();
        assert_eq!(c.width_m(), 1);
        assert_eq!(c.tensor.as_i32().unwrap(), &[0]);

        let c = encode_string_column("s", &["é"]).unwrap();
        assert_eq!(c.width_m(), 2);
        assert_eq!(c.tensor.as_i32().unwrap(), &[195, 169]);
    }

    #[test]
    fn invalid_utf8_is_rejected() {
        let bad: &[u8] = &[0xff, 0xfe];
        assert!(matches!(
            encode_string_bytes("s", &[b"ok", bad]),
            Err(Error::InvalidUtf8 { row: 1 })
        ));
    }

    #[test]
    fn date_column_examples() {
        let c = encode_date_column("d", &["1970-01-01", "1970-01-02", "1994-01-01"]).unwrap();
        assert_eq!(
            c.tensor.as_i64().unwrap(),
            &[0, 86_400_000_000_000, 757_382_400_000_000_000]
        );
        assert!(encode_date_column("d", &["1994-13-01"]).is_err());
    }

    #[test]
    fn empty_table_keeps_columns() {
        let schema = Schema::of(&[("a", LogicalType::Int64), ("s", LogicalType::Utf8)]);
        let t = encode_table(&schema, &[]).unwrap();
        assert_eq!(t.row_count(), 0);
        assert_eq!(t.schema(), schema);
        assert!(decode_table(&t).is_empty());
    }

    #[test]
    fn single_row_round_trip() {
        let schema = Schema::of(&[("a", LogicalType::Int64)]);
        let rows = vec![vec![Value::Int64(42)]];
        let t = encode_table(&schema, &rows).unwrap();
        assert_eq!(decode_table(&t), rows);
    }

    #[test]
    fn encode_errors_carry_coordinates() {
        let schema = Schema::of(&[("a", LogicalType::Int64), ("b", LogicalType::Float64)]);
        let rows = vec![
            vec![Value::Int64(1), Value::Float64(1.0)],
            vec![Value::Int64(2), Value::Int64(2)],
        ];
        match encode_table(&schema, &rows) {
            Err(Error::Parse { row: 1, column, .. }) => assert_eq!(column, "b"),
            other => panic!("{other:?}"),
        }
        let short = vec![vec![Value::Int64(1)]];
        assert!(matches!(encode_table(&schema, &short), Err(Error::Parse { row: 0, .. })));
    }

    #[test]
    fn duplicate_names_rejected_case_insensitively() {
        let schema = Schema::of(&[("a", LogicalType::Int64), ("A", LogicalType::Int64)]);
        assert!(encode_table(&schema, &[]).is_err());
    }

    #[test]
    fn csv_rendering_uses_six_decimals() {
        let schema = Schema::of(&[
            ("x", LogicalType::Float64),
            ("d", LogicalType::Date),
            ("s", LogicalType::Utf8),
        ]);
        let rows = vec![vec![
            Value::Float64(1.5),
            Value::Date(date::parse("1995-09-01").unwrap()),
            Value::Utf8("hi".into()),
        ]];
        let t = encode_table(&schema, &rows).unwrap();
        assert_eq!(t.to_csv(), "x,d,s\n1.500000,1995-09-01,hi\n");
    }
}
