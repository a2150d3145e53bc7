//! CSV ingestion straight into column buffers.
//!
//! Files are UTF-8, one header line, `\n` line endings and no quoting or
//! escaping. Numeric fields are parsed from the record bytes directly into
//! the tensor buffers.

use std::io::Read;
use std::path::Path;

use super::{date, encode_string_bytes, EncodedColumn, EncodedTable, LogicalType, Schema};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_DELIMITER: u8 = b'|';

enum Builder {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
    Date(Vec<i64>),
    Bool(Vec<bool>),
    /// Concatenated bytes plus end offsets; padded once the width is known.
    Utf8(Vec<u8>, Vec<usize>),
}

impl Builder {
    fn new(ty: LogicalType) -> Self {
        match ty {
            LogicalType::Int64 => Builder::Int64(Vec::new()),
            LogicalType::Float64 => Builder::Float64(Vec::new()),
            LogicalType::Date => Builder::Date(Vec::new()),
            LogicalType::Bool => Builder::Bool(Vec::new()),
            LogicalType::Utf8 => Builder::Utf8(Vec::new(), Vec::new()),
        }
    }

    fn push(&mut self, field: &[u8]) -> std::result::Result<(), String> {
        let text = || std::str::from_utf8(field).map_err(|_| "invalid UTF-8".to_string());
        match self {
            Builder::Int64(v) => v.push(text()?.parse().map_err(|e| format!("{e}"))?),
            Builder::Float64(v) => v.push(text()?.parse().map_err(|e| format!("{e}"))?),
            Builder::Date(v) => v.push(date::parse(text()?).map_err(|e| e.to_string())?),
            Builder::Bool(v) => v.push(match text()? {
                "true" | "TRUE" | "1" => true,
                "false" | "FALSE" | "0" => false,
                other => return Err(format!("invalid bool `{other}`")),
            }),
            Builder::Utf8(bytes, ends) => {
                text()?;
                bytes.extend_from_slice(field);
                ends.push(bytes.len());
            }
        }
        Ok(())
    }

    fn finish(self, name: &str, ty: LogicalType) -> Result<EncodedColumn> {
        let tensor = match self {
            Builder::Int64(v) | Builder::Date(v) => Tensor::from_i64(v),
            Builder::Float64(v) => Tensor::from_f64(v),
            Builder::Bool(v) => Tensor::from_bool(v),
            Builder::Utf8(bytes, ends) => {
                let mut start = 0;
                let rows: Vec<&[u8]> = ends
                    .iter()
                    .map(|&e| {
                        let s = &bytes[start..e];
                        start = e;
                        s
                    })
                    .collect();
                return encode_string_bytes(name, &rows);
            }
        };
        EncodedColumn::new(name, ty, tensor)
    }
}

/// Loads a delimited file whose header names every schema column. Extra
/// header columns are skipped. Empty fields are rejected: NULLs are not
/// supported.
pub fn load_csv(path: &Path, schema: &Schema, delimiter: u8) -> Result<EncodedTable> {
    let file = std::fs::File::open(path)?;
    read_csv(file, path, schema, delimiter)
}

pub fn read_csv<R: Read>(reader: R, path: &Path, schema: &Schema, delimiter: u8) -> Result<EncodedTable> {
    let csv_err = |line: u64, msg: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = ::csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .quoting(false)
        .has_headers(true)
        .from_reader(reader);
    let header = rdr
        .byte_headers()
        .map_err(|e| csv_err(1, e.to_string()))?
        .clone();
    let mut positions = Vec::with_capacity(schema.len());
    for f in &schema.columns {
        let pos = header
            .iter()
            .position(|h| h == f.name.as_bytes())
            .ok_or_else(|| Error::Schema(format!("{}: missing column `{}`", path.display(), f.name)))?;
        positions.push(pos);
    }
    let mut builders: Vec<Builder> = schema.columns.iter().map(|f| Builder::new(f.ty)).collect();
    let mut record = ::csv::ByteRecord::new();
    let mut rows = 0usize;
    loop {
        match rdr.read_byte_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(csv_err(line, e.to_string()));
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        for ((b, &pos), f) in builders.iter_mut().zip(&positions).zip(&schema.columns) {
            let field = record.get(pos).unwrap_or_default();
            if field.is_empty() {
                return Err(csv_err(line, format!("empty value for `{}` (NULLs are not supported)", f.name)));
            }
            b.push(field)
                .map_err(|msg| csv_err(line, format!("column `{}`: {msg}", f.name)))?;
        }
        rows += 1;
    }
    let columns = builders
        .into_iter()
        .zip(&schema.columns)
        .map(|(b, f)| b.finish(&f.name, f.ty))
        .collect::<Result<Vec<_>>>()?;
    EncodedTable::new(columns, rows)
}

/// Loads `<dir>/<table>.csv` using the sidecar `<dir>/<table>.schema.json`.
pub fn load_table_dir(dir: &Path, table: &str, delimiter: u8) -> Result<EncodedTable> {
    let schema_text = std::fs::read_to_string(dir.join(format!("{table}.schema.json")))?;
    let schema = Schema::from_json(&schema_text)?;
    load_csv(&dir.join(format!("{table}.csv")), &schema, delimiter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Value;

    fn lineitem_schema() -> Schema {
        Schema::of(&[
            ("l_quantity", LogicalType::Int64),
            ("l_extendedprice", LogicalType::Float64),
            ("l_shipdate", LogicalType::Date),
            ("l_comment", LogicalType::Utf8),
        ])
    }

    fn read(text: &str, schema: &Schema) -> Result<EncodedTable> {
        read_csv(text.as_bytes(), Path::new("mem.csv"), schema, b'|')
    }

    #[test]
    fn parses_two_line_sample() {
        let text = "l_quantity|l_extendedprice|l_shipdate|l_comment\n\
                    17|21168.23|1996-03-13|quick fox\n\
                    36|45983.16|1996-04-12|é\n";
        let t = read(text, &lineitem_schema()).unwrap();
        assert_eq!(t.row_count(), 2);
        assert_eq!(t.row(1)[0], Value::Int64(36));
        assert_eq!(t.row(0)[1], Value::Float64(21168.23));
        assert_eq!(t.row(0)[2].to_string(), "1996-03-13");
        assert_eq!(t.column("l_comment").unwrap().width_m(), 9);
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let text = "l_quantity|l_extendedprice|l_shipdate\n1|2.0|1996-01-01\n";
        assert!(matches!(read(text, &lineitem_schema()), Err(Error::Schema(_))));
    }

    #[test]
    fn header_only_gives_empty_table() {
        let text = "l_quantity|l_extendedprice|l_shipdate|l_comment\n";
        let t = read(text, &lineitem_schema()).unwrap();
        assert_eq!(t.row_count(), 0);
        assert_eq!(t.columns().len(), 4);
    }

    #[test]
    fn empty_field_and_bad_number_report_line() {
        let text = "l_quantity|l_extendedprice|l_shipdate|l_comment\n1|2.0|1996-01-01|x\n|2.0|1996-01-01|x\n";
        match read(text, &lineitem_schema()) {
            Err(Error::Csv { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = "l_quantity|l_extendedprice|l_shipdate|l_comment\nabc|2.0|1996-01-01|x\n";
        assert!(matches!(read(text, &lineitem_schema()), Err(Error::Csv { line: 2, .. })));
    }

    #[test]
    fn comma_delimiter_and_extra_columns() {
        let schema = Schema::of(&[("b", LogicalType::Float64)]);
        let t = read_csv("a,b\n1,2.5\n".as_bytes(), Path::new("x"), &schema, b',').unwrap();
        assert_eq!(t.row(0), vec![Value::Float64(2.5)]);
    }
}
