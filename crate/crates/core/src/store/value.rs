use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::date;
use crate::tensor::DType;

/// Logical column types and their fixed physical mapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogicalType {
    Int64,
    Float64,
    /// Epoch nanoseconds at UTC midnight, stored as Int64.
    Date,
    /// Zero-padded UTF-8 bytes, stored as an `n x m` Int32 tensor.
    #[serde(alias = "string")]
    Utf8,
    Bool,
}

impl LogicalType {
    pub fn physical(self) -> DType {
        match self {
            LogicalType::Int64 | LogicalType::Date => DType::Int64,
            LogicalType::Float64 => DType::Float64,
            LogicalType::Utf8 => DType::Int32,
            LogicalType::Bool => DType::Bool,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, LogicalType::Int64 | LogicalType::Float64)
    }

    pub fn name(self) -> &'static str {
        match self {
            LogicalType::Int64 => "int64",
            LogicalType::Float64 => "float64",
            LogicalType::Date => "date",
            LogicalType::Utf8 => "utf8",
            LogicalType::Bool => "bool",
        }
    }
}

impl fmt::Display for LogicalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single typed cell. Serializes as `{"type": .., "value": ..}` with
/// dates written as ISO strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ValueRepr", try_from = "ValueRepr")]
pub enum Value {
    Int64(i64),
    Float64(f64),
    Date(i64),
    Utf8(String),
    Bool(bool),
}

impl Value {
    pub fn logical_type(&self) -> LogicalType {
        match self {
            Value::Int64(_) => LogicalType::Int64,
            Value::Float64(_) => LogicalType::Float64,
            Value::Date(_) => LogicalType::Date,
            Value::Utf8(_) => LogicalType::Utf8,
            Value::Bool(_) => LogicalType::Bool,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int64(v) => Some(*v as f64),
            Value::Float64(v) => Some(*v),
            _ => None,
        }
    }

    /// Total order used for canonical row sorting. Values of different
    /// types order by type tag; floats by `total_cmp`.
    pub fn canonical_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int64(a), Value::Int64(b)) | (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::Float64(a), Value::Float64(b)) => a.total_cmp(b),
            (Value::Utf8(a), Value::Utf8(b)) => a.as_bytes().cmp(b.as_bytes()),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (a, b) => a.logical_type().cmp(&b.logical_type()),
        }
    }

    /// Rendering used in result CSV: floats with six decimals.
    pub fn render(&self) -> String {
        match self {
            Value::Float64(v) => format!("{v:.6}"),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int64(v) => write!(f, "{v}"),
            Value::Float64(v) => write!(f, "{v}"),
            Value::Date(ns) => f.write_str(&date::render(*ns)),
            Value::Utf8(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
enum ValueRepr {
    Int64(i64),
    Float64(f64),
    Date(String),
    #[serde(alias = "string")]
    Utf8(String),
    Bool(bool),
}

impl From<Value> for ValueRepr {
    fn from(v: Value) -> Self {
        match v {
            Value::Int64(x) => ValueRepr::Int64(x),
            Value::Float64(x) => ValueRepr::Float64(x),
            Value::Date(ns) => ValueRepr::Date(date::render(ns)),
            Value::Utf8(s) => ValueRepr::Utf8(s),
            Value::Bool(b) => ValueRepr::Bool(b),
        }
    }
}

impl TryFrom<ValueRepr> for Value {
    type Error = String;

    fn try_from(r: ValueRepr) -> Result<Self, String> {
        Ok(match r {
            ValueRepr::Int64(x) => Value::Int64(x),
            ValueRepr::Float64(x) => Value::Float64(x),
            ValueRepr::Date(s) => Value::Date(date::parse(&s).map_err(|e| e.to_string())?),
            ValueRepr::Utf8(s) => Value::Utf8(s),
            ValueRepr::Bool(b) => Value::Bool(b),
        })
    }
}
