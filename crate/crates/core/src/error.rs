use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dtype mismatch in {kernel}: expected {expected}, found {found}")]
    DTypeMismatch {
        kernel: &'static str,
        expected: String,
        found: String,
    },

    #[error("shape mismatch in {kernel}: {detail}")]
    ShapeMismatch { kernel: &'static str, detail: String },

    #[error("division by zero at row {row}")]
    DivisionByZero { row: usize },

    #[error("integer overflow in {kernel} at row {row}")]
    Overflow { kernel: &'static str, row: usize },

    #[error("index {index} out of bounds for length {len} at position {position}")]
    IndexOutOfBounds {
        position: usize,
        index: i64,
        len: usize,
    },

    #[error("NaN in {kernel} keys at position {position}")]
    NanKey { kernel: &'static str, position: usize },

    #[error("negative count {count} at position {position}")]
    NegativeCount { position: usize, count: i64 },

    #[error("segment ids must be non-decreasing and within [0, {num_segments}): violation at row {row}")]
    BadSegmentIds { row: usize, num_segments: usize },

    #[error("{op} over empty segment {segment}")]
    EmptySegment { op: &'static str, segment: usize },

    #[error("invalid value at row {row}, column `{column}`: {msg}")]
    Parse {
        row: usize,
        column: String,
        msg: String,
    },

    #[error("{path}:{line}: {msg}")]
    Csv {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("invalid date `{0}`")]
    InvalidDate(String),

    #[error("invalid UTF-8 string at row {row}")]
    InvalidUtf8 { row: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("plan error: {0}")]
    Plan(String),

    #[error("syntax error at offset {offset}: expected {}, found {found}", .expected.join(" | "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("model error at {path}: {msg}")]
    Model { path: String, msg: String },

    #[error("optimizer rule `{rule}` changed the plan schema")]
    RuleChangedSchema { rule: &'static str },

    #[error("operator {operator} ({name}): {source}")]
    Execution {
        operator: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips any [`Error::Execution`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Execution { source, .. } => source.root(),
            other => other,
        }
    }
}
