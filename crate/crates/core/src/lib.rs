pub mod datagen;
pub mod error;
pub mod exec;
pub mod ir;
pub mod kernels;
pub mod ml;
pub mod optimizer;
pub mod pipeline;
pub mod store;
pub mod sql;
pub mod tensor;

pub use error::{Error, Result};
pub use store::{EncodedColumn, EncodedTable, Field, LogicalType, Schema, Value};
pub use tensor::{DType, Tensor, TensorData};
