//! SQL text to physical plans.

pub mod ast;
mod parser;
mod planner;
mod token;

pub use ast::Query;
pub use parser::{is_reserved, parse};
pub use planner::plan_query;
pub use token::{tokenize, Token, TokenKind};

use crate::error::Result;
use crate::ir::{Catalog, PlanNode};

/// Parses and plans `sql` against `catalog`.
pub fn compile_sql(sql: &str, catalog: &Catalog) -> Result<PlanNode> {
    plan_query(&parse(sql)?, catalog)
}

#[cfg(test)]
mod tests;
