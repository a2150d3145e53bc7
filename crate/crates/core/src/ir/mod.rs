//! Physical plan IR: relational operators over scalar expressions, with
//! schema inference, validation and a JSON interchange format.

mod catalog;
mod expr;
mod plan;
mod typing;

pub use catalog::Catalog;
pub use expr::{CaseBranch, Expr, LikePattern};
pub use plan::{AggExpr, AggFunc, JoinKind, NamedExpr, PlanNode, SortKey};
pub use typing::{agg_type, arith_type, comparable, expr_type, infer_schema, join_schema, unify, validate, Diagnostic};
