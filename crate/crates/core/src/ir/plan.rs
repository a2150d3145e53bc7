use serde::{Deserialize, Serialize};

use super::Expr;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinKind {
    #[default]
    Inner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFunc {
    Sum,
    Count,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub const ALL: [AggFunc; 5] = [AggFunc::Sum, AggFunc::Count, AggFunc::Avg, AggFunc::Min, AggFunc::Max];

    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Sum => "SUM",
            AggFunc::Count => "COUNT",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedExpr {
    pub name: String,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggExpr {
    pub name: String,
    pub func: AggFunc,
    pub arg: Expr,
}

impl AggExpr {
    /// `sum_x` for `SUM(x)`; `count` for a non-column argument to COUNT, `agg<i>` otherwise.
    pub fn default_name(func: AggFunc, arg: &Expr, position: usize) -> String {
        let f = func.name().to_ascii_lowercase();
        match arg {
            Expr::ColRef { name } => format!("{f}_{name}"),
            _ if func == AggFunc::Count => "count".to_string(),
            _ => format!("{f}_{position}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortKey {
    pub column: String,
    pub asc: bool,
}

/// Physical relational operators. Each node has exactly one consumer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum PlanNode {
    Scan {
        table: String,
    },
    Filter {
        input: Box<PlanNode>,
        predicate: Expr,
    },
    Project {
        input: Box<PlanNode>,
        exprs: Vec<NamedExpr>,
    },
    #[serde(rename = "join")]
    EquiJoin {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
        left_key: String,
        right_key: String,
        #[serde(default)]
        kind: JoinKind,
    },
    /// Empty `keys` is a scalar aggregation producing exactly one row.
    #[serde(rename = "aggregate")]
    GroupAggregate {
        input: Box<PlanNode>,
        keys: Vec<String>,
        aggs: Vec<AggExpr>,
    },
    Sort {
        input: Box<PlanNode>,
        keys: Vec<SortKey>,
    },
    Limit {
        input: Box<PlanNode>,
        k: u64,
    },
}

impl PlanNode {
    pub fn scan(table: impl Into<String>) -> PlanNode {
        PlanNode::Scan { table: table.into() }
    }

    pub fn filter(self, predicate: Expr) -> PlanNode {
        PlanNode::Filter {
            input: Box::new(self),
            predicate,
        }
    }

    pub fn project(self, exprs: Vec<(&str, Expr)>) -> PlanNode {
        PlanNode::Project {
            input: Box::new(self),
            exprs: exprs
                .into_iter()
                .map(|(n, e)| NamedExpr {
                    name: n.to_string(),
                    expr: e,
                })
                .collect(),
        }
    }

    pub fn join(self, right: PlanNode, left_key: &str, right_key: &str) -> PlanNode {
        PlanNode::EquiJoin {
            left: Box::new(self),
            right: Box::new(right),
            left_key: left_key.to_string(),
            right_key: right_key.to_string(),
            kind: JoinKind::Inner,
        }
    }

    pub fn aggregate(self, keys: &[&str], aggs: Vec<(&str, AggFunc, Expr)>) -> PlanNode {
        PlanNode::GroupAggregate {
            input: Box::new(self),
            keys: keys.iter().map(|k| k.to_string()).collect(),
            aggs: aggs
                .into_iter()
                .map(|(n, func, arg)| AggExpr {
                    name: n.to_string(),
                    func,
                    arg,
                })
                .collect(),
        }
    }

    pub fn sort(self, keys: &[(&str, bool)]) -> PlanNode {
        PlanNode::Sort {
            input: Box::new(self),
            keys: keys
                .iter()
                .map(|(c, asc)| SortKey {
                    column: c.to_string(),
                    asc: *asc,
                })
                .collect(),
        }
    }

    pub fn limit(self, k: u64) -> PlanNode {
        PlanNode::Limit {
            input: Box::new(self),
            k,
        }
    }

    /// The JSON `op` tag of this node.
    pub fn op_name(&self) -> &'static str {
        match self {
            PlanNode::Scan { .. } => "scan",
            PlanNode::Filter { .. } => "filter",
            PlanNode::Project { .. } => "project",
            PlanNode::EquiJoin { .. } => "join",
            PlanNode::GroupAggregate { .. } => "aggregate",
            PlanNode::Sort { .. } => "sort",
            PlanNode::Limit { .. } => "limit",
        }
    }

    pub fn inputs(&self) -> Vec<&PlanNode> {
        match self {
            PlanNode::Scan { .. } => vec![],
            PlanNode::Filter { input, .. }
            | PlanNode::Project { input, .. }
            | PlanNode::GroupAggregate { input, .. }
            | PlanNode::Sort { input, .. }
            | PlanNode::Limit { input, .. } => vec![input],
            PlanNode::EquiJoin { left, right, .. } => vec![left, right],
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.inputs().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.inputs().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans serialize")
    }

    pub fn from_json(text: &str) -> Result<PlanNode> {
        serde_json::from_str(text).map_err(|e| Error::Plan(format!("invalid plan JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ArithOp, CmpOp};
    use crate::store::Value;

    #[test]
    fn scan_from_json() {
        let p = PlanNode::from_json(r#"{"op":"scan","table":"part"}"#).unwrap();
        assert_eq!(p, PlanNode::scan("part"));
    }

    #[test]
    fn unknown_op_names_the_tag() {
        let err = PlanNode::from_json(r#"{"op":"cube","input":{"op":"scan","table":"t"}}"#).unwrap_err();
        assert!(err.to_string().contains("cube"), "{err}");
        let err = PlanNode::from_json(r#"{"op":"filter","input":{"op":"scan","table":"t"},"predicate":{"expr":"regex"}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("regex"), "{err}");
    }

    #[test]
    fn missing_field_is_an_error() {
        assert!(PlanNode::from_json(r#"{"op":"limit","input":{"op":"scan","table":"t"}}"#).is_err());
        assert!(PlanNode::from_json(r#"{"op":"scan""#).is_err());
    }

    #[test]
    fn round_trip_nested() {
        let p = PlanNode::scan("lineitem")
            .join(PlanNode::scan("part"), "l_partkey", "p_partkey")
            .filter(Expr::cmp(CmpOp::Lt, Expr::col("l_quantity"), Expr::lit(Value::Int64(24))))
            .aggregate(
                &[],
                vec![(
                    "revenue",
                    AggFunc::Sum,
                    Expr::arith(ArithOp::Mul, Expr::col("a"), Expr::lit(Value::Float64(0.5))),
                )],
            )
            .sort(&[("revenue", false)])
            .limit(3);
        assert_eq!(PlanNode::from_json(&p.to_json()).unwrap(), p);
        assert_eq!(p.size(), 7);
        assert_eq!(p.depth(), 6);
    }
}
