use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernels::{Anchor, ArithOp, CmpOp, LogicOp};
use crate::store::Value;

/// Scalar expressions evaluated per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "expr", rename_all = "lowercase")]
pub enum Expr {
    #[serde(rename = "col")]
    ColRef { name: String },
    #[serde(rename = "lit")]
    Literal(Value),
    Arith {
        op: ArithOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    #[serde(rename = "cmp")]
    Compare {
        op: CmpOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Logical {
        op: LogicOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Not { arg: Box<Expr> },
    Between {
        arg: Box<Expr>,
        low: Box<Expr>,
        high: Box<Expr>,
    },
    Case {
        branches: Vec<CaseBranch>,
        #[serde(rename = "else")]
        else_value: Box<Expr>,
    },
    Like { arg: Box<Expr>, pattern: String },
    Predict { model: String, args: Vec<Expr> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseBranch {
    pub when: Expr,
    pub then: Expr,
}

impl Expr {
    pub fn col(name: impl Into<String>) -> Expr {
        Expr::ColRef { name: name.into() }
    }

    pub fn lit(v: Value) -> Expr {
        Expr::Literal(v)
    }

    pub fn arith(op: ArithOp, l: Expr, r: Expr) -> Expr {
        Expr::Arith {
            op,
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    pub fn cmp(op: CmpOp, l: Expr, r: Expr) -> Expr {
        Expr::Compare {
            op,
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    pub fn logical(op: LogicOp, l: Expr, r: Expr) -> Expr {
        Expr::Logical {
            op,
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::logical(LogicOp::And, l, r)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not { arg: Box::new(e) }
    }

    pub fn between(e: Expr, lo: Expr, hi: Expr) -> Expr {
        Expr::Between {
            arg: Box::new(e),
            low: Box::new(lo),
            high: Box::new(hi),
        }
    }

    pub fn case(branches: Vec<(Expr, Expr)>, else_value: Expr) -> Expr {
        Expr::Case {
            branches: branches
                .into_iter()
                .map(|(when, then)| CaseBranch { when, then })
                .collect(),
            else_value: Box::new(else_value),
        }
    }

    pub fn like(e: Expr, pattern: impl Into<String>) -> Expr {
        Expr::Like {
            arg: Box::new(e),
            pattern: pattern.into(),
        }
    }

    /// Direct children, left to right.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::ColRef { .. } | Expr::Literal(_) => vec![],
            Expr::Arith { left, right, .. }
            | Expr::Compare { left, right, .. }
            | Expr::Logical { left, right, .. } => vec![left, right],
            Expr::Not { arg } | Expr::Like { arg, .. } => vec![arg],
            Expr::Between { arg, low, high } => vec![arg, low, high],
            Expr::Case {
                branches,
                else_value,
            } => branches
                .iter()
                .flat_map(|b| [&b.when, &b.then])
                .chain(std::iter::once(&**else_value))
                .collect(),
            Expr::Predict { args, .. } => args.iter().collect(),
        }
    }

    /// Column names referenced anywhere in the expression, in first-use order.
    pub fn columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut Vec<String>) {
        if let Expr::ColRef { name } = self {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        for c in self.children() {
            c.collect_columns(out);
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Literal(_))
    }

    /// Splits a conjunction into its conjuncts.
    pub fn conjuncts(self) -> Vec<Expr> {
        match self {
            Expr::Logical {
                op: LogicOp::And,
                left,
                right,
            } => {
                let mut v = left.conjuncts();
                v.extend(right.conjuncts());
                v
            }
            e => vec![e],
        }
    }

    /// Left-deep conjunction of `parts`; `None` when empty.
    pub fn conjoin(parts: Vec<Expr>) -> Option<Expr> {
        parts.into_iter().reduce(Expr::and)
    }
}

/// A LIKE pattern after validation: at most one literal segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LikePattern {
    pub literal: Vec<u8>,
    pub anchor: Anchor,
}

impl LikePattern {
    /// Parses `%`-delimited patterns with a single non-empty segment.
    pub fn parse(pattern: &str) -> Result<LikePattern, String> {
        if pattern.contains('_') {
            return Err(format!("LIKE pattern `{pattern}`: the `_` wildcard is not supported"));
        }
        let segments: Vec<&str> = pattern.split('%').collect();
        let literal: Vec<&str> = segments.iter().copied().filter(|s| !s.is_empty()).collect();
        if literal.len() > 1 {
            return Err(format!(
                "LIKE pattern `{pattern}`: only one literal segment is supported"
            ));
        }
        let has_wildcard = segments.len() > 1;
        let first_literal = !segments[0].is_empty();
        let last_literal = !segments[segments.len() - 1].is_empty();
        let anchor = match (has_wildcard, first_literal, last_literal) {
            (false, _, _) => Anchor::Exact,
            (true, true, false) => Anchor::Start,
            (true, false, true) => Anchor::End,
            _ => Anchor::Any,
        };
        Ok(LikePattern {
            literal: literal.first().map_or(Vec::new(), |s| s.as_bytes().to_vec()),
            anchor,
        })
    }

    /// True for patterns that accept every string (`%`, `%%`, ...).
    pub fn matches_all(&self) -> bool {
        self.literal.is_empty() && self.anchor != Anchor::Exact
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::ColRef { name } => f.write_str(name),
            Expr::Literal(Value::Utf8(s)) => write!(f, "'{}'", s.replace('\'', "''")),
            Expr::Literal(v @ Value::Date(_)) => write!(f, "DATE '{v}'"),
            Expr::Literal(v) => write!(f, "{v}"),
            Expr::Arith { op, left, right } => write!(f, "({left} {} {right})", op.symbol()),
            Expr::Compare { op, left, right } => write!(f, "({left} {} {right})", op.symbol()),
            Expr::Logical { op, left, right } => {
                let kw = match op {
                    LogicOp::And => "AND",
                    LogicOp::Or => "OR",
                };
                write!(f, "({left} {kw} {right})")
            }
            Expr::Not { arg } => write!(f, "(NOT {arg})"),
            Expr::Between { arg, low, high } => write!(f, "({arg} BETWEEN {low} AND {high})"),
            Expr::Case {
                branches,
                else_value,
            } => {
                f.write_str("CASE")?;
                for b in branches {
                    write!(f, " WHEN {} THEN {}", b.when, b.then)?;
                }
                write!(f, " ELSE {else_value} END")
            }
            Expr::Like { arg, pattern } => write!(f, "({arg} LIKE '{}')", pattern.replace('\'', "''")),
            Expr::Predict { model, args } => {
                write!(f, "PREDICT({model}")?;
                for a in args {
                    write!(f, ", {a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn like_anchors() {
        let p = |s| LikePattern::parse(s).unwrap();
        assert_eq!(p("PROMO%").anchor, Anchor::Start);
        assert_eq!(p("%BRASS").anchor, Anchor::End);
        assert_eq!(p("%green%").anchor, Anchor::Any);
        assert_eq!(p("exact").anchor, Anchor::Exact);
        assert_eq!(p("%%x%").literal, b"x");
        assert!(p("%").matches_all());
        assert!(!p("").matches_all());
        assert!(LikePattern::parse("a%b").is_err());
        assert!(LikePattern::parse("a_").is_err());
    }

    #[test]
    fn literal_json_shape() {
        let e = Expr::lit(Value::Date(crate::store::date::parse("1994-01-01").unwrap()));
        let j = serde_json::to_string(&e).unwrap();
        assert_eq!(j, r#"{"expr":"lit","type":"date","value":"1994-01-01"}"#);
        let back: Expr = serde_json::from_str(&j).unwrap();
        assert_eq!(back, e);
    }
}
