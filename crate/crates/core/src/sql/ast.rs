use std::fmt;

use crate::ir::AggFunc;
use crate::kernels::{ArithOp, CmpOp, LogicOp};

/// Byte offset of a node in the source text. Spans never affect equality,
/// so printed and reparsed trees compare equal.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span(pub usize);

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident {
            name: name.into(),
            span: Span::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BinOp {
    Arith(ArithOp),
    Cmp(CmpOp),
    Logic(LogicOp),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Column { table: Option<Ident>, name: Ident },
    Int(i64),
    Float(f64),
    Str(String),
    /// `DATE 'YYYY-MM-DD'`, validated by the parser.
    Date(String),
    Bool(bool),
    Neg(Box<AstExpr>),
    Not(Box<AstExpr>),
    Binary {
        op: BinOp,
        left: Box<AstExpr>,
        right: Box<AstExpr>,
    },
    Between {
        arg: Box<AstExpr>,
        low: Box<AstExpr>,
        high: Box<AstExpr>,
    },
    Like { arg: Box<AstExpr>, pattern: String },
    Case {
        branches: Vec<(AstExpr, AstExpr)>,
        else_value: Box<AstExpr>,
    },
    /// `None` argument is `COUNT(*)`.
    Aggregate { func: AggFunc, arg: Option<Box<AstExpr>> },
    Predict { model: Ident, args: Vec<AstExpr> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AstExpr {
    pub kind: ExprKind,
    pub span: Span,
}

impl AstExpr {
    pub fn new(kind: ExprKind) -> Self {
        AstExpr {
            kind,
            span: Span::default(),
        }
    }

    pub fn children(&self) -> Vec<&AstExpr> {
        match &self.kind {
            ExprKind::Column { .. }
            | ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Str(_)
            | ExprKind::Date(_)
            | ExprKind::Bool(_) => vec![],
            ExprKind::Neg(e) | ExprKind::Not(e) => vec![e],
            ExprKind::Binary { left, right, .. } => vec![left, right],
            ExprKind::Between { arg, low, high } => vec![arg, low, high],
            ExprKind::Like { arg, .. } => vec![arg],
            ExprKind::Case {
                branches,
                else_value,
            } => branches
                .iter()
                .flat_map(|(w, t)| [w, t])
                .chain(std::iter::once(&**else_value))
                .collect(),
            ExprKind::Aggregate { arg, .. } => arg.iter().map(|a| &**a).collect(),
            ExprKind::Predict { args, .. } => args.iter().collect(),
        }
    }

    pub fn contains_aggregate(&self) -> bool {
        matches!(self.kind, ExprKind::Aggregate { .. }) || self.children().iter().any(|c| c.contains_aggregate())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SelectItem {
    Wildcard(Span),
    Expr { expr: AstExpr, alias: Option<Ident> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum From {
    Table(Ident),
    /// `FROM a, b`; the join key comes from WHERE.
    Comma(Ident, Ident),
    Join { left: Ident, right: Ident, on: AstExpr },
}

impl From {
    pub fn tables(&self) -> Vec<&Ident> {
        match self {
            From::Table(t) => vec![t],
            From::Comma(a, b) | From::Join { left: a, right: b, .. } => vec![a, b],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderItem {
    pub column: Ident,
    pub asc: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub select: Vec<SelectItem>,
    pub from: From,
    pub where_clause: Option<AstExpr>,
    pub group_by: Vec<AstExpr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub span: Span,
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Display for AstExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Column { table: Some(t), name } => write!(f, "{t}.{name}"),
            ExprKind::Column { table: None, name } => write!(f, "{name}"),
            ExprKind::Int(v) => write!(f, "{v}"),
            ExprKind::Float(v) => {
                let s = v.to_string();
                if s.contains('.') {
                    f.write_str(&s)
                } else {
                    write!(f, "{s}.0")
                }
            }
            ExprKind::Str(s) => f.write_str(&quote(s)),
            ExprKind::Date(s) => write!(f, "DATE {}", quote(s)),
            ExprKind::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
            ExprKind::Neg(e) => write!(f, "(-{e})"),
            ExprKind::Not(e) => write!(f, "(NOT {e})"),
            ExprKind::Binary { op, left, right } => {
                let sym = match op {
                    BinOp::Arith(a) => a.symbol(),
                    BinOp::Cmp(c) => c.symbol(),
                    BinOp::Logic(LogicOp::And) => "AND",
                    BinOp::Logic(LogicOp::Or) => "OR",
                };
                write!(f, "({left} {sym} {right})")
            }
            ExprKind::Between { arg, low, high } => write!(f, "({arg} BETWEEN {low} AND {high})"),
            ExprKind::Like { arg, pattern } => write!(f, "({arg} LIKE {})", quote(pattern)),
            ExprKind::Case {
                branches,
                else_value,
            } => {
                f.write_str("CASE")?;
                for (w, t) in branches {
                    write!(f, " WHEN {w} THEN {t}")?;
                }
                write!(f, " ELSE {else_value} END")
            }
            ExprKind::Aggregate { func, arg: Some(a) } => write!(f, "{}({a})", func.name()),
            ExprKind::Aggregate { func, arg: None } => write!(f, "{}(*)", func.name()),
            ExprKind::Predict { model, args } => {
                write!(f, "PREDICT({model}")?;
                for a in args {
                    write!(f, ", {a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        for (i, item) in self.select.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match item {
                SelectItem::Wildcard(_) => f.write_str("*")?,
                SelectItem::Expr { expr, alias: None } => write!(f, "{expr}")?,
                SelectItem::Expr { expr, alias: Some(a) } => write!(f, "{expr} AS {a}")?,
            }
        }
        match &self.from {
            From::Table(t) => write!(f, " FROM {t}")?,
            From::Comma(a, b) => write!(f, " FROM {a}, {b}")?,
            From::Join { left, right, on } => write!(f, " FROM {left} JOIN {right} ON {on}")?,
        }
        if let Some(w) = &self.where_clause {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            let keys: Vec<String> = self.group_by.iter().map(ToString::to_string).collect();
            write!(f, " GROUP BY {}", keys.join(", "))?;
        }
        if !self.order_by.is_empty() {
            let keys: Vec<String> = self
                .order_by
                .iter()
                .map(|o| format!("{} {}", o.column, if o.asc { "ASC" } else { "DESC" }))
                .collect();
            write!(f, " ORDER BY {}", keys.join(", "))?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}
