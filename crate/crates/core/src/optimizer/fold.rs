//! Evaluation of literal-only expressions at plan time.

use crate::ir::{unify, Expr, LikePattern};
use crate::kernels::{Anchor, ArithOp, CmpOp, LogicOp};
use crate::store::{LogicalType, Value};

fn as_f64(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn arith(op: ArithOp, a: &Value, b: &Value) -> Option<Value> {
    if let (Value::Int64(x), Value::Int64(y)) = (a, b) {
        let r = match op {
            ArithOp::Add => x.checked_add(*y),
            ArithOp::Sub => x.checked_sub(*y),
            ArithOp::Mul => x.checked_mul(*y),
            ArithOp::Div => None,
        };
        if let Some(r) = r {
            return Some(Value::Int64(r));
        }
        if op != ArithOp::Div {
            return None;
        }
    }
    let (x, y) = (as_f64(a)?, as_f64(b)?);
    let r = match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div if y == 0.0 => return None,
        ArithOp::Div => x / y,
    };
    r.is_finite().then_some(Value::Float64(r))
}

fn compare(op: CmpOp, a: &Value, b: &Value) -> Option<bool> {
    let ord = match (a, b) {
        (Value::Int64(x), Value::Int64(y)) | (Value::Date(x), Value::Date(y)) => Some(x.cmp(y)),
        (Value::Utf8(x), Value::Utf8(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => as_f64(a)?.partial_cmp(&as_f64(b)?),
    };
    Some(match ord {
        None => op == CmpOp::Ne,
        Some(o) => op.holds(o),
    })
}

fn like(s: &str, pattern: &str) -> Option<bool> {
    let p = LikePattern::parse(pattern).ok()?;
    let (s, lit) = (s.as_bytes(), p.literal.as_slice());
    Some(match p.anchor {
        Anchor::Exact => s == lit,
        Anchor::Start => s.starts_with(lit),
        Anchor::End => s.ends_with(lit),
        Anchor::Any => lit.is_empty() || s.windows(lit.len()).any(|w| w == lit),
    })
}

fn lit(e: &Expr) -> Option<&Value> {
    match e {
        Expr::Literal(v) => Some(v),
        _ => None,
    }
}

fn to_type(v: Value, ty: LogicalType) -> Value {
    match (v, ty) {
        (Value::Int64(x), LogicalType::Float64) => Value::Float64(x as f64),
        (v, _) => v,
    }
}

/// Value of `e` when every child is a literal and evaluation cannot fail.
fn eval(e: &Expr) -> Option<Value> {
    match e {
        Expr::Arith { op, left, right } => arith(*op, lit(left)?, lit(right)?),
        Expr::Compare { op, left, right } => compare(*op, lit(left)?, lit(right)?).map(Value::Bool),
        Expr::Logical { op, left, right } => match (lit(left)?, lit(right)?) {
            (Value::Bool(a), Value::Bool(b)) => Some(Value::Bool(match op {
                LogicOp::And => *a && *b,
                LogicOp::Or => *a || *b,
            })),
            _ => None,
        },
        Expr::Not { arg } => match lit(arg)? {
            Value::Bool(b) => Some(Value::Bool(!b)),
            _ => None,
        },
        Expr::Between { arg, low, high } => {
            let a = lit(arg)?;
            Some(Value::Bool(
                compare(CmpOp::Ge, a, lit(low)?)? && compare(CmpOp::Le, a, lit(high)?)?,
            ))
        }
        Expr::Like { arg, pattern } => match lit(arg)? {
            Value::Utf8(s) => like(s, pattern).map(Value::Bool),
            _ => None,
        },
        Expr::Case {
            branches,
            else_value,
        } => {
            let otherwise = lit(else_value)?;
            let mut ty = otherwise.logical_type();
            let mut chosen = None;
            for b in branches {
                let then = lit(&b.then)?;
                ty = unify(ty, then.logical_type())?;
                if chosen.is_none() && matches!(lit(&b.when)?, Value::Bool(true)) {
                    chosen = Some(then);
                }
            }
            Some(to_type(chosen.unwrap_or(otherwise).clone(), ty))
        }
        Expr::ColRef { .. } | Expr::Literal(_) | Expr::Predict { .. } => None,
    }
}

fn rebuild(e: &Expr, f: &mut impl FnMut(&Expr) -> Expr) -> Expr {
    match e {
        Expr::ColRef { .. } | Expr::Literal(_) => e.clone(),
        Expr::Arith { op, left, right } => Expr::arith(*op, f(left), f(right)),
        Expr::Compare { op, left, right } => Expr::cmp(*op, f(left), f(right)),
        Expr::Logical { op, left, right } => Expr::logical(*op, f(left), f(right)),
        Expr::Not { arg } => Expr::not(f(arg)),
        Expr::Between { arg, low, high } => Expr::between(f(arg), f(low), f(high)),
        Expr::Like { arg, pattern } => Expr::like(f(arg), pattern.clone()),
        Expr::Case {
            branches,
            else_value,
        } => Expr::case(
            branches.iter().map(|b| (f(&b.when), f(&b.then))).collect(),
            f(else_value),
        ),
        Expr::Predict { model, args } => Expr::Predict {
            model: model.clone(),
            args: args.iter().map(&mut *f).collect(),
        },
    }
}

/// Applies `f` to every child of `e`, rebuilding the node.
pub fn map_children(e: &Expr, mut f: impl FnMut(&Expr) -> Expr) -> Expr {
    rebuild(e, &mut f)
}

/// Folds literal-only subexpressions bottom-up.
pub fn fold_expr(e: &Expr) -> Expr {
    let e = map_children(e, fold_expr);
    match eval(&e) {
        Some(v) => Expr::Literal(v),
        None => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(x: f64) -> Expr {
        Expr::lit(Value::Float64(x))
    }

    fn i(x: i64) -> Expr {
        Expr::lit(Value::Int64(x))
    }

    #[test]
    fn folds_nested_arithmetic() {
        let e = Expr::arith(ArithOp::Add, Expr::arith(ArithOp::Sub, i(1), f(0.07)), f(0.0));
        assert_eq!(fold_expr(&e), f(1.0 - 0.07));
        let e = Expr::arith(ArithOp::Mul, Expr::col("x"), Expr::arith(ArithOp::Sub, i(3), i(1)));
        assert_eq!(fold_expr(&e), Expr::arith(ArithOp::Mul, Expr::col("x"), i(2)));
    }

    #[test]
    fn keeps_expressions_that_would_fail() {
        for e in [
            Expr::arith(ArithOp::Div, i(1), i(0)),
            Expr::arith(ArithOp::Add, i(i64::MAX), i(1)),
            Expr::arith(ArithOp::Mul, f(1e300), f(1e300)),
        ] {
            assert_eq!(fold_expr(&e), e);
        }
        assert_eq!(fold_expr(&Expr::arith(ArithOp::Div, i(1), i(4))), f(0.25));
    }

    #[test]
    fn case_takes_the_unified_type() {
        let e = Expr::case(vec![(Expr::lit(Value::Bool(true)), i(1))], f(2.5));
        assert_eq!(fold_expr(&e), f(1.0));
    }

    #[test]
    fn like_and_between_on_literals() {
        let s = Expr::lit(Value::Utf8("PROMO BRUSHED".into()));
        assert_eq!(fold_expr(&Expr::like(s.clone(), "PROMO%")), Expr::lit(Value::Bool(true)));
        assert_eq!(fold_expr(&Expr::like(s, "%BRASS")), Expr::lit(Value::Bool(false)));
        let b = Expr::between(i(5), f(0.5), i(5));
        assert_eq!(fold_expr(&b), Expr::lit(Value::Bool(true)));
    }
}
