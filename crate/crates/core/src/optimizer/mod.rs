//! Rule-based plan rewrites applied to a fixed point.

mod fold;
mod prune;

use crate::error::{Error, Result};
use crate::ir::{expr_type, infer_schema, AggExpr, Catalog, Expr, LikePattern, NamedExpr, PlanNode};
use crate::kernels::ArithOp;
use crate::store::{LogicalType, Schema, Value};

pub use fold::fold_expr;

pub type RewriteFn = fn(&PlanNode, &Catalog) -> Result<Option<PlanNode>>;

/// A named whole-plan rewrite; `None` means the rule did not fire.
#[derive(Clone, Copy)]
pub struct Rule {
    pub name: &'static str,
    pub rewrite: RewriteFn,
}

impl std::fmt::Debug for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

pub const MAX_PASSES: usize = 10;

/// The built-in rules in pass order.
pub fn default_rules() -> Vec<Rule> {
    vec![
        Rule {
            name: "fold_constants",
            rewrite: fold_constants,
        },
        Rule {
            name: "fuse_filters",
            rewrite: fuse_filters,
        },
        Rule {
            name: "simplify_case",
            rewrite: simplify_case,
        },
        Rule {
            name: "prune_columns",
            rewrite: prune::prune_columns,
        },
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    pub plan: PlanNode,
    /// Passes run, including the final pass in which nothing fired.
    pub passes: usize,
    pub fired: Vec<&'static str>,
}

/// Runs `rules` in order, pass after pass, until none fires or
/// `max_passes` is reached.
pub fn optimize(plan: &PlanNode, catalog: &Catalog, rules: &[Rule], max_passes: usize) -> Result<Optimized> {
    let schema = infer_schema(plan, catalog)?;
    let mut current = plan.clone();
    let mut fired = Vec::new();
    let mut passes = 0;
    while passes < max_passes {
        passes += 1;
        let mut changed = false;
        for rule in rules {
            if let Some(next) = (rule.rewrite)(&current, catalog)? {
                if next == current {
                    continue;
                }
                match infer_schema(&next, catalog) {
                    Ok(s) if s == schema => {}
                    _ => return Err(Error::RuleChangedSchema { rule: rule.name }),
                }
                current = next;
                fired.push(rule.name);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Optimized {
        plan: current,
        passes,
        fired,
    })
}

/// Optimizes with the built-in rules and the default pass limit.
pub fn optimize_default(plan: &PlanNode, catalog: &Catalog) -> Result<PlanNode> {
    Ok(optimize(plan, catalog, &default_rules(), MAX_PASSES)?.plan)
}

/// True if evaluating `e` can raise a data error (division, integer overflow).
pub fn can_fail(e: &Expr, schema: &Schema, catalog: &Catalog) -> bool {
    if let Expr::Arith { op, .. } = e {
        if *op == ArithOp::Div || expr_type(e, schema, catalog) != Ok(LogicalType::Float64) {
            return true;
        }
    }
    e.children().into_iter().any(|c| can_fail(c, schema, catalog))
}

/// Applies `f` at every node, parent before children.
fn top_down(
    plan: &PlanNode,
    catalog: &Catalog,
    f: &dyn Fn(&PlanNode, &Catalog) -> Result<Option<PlanNode>>,
) -> Result<Option<PlanNode>> {
    let here = f(plan, catalog)?;
    let node = here.as_ref().unwrap_or(plan);
    let mut changed = here.is_some();
    let mut kids = Vec::new();
    for c in node.inputs() {
        match top_down(c, catalog, f)? {
            Some(n) => {
                changed = true;
                kids.push(n);
            }
            None => kids.push(c.clone()),
        }
    }
    Ok(changed.then(|| with_inputs(node, kids)))
}

fn with_inputs(node: &PlanNode, mut kids: Vec<PlanNode>) -> PlanNode {
    let mut n = node.clone();
    match &mut n {
        PlanNode::Scan { .. } => {}
        PlanNode::Filter { input, .. }
        | PlanNode::Project { input, .. }
        | PlanNode::GroupAggregate { input, .. }
        | PlanNode::Sort { input, .. }
        | PlanNode::Limit { input, .. } => **input = kids.remove(0),
        PlanNode::EquiJoin { left, right, .. } => {
            **right = kids.remove(1);
            **left = kids.remove(0);
        }
    }
    n
}

/// Rewrites the expressions owned by `node` with `f`, given the input schema.
fn map_exprs(
    node: &PlanNode,
    catalog: &Catalog,
    f: &dyn Fn(&Expr, &Schema) -> Expr,
) -> Result<Option<PlanNode>> {
    let input_schema = |input: &PlanNode| infer_schema(input, catalog);
    let out = match node {
        PlanNode::Filter { input, predicate } => PlanNode::Filter {
            input: input.clone(),
            predicate: f(predicate, &input_schema(input)?),
        },
        PlanNode::Project { input, exprs } => {
            let s = input_schema(input)?;
            PlanNode::Project {
                input: input.clone(),
                exprs: exprs
                    .iter()
                    .map(|ne| NamedExpr {
                        name: ne.name.clone(),
                        expr: f(&ne.expr, &s),
                    })
                    .collect(),
            }
        }
        PlanNode::GroupAggregate { input, keys, aggs } => {
            let s = input_schema(input)?;
            PlanNode::GroupAggregate {
                input: input.clone(),
                keys: keys.clone(),
                aggs: aggs
                    .iter()
                    .map(|a| AggExpr {
                        name: a.name.clone(),
                        func: a.func,
                        arg: f(&a.arg, &s),
                    })
                    .collect(),
            }
        }
        _ => return Ok(None),
    };
    Ok((out != *node).then_some(out))
}

pub fn fold_constants(plan: &PlanNode, catalog: &Catalog) -> Result<Option<PlanNode>> {
    top_down(plan, catalog, &|n, c| map_exprs(n, c, &|e, _| fold_expr(e)))
}

/// `Filter(Filter(x, p), q)` becomes `Filter(x, p AND q)` unless `q` could
/// fail on rows that `p` removes.
pub fn fuse_filters(plan: &PlanNode, catalog: &Catalog) -> Result<Option<PlanNode>> {
    top_down(plan, catalog, &|n, c| {
        let PlanNode::Filter { input, predicate: q } = n else {
            return Ok(None);
        };
        let PlanNode::Filter { input: x, predicate: p } = &**input else {
            return Ok(None);
        };
        if can_fail(q, &infer_schema(x, c)?, c) {
            return Ok(None);
        }
        Ok(Some(PlanNode::Filter {
            input: x.clone(),
            predicate: Expr::and(p.clone(), q.clone()),
        }))
    })
}

fn simplify_expr(e: &Expr, schema: &Schema, catalog: &Catalog) -> Expr {
    let e = fold::map_children(e, |c| simplify_expr(c, schema, catalog));
    let ty = |x: &Expr| expr_type(x, schema, catalog).ok();
    match &e {
        Expr::Case {
            branches,
            else_value,
        } if matches!(branches[0].when, Expr::Literal(Value::Bool(true))) => {
            let rest_safe = branches[1..]
                .iter()
                .flat_map(|b| [&b.when, &b.then])
                .chain(std::iter::once(&**else_value))
                .all(|x| !can_fail(x, schema, catalog));
            if rest_safe && ty(&branches[0].then) == ty(&e) {
                return branches[0].then.clone();
            }
            e
        }
        Expr::Like { arg, pattern }
            if LikePattern::parse(pattern).is_ok_and(|p| p.matches_all()) && !can_fail(arg, schema, catalog) =>
        {
            Expr::lit(Value::Bool(true))
        }
        _ => e,
    }
}

/// Constant-true first CASE branch to its value; `LIKE '%'` to true.
pub fn simplify_case(plan: &PlanNode, catalog: &Catalog) -> Result<Option<PlanNode>> {
    top_down(plan, catalog, &|n, c| map_exprs(n, c, &|e, s| simplify_expr(e, s, c)))
}

pub use prune::prune_columns;

#[cfg(test)]
mod tests;
