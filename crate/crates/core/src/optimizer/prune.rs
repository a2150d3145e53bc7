use crate::error::Result;
use crate::ir::{infer_schema, join_schema, Catalog, Expr, NamedExpr, PlanNode};
use crate::store::Schema;

fn add(set: &mut Vec<String>, names: impl IntoIterator<Item = String>) {
    for n in names {
        if !set.contains(&n) {
            set.push(n);
        }
    }
}

fn narrowed(schema: &Schema, keep: &[bool]) -> Schema {
    Schema::new(
        schema
            .columns
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(f, _)| f.clone())
            .collect(),
    )
}

/// Rebuilds `node` so that it produces at least the columns in `required`.
/// Scans get a narrowing Project unless one already sits on top of them.
fn prune(node: &PlanNode, required: &[String], catalog: &Catalog, under_project: bool) -> Result<PlanNode> {
    Ok(match node {
        PlanNode::Scan { table } => {
            let schema = infer_schema(node, catalog)?;
            let mut keep: Vec<&str> = schema.names().filter(|n| required.iter().any(|r| r == n)).collect();
            if keep.is_empty() {
                keep.extend(schema.names().take(1));
            }
            if under_project || keep.len() == schema.len() {
                node.clone()
            } else {
                PlanNode::Project {
                    input: Box::new(PlanNode::scan(table.clone())),
                    exprs: keep
                        .iter()
                        .map(|n| NamedExpr {
                            name: n.to_string(),
                            expr: Expr::col(*n),
                        })
                        .collect(),
                }
            }
        }
        PlanNode::Project { input, exprs } => {
            // Only entries that cannot fail are dropped.
            let mut kept: Vec<NamedExpr> = exprs
                .iter()
                .filter(|ne| {
                    required.contains(&ne.name) || !matches!(ne.expr, Expr::ColRef { .. } | Expr::Literal(_))
                })
                .cloned()
                .collect();
            if kept.is_empty() {
                kept.push(exprs[0].clone());
            }
            let mut need = Vec::new();
            for ne in &kept {
                add(&mut need, ne.expr.columns());
            }
            PlanNode::Project {
                input: Box::new(prune(input, &need, catalog, true)?),
                exprs: kept,
            }
        }
        PlanNode::Filter { input, predicate } => {
            let mut need = required.to_vec();
            add(&mut need, predicate.columns());
            PlanNode::Filter {
                input: Box::new(prune(input, &need, catalog, false)?),
                predicate: predicate.clone(),
            }
        }
        PlanNode::Sort { input, keys } => {
            let mut need = required.to_vec();
            add(&mut need, keys.iter().map(|k| k.column.clone()));
            PlanNode::Sort {
                input: Box::new(prune(input, &need, catalog, false)?),
                keys: keys.clone(),
            }
        }
        PlanNode::Limit { input, k } => PlanNode::Limit {
            input: Box::new(prune(input, required, catalog, false)?),
            k: *k,
        },
        PlanNode::GroupAggregate { input, keys, aggs } => {
            let mut need = keys.clone();
            for a in aggs {
                add(&mut need, a.arg.columns());
            }
            PlanNode::GroupAggregate {
                input: Box::new(prune(input, &need, catalog, false)?),
                keys: keys.clone(),
                aggs: aggs.clone(),
            }
        }
        PlanNode::EquiJoin {
            left,
            right,
            left_key,
            right_key,
            kind,
        } => {
            let (ls, rs) = (infer_schema(left, catalog)?, infer_schema(right, catalog)?);
            let out = join_schema(&ls, &rs);
            let nl = ls.len();
            let mut keep: Vec<bool> = out.names().map(|n| required.iter().any(|r| r == n)).collect();
            keep[ls.index_of(left_key).expect("validated key")] = true;
            keep[nl + rs.index_of(right_key).expect("validated key")] = true;
            // Dropping a left column can change how right columns are renamed.
            let renamed = join_schema(&narrowed(&ls, &keep[..nl]), &narrowed(&rs, &keep[nl..]));
            if renamed != narrowed(&out, &keep) {
                keep.iter_mut().for_each(|k| *k = true);
            }
            let names = |s: &Schema, k: &[bool]| narrowed(s, k).names().map(String::from).collect::<Vec<_>>();
            PlanNode::EquiJoin {
                left: Box::new(prune(left, &names(&ls, &keep[..nl]), catalog, false)?),
                right: Box::new(prune(right, &names(&rs, &keep[nl..]), catalog, false)?),
                left_key: left_key.clone(),
                right_key: right_key.clone(),
                kind: *kind,
            }
        }
    })
}

/// Narrows every relation to the columns its consumers reference.
pub fn prune_columns(plan: &PlanNode, catalog: &Catalog) -> Result<Option<PlanNode>> {
    let all: Vec<String> = infer_schema(plan, catalog)?.names().map(String::from).collect();
    let out = prune(plan, &all, catalog, false)?;
    Ok((out != *plan).then_some(out))
}
