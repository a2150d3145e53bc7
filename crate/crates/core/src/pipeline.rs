//! SQL text (or plan JSON) to a runnable executor.

use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::{build_executor, plan_operators, Executor, Tables};
use crate::ir::{infer_schema, Catalog, PlanNode};
use crate::kernels::BackendKind;
use crate::ml::load_model;
use crate::optimizer::optimize_default;
use crate::sql::compile_sql;
use crate::store::csv::{load_table_dir, DEFAULT_DELIMITER};

/// Loads every `<name>.csv` in `dir` that has a `<name>.schema.json` sidecar.
pub fn load_data_dir(dir: &Path) -> Result<Tables> {
    let mut tables = Tables::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".schema.json")) else {
            continue;
        };
        tables.insert(name.to_string(), load_table_dir(dir, name, DEFAULT_DELIMITER)?);
    }
    Ok(tables)
}

/// Catalog of `tables` plus models read from `(name, path)` pairs.
pub fn build_catalog(tables: &Tables, models: &[(String, std::path::PathBuf)]) -> Result<Catalog> {
    let mut catalog = Catalog::from_tables(tables)?;
    register_models(&mut catalog, models)?;
    Ok(catalog)
}

/// A plan from SQL text, or from plan JSON when `is_json` is set.
pub fn logical_plan(text: &str, is_json: bool, catalog: &Catalog) -> Result<PlanNode> {
    if is_json {
        let plan = PlanNode::from_json(text)?;
        infer_schema(&plan, catalog)?;
        Ok(plan)
    } else {
        compile_sql(text, catalog)
    }
}

/// Optimizes (unless `optimize` is false), lowers and binds to `backend`.
pub fn compile_plan(plan: &PlanNode, catalog: &Catalog, optimize: bool, backend: BackendKind) -> Result<Executor> {
    let plan = if optimize { optimize_default(plan, catalog)? } else { plan.clone() };
    Ok(build_executor(plan_operators(&plan, catalog)?, backend.create()))
}

/// Catalog from the schema sidecars in `dir`, without reading any CSV.
pub fn load_catalog_dir(dir: &Path) -> Result<Catalog> {
    let mut catalog = Catalog::new();
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok()?.file_name().to_str()?.strip_suffix(".schema.json").map(String::from))
        .collect();
    names.sort();
    for name in names {
        let text = std::fs::read_to_string(dir.join(format!("{name}.schema.json")))?;
        catalog.register_table(name, crate::store::Schema::from_json(&text)?)?;
    }
    Ok(catalog)
}

/// Adds models read from `(name, path)` pairs to `catalog`.
pub fn register_models(catalog: &mut Catalog, models: &[(String, std::path::PathBuf)]) -> Result<()> {
    for (name, path) in models {
        let text = std::fs::read_to_string(path)?;
        let spec = load_model(&text).map_err(|e| match e {
            Error::Model { path: p, msg } => Error::Model {
                path: format!("{}{}", path.display(), p.trim_start_matches('$')),
                msg,
            },
            other => other,
        })?;
        catalog.register_model(name.clone(), spec)?;
    }
    Ok(())
}
