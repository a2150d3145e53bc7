use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ml::ModelSpec;
use crate::store::{EncodedTable, Schema};

/// Table schemas and registered models visible to planning.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    tables: BTreeMap<String, Schema>,
    models: BTreeMap<String, Arc<ModelSpec>>,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    pub fn register_table(&mut self, name: impl Into<String>, schema: Schema) -> Result<()> {
        let name = name.into();
        if let Some(d) = schema.duplicate_name() {
            return Err(Error::Schema(format!("table `{name}`: duplicate column `{d}`")));
        }
        if self.tables.contains_key(&name) {
            return Err(Error::Schema(format!("table `{name}` is already registered")));
        }
        self.tables.insert(name, schema);
        Ok(())
    }

    pub fn with_table(mut self, name: &str, schema: Schema) -> Result<Self> {
        self.register_table(name, schema)?;
        Ok(self)
    }

    /// Registers every table in `tables` under its map key.
    pub fn from_tables<'a>(tables: impl IntoIterator<Item = (&'a String, &'a EncodedTable)>) -> Result<Self> {
        let mut c = Catalog::new();
        for (name, t) in tables {
            c.register_table(name.clone(), t.schema())?;
        }
        Ok(c)
    }

    pub fn register_model(&mut self, name: impl Into<String>, spec: ModelSpec) -> Result<()> {
        let name = name.into();
        if self.models.contains_key(&name) {
            return Err(Error::Model {
                path: name,
                msg: "a model with this name is already registered".into(),
            });
        }
        self.models.insert(name, Arc::new(spec));
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&Schema> {
        self.tables.get(name)
    }

    pub fn model(&self, name: &str) -> Option<&Arc<ModelSpec>> {
        self.models.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&String, &Schema)> {
        self.tables.iter()
    }

    pub fn models(&self) -> impl Iterator<Item = (&String, &Arc<ModelSpec>)> {
        self.models.iter()
    }
}
