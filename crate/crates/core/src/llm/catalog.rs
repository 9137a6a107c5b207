// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::LlmError;
use crate::CweId;

const BUILTIN_CATALOG: &str = include_str!("../../data/cwe_catalog.json");
const BUILTIN_SCHEMAS: &str = include_str!("../../data/schemas.json");

/// An in-context example of a CWE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    /// Short description of where the code comes from.
    pub module: String,
    pub code: String,
    pub explanation: String,
    /// Sentence naming the assets in the example.
    pub assets: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub description: String,
    /// What the asset question asks for.
    pub relevant_signals: String,
    /// Hint on what such signals look like.
    pub typical_nature: String,
    /// Noun for one static-analysis output.
    pub sa_output: String,
    #[serde(default)]
    pub exemplar: Option<Exemplar>,
}

#[derive(Debug, Clone, Deserialize)]
struct CatalogFile {
    #[allow(dead_code)]
    version: u32,
    entries: BTreeMap<String, CatalogEntry>,
}

#[derive(Debug, Clone, Deserialize)]
struct SchemaFile {
    version: u32,
    assets: BTreeMap<String, Value>,
    contextualization: Value,
}

/// CWE descriptions, signal hints, exemplars and response schemas.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: BTreeMap<CweId, CatalogEntry>,
    asset_schemas: BTreeMap<CweId, Value>,
    context_schema: Value,
    pub schema_version: u32,
}

fn keyed<T>(m: BTreeMap<String, T>, what: &str) -> Result<BTreeMap<CweId, T>, LlmError> {
    m.into_iter()
        .map(|(k, v)| {
            k.parse::<CweId>()
                .map(|c| (c, v))
                .map_err(|e| LlmError::Config(format!("{what}: {e}")))
        })
        .collect()
}

impl Catalog {
    pub fn builtin() -> Catalog {
        Catalog::from_json(BUILTIN_CATALOG, BUILTIN_SCHEMAS).expect("built-in catalog is valid")
    }

    pub fn from_json(catalog: &str, schemas: &str) -> Result<Catalog, LlmError> {
        let c: CatalogFile = serde_json::from_str(catalog).map_err(|e| LlmError::Config(format!("catalog: {e}")))?;
        let s: SchemaFile = serde_json::from_str(schemas).map_err(|e| LlmError::Config(format!("schemas: {e}")))?;
        let entries = keyed(c.entries, "catalog")?;
        let asset_schemas = keyed(s.assets, "schemas")?;
        for cwe in CweId::ALL {
            if !entries.contains_key(&cwe) || !asset_schemas.contains_key(&cwe) {
                return Err(LlmError::Config(format!("no catalog entry or schema for CWE-{cwe}")));
            }
        }
        Ok(Catalog {
            entries,
            asset_schemas,
            context_schema: s.contextualization,
            schema_version: s.version,
        })
    }

    /// Catalog from a file, with the built-in schemas.
    pub fn from_file(path: &Path) -> Result<Catalog, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Catalog::from_json(&text, BUILTIN_SCHEMAS)
    }

    pub fn entry(&self, cwe: CweId) -> &CatalogEntry {
        &self.entries[&cwe]
    }

    pub fn asset_schema(&self, cwe: CweId) -> &Value {
        &self.asset_schemas[&cwe]
    }

    pub fn context_schema(&self) -> &Value {
        &self.context_schema
    }

    /// Drop one exemplar (used to exercise the missing-exemplar path).
    pub fn without_exemplar(mut self, cwe: CweId) -> Catalog {
        if let Some(e) = self.entries.get_mut(&cwe) {
            e.exemplar = None;
        }
        self
    }
}
