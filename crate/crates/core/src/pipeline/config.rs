// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::checker::CheckerConfig;
use crate::llm::ProviderConfig;
use crate::verilog::{parse_file, DesignUnit, SourceFile};
use crate::{CweId, Diagnostic, Variation};

/// How much RTL goes into each prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    /// The text of the module under analysis.
    #[default]
    Module,
    /// The whole source file containing it.
    WholeFile,
}

impl std::str::FromStr for ContextMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "module" => Ok(ContextMode::Module),
            "whole-file" => Ok(ContextMode::WholeFile),
            other => Err(format!("unknown context mode '{other}' (expected module|whole-file)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub manifest: PathBuf,
    pub cwes: Vec<CweId>,
    pub variation: Variation,
    pub provider: ProviderConfig,
    #[serde(default)]
    pub checker: CheckerConfig,
    #[serde(default)]
    pub emit_sva: bool,
    #[serde(default)]
    pub dump_vcd: bool,
    #[serde(default)]
    pub context: ContextMode,
    /// Omit wall-clock data from the report.
    #[serde(default)]
    pub deterministic: bool,
    /// Concurrent units; 0 picks one per core.
    #[serde(default)]
    pub jobs: usize,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.cwes.is_empty() {
            return Err(PipelineError::Config("no CWEs selected".into()));
        }
        if self.checker.max_depth < 2 {
            return Err(PipelineError::Config("max depth must be at least 2".into()));
        }
        self.provider
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// List of design files, relative to the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub name: String,
    pub files: Vec<String>,
    /// Restrict the scan to these modules; all modules when empty.
    #[serde(default)]
    pub modules: Vec<String>,
}

/// Parsed design files of a manifest.
#[derive(Debug, Clone)]
pub struct Design {
    pub manifest: Manifest,
    pub sources: Vec<Arc<SourceFile>>,
    pub units: Vec<DesignUnit>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Design {
    /// Units selected by the manifest filter.
    pub fn selected(&self) -> impl Iterator<Item = &DesignUnit> {
        self.units
            .iter()
            .filter(|u| self.manifest.modules.is_empty() || self.manifest.modules.contains(&u.name))
    }
}

pub fn load_manifest(path: &Path) -> Result<Design, PipelineError> {
    let io = |p: &Path, e: std::io::Error| PipelineError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut sources = Vec::new();
    let mut units = Vec::new();
    let mut diagnostics = Vec::new();
    for f in &manifest.files {
        let full = base.join(f);
        let text = std::fs::read_to_string(&full).map_err(|e| io(&full, e))?;
        let src = SourceFile::new(f.as_str(), text);
        let out = parse_file(src.clone());
        sources.push(src);
        units.extend(out.units);
        diagnostics.extend(out.diagnostics);
    }
    for m in &manifest.modules {
        if !units.iter().any(|u| &u.name == m) {
            return Err(PipelineError::Config(format!("manifest names unknown module '{m}'")));
        }
    }
    Ok(Design {
        manifest,
        sources,
        units,
        diagnostics,
    })
}
