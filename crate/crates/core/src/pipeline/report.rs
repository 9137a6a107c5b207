// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::assertion::AssetSet;
use crate::checker::CheckStatus;
use crate::lint::LintViolation;
use crate::llm::Finding;
use crate::{CweId, Diagnostic, Strategy, Variation};

pub const REPORT_VERSION: u32 = 1;

/// Where a finding points in the static-analysis output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Site {
    Violation {
        check: String,
        line_no: u32,
        statement: String,
        lhsexpr: String,
        security_sensitive_signal: String,
    },
    Property {
        assertion: String,
        failing_cycle: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingRecord {
    #[serde(flatten)]
    pub finding: Finding,
    #[serde(flatten)]
    pub site: Site,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionRecord {
    pub id: String,
    pub sva: String,
    #[serde(flatten)]
    pub status: CheckStatus,
}

/// Milliseconds per stage; zero in deterministic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub asset_id_ms: u64,
    pub static_analysis_ms: u64,
    pub contextualization_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    AssetId,
    StaticAnalysis,
    Contextualization,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitError {
    pub stage: StageName,
    pub message: String,
}

/// Outcome for one (CWE, module) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitReport {
    pub cwe: CweId,
    pub module: String,
    pub file: String,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<UnitError>,
    pub assets_identified: usize,
    pub assertions_formed: usize,
    /// Lint violations or falsified assertions.
    pub sa_outputs: usize,
    pub flagged: usize,
    pub removed_in_contextualization: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assets: Option<AssetSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<LintViolation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assertions: Vec<AssertionRecord>,
    pub findings: Vec<FindingRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    pub timings: Timings,
}

impl UnitReport {
    pub fn new(cwe: CweId, module: &str, file: &str) -> UnitReport {
        UnitReport {
            cwe,
            module: module.into(),
            file: file.into(),
            strategy: cwe.strategy(),
            error: None,
            assets_identified: 0,
            assertions_formed: 0,
            sa_outputs: 0,
            flagged: 0,
            removed_in_contextualization: 0,
            assets: None,
            violations: Vec::new(),
            assertions: Vec::new(),
            findings: Vec::new(),
            diagnostics: Vec::new(),
            timings: Timings::default(),
        }
    }

    /// Recompute the derived counts from the findings.
    pub(crate) fn settle_counts(&mut self) {
        self.flagged = self.findings.iter().filter(|f| f.finding.insecure).count();
        self.removed_in_contextualization = self.sa_outputs - self.flagged;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub report_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config_digest: String,
    /// Unix seconds; absent in deterministic mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
    pub manifest: String,
    pub inputs: Vec<InputDigest>,
    pub variation: Variation,
    pub provider: String,
    pub model: String,
    pub cwes: Vec<CweId>,
    pub units: Vec<UnitReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

impl ScanReport {
    pub fn flagged(&self) -> usize {
        self.units.iter().map(|u| u.flagged).sum()
    }

    pub fn failed_units(&self) -> usize {
        self.units.iter().filter(|u| u.error.is_some()).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ScanReport, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(format!("report: {e}")))
    }
}

/// An extra output file, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub contents: String,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    assets: usize,
    assertions: usize,
    outputs: usize,
    flagged: usize,
    removed: usize,
}

impl Counts {
    fn add(&mut self, u: &UnitReport) {
        self.assets += u.assets_identified;
        self.assertions += u.assertions_formed;
        self.outputs += u.sa_outputs;
        self.flagged += u.flagged;
        self.removed += u.removed_in_contextualization;
    }

    fn add_counts(&mut self, o: &Counts) {
        self.assets += o.assets;
        self.assertions += o.assertions;
        self.outputs += o.outputs;
        self.flagged += o.flagged;
        self.removed += o.removed;
    }

    fn line(&self, out: &mut String, label: &str, lint: bool) {
        let assertions = if lint {
            "-".to_string()
        } else {
            self.assertions.to_string()
        };
        let _ = writeln!(
            out,
            "  {label:<24} {:>7} {:>10} {:>8} {:>8} {:>8}",
            self.assets, assertions, self.outputs, self.flagged, self.removed
        );
    }
}

/// Plain-text summary: one section per CWE with a row per module, then a
/// grand total.
pub fn render_summary(r: &ScanReport) -> String {
    let mut out = String::new();
    let manifest = Path::new(&r.manifest)
        .file_name()
        .map_or(r.manifest.clone(), |n| n.to_string_lossy().into_owned());
    let _ = writeln!(
        out,
        "scan of {manifest} ({}, {} / {})",
        r.variation, r.provider, r.model
    );
    let header = format!(
        "  {:<24} {:>7} {:>10} {:>8} {:>8} {:>8}",
        "module", "assets", "assertions", "outputs", "flagged", "removed"
    );
    let mut grand = Counts::default();
    for &cwe in &r.cwes {
        let lint = cwe.strategy() == Strategy::Lint;
        let _ = writeln!(out, "\nCWE-{cwe} ({})", if lint { "lint" } else { "assertion" });
        let _ = writeln!(out, "{header}");
        let mut total = Counts::default();
        for u in r.units.iter().filter(|u| u.cwe == cwe) {
            let mut c = Counts::default();
            c.add(u);
            let label = match &u.error {
                Some(_) => format!("{} (failed)", u.module),
                None => u.module.clone(),
            };
            c.line(&mut out, &label, lint);
            total.add(u);
        }
        total.line(&mut out, "total", lint);
        grand.add_counts(&total);
    }
    let _ = writeln!(out, "\nall CWEs");
    let _ = writeln!(out, "{header}");
    grand.line(&mut out, "total", false);
    out
}

/// Write `contents` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().unwrap_or_default().to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// `report.json`, `summary.txt` and every artifact under `dir`.
pub fn write_outputs(dir: &Path, report: &ScanReport, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut written = Vec::new();
    let files = [
        (PathBuf::from("report.json"), report.to_json()),
        (PathBuf::from("summary.txt"), render_summary(report)),
    ];
    for (rel, text) in files
        .iter()
        .map(|(p, t)| (p, t.as_str()))
        .chain(artifacts.iter().map(|a| (&a.path, a.contents.as_str())))
    {
        let p = dir.join(rel);
        write_atomic(&p, text)?;
        written.push(p);
    }
    Ok(written)
}
