// SPDX-License-Identifier: Apache-2.0

//! Scan orchestration: per (CWE, module) asset identification, static
//! analysis and contextualization, plus reports and precision metrics.

mod config;
mod metrics;
mod report;
mod scan;

use thiserror::Error;

pub use config::{load_manifest, ContextMode, Design, Manifest, ScanConfig};
pub use metrics::{compute_metrics, ratio_str, render_metrics, Labels, MetricsRow, MetricsTable};
pub use report::{
    render_summary, write_atomic, write_outputs, Artifact, AssertionRecord, FindingRecord, InputDigest, ScanReport,
    Site, StageName, Timings, UnitError, UnitReport, REPORT_VERSION,
};
pub use scan::{run_scan, scan_design, ScanOutcome};

pub use crate::cwe::dispatch_strategy;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
