// SPDX-License-Identifier: Apache-2.0

//! Structural lint checks for the lint-strategy CWEs.
//!
//! Each check produces raw hits over one module. A hit becomes a
//! [`LintViolation`] only when the signals it touches intersect the asset set
//! identified for the CWE.

mod checks;
mod latch;

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cwe::{CweId, Strategy};
use crate::diag::{DiagCode, Diagnostic};
use crate::digest::short_id;
use crate::verilog::{DesignUnit, SourceSpan};

pub use latch::{latched_signals, LatchSite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckId {
    WidthMismatch,
    ReverseConnectedBus,
    ImproperRangeIndex,
    ConcatInArrayAssign,
    ConcatUsingUnsizedNumbers,
    RhsHasConcat,
    IfWithoutElse,
    InferredLatch,
}

impl CheckId {
    pub const ALL: [CheckId; 8] = [
        CheckId::WidthMismatch,
        CheckId::ReverseConnectedBus,
        CheckId::ImproperRangeIndex,
        CheckId::ConcatInArrayAssign,
        CheckId::ConcatUsingUnsizedNumbers,
        CheckId::RhsHasConcat,
        CheckId::IfWithoutElse,
        CheckId::InferredLatch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::WidthMismatch => "WidthMismatch",
            CheckId::ReverseConnectedBus => "ReverseConnectedBus",
            CheckId::ImproperRangeIndex => "ImproperRangeIndex",
            CheckId::ConcatInArrayAssign => "ConcatInArrayAssign",
            CheckId::ConcatUsingUnsizedNumbers => "ConcatUsingUnsizedNumbers",
            CheckId::RhsHasConcat => "RhsHasConcat",
            CheckId::IfWithoutElse => "IfWithoutElse",
            CheckId::InferredLatch => "InferredLatch",
        }
    }

    pub fn from_name(s: &str) -> Option<CheckId> {
        CheckId::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Checks intersected against the conditional's signals rather than the
    /// whole statement.
    pub fn is_conditional(self) -> bool {
        matches!(self, CheckId::IfWithoutElse | CheckId::InferredLatch)
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The checks run for a lint-strategy CWE; empty for assertion CWEs.
pub fn checks_for(cwe: CweId) -> &'static [CheckId] {
    match cwe {
        CweId::Cwe1191 => &CheckId::ALL[..6],
        CweId::Cwe1300 => &CheckId::ALL[6..],
        _ => &[],
    }
}

/// One check hit before asset filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawHit {
    pub check: CheckId,
    pub module: String,
    pub span: SourceSpan,
    /// Exact source slice of the offending statement.
    pub statement: String,
    pub lhsexpr: String,
    /// Signals used for asset matching, in textual order.
    pub signals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintViolation {
    pub id: String,
    pub check: CheckId,
    pub cwe: CweId,
    pub module: String,
    pub file: String,
    pub line_no: u32,
    pub statement: String,
    pub lhsexpr: String,
    pub security_sensitive_signal: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LintError {
    #[error("CWE-{0} is checked with assertions, not lint checks")]
    NotLintCwe(u32),
}

/// Modules available for cross-module checks, keyed by name.
pub type ModuleLibrary<'a> = HashMap<&'a str, &'a DesignUnit>;

/// Run one check over one module.
pub fn run_check(check: CheckId, unit: &DesignUnit) -> Vec<RawHit> {
    run_check_with(check, unit, &ModuleLibrary::new())
}

/// Run one check, resolving instance ports against `library`.
pub fn run_check_with(check: CheckId, unit: &DesignUnit, library: &ModuleLibrary) -> Vec<RawHit> {
    let mut hits = match check {
        CheckId::WidthMismatch => checks::width_mismatch(unit),
        CheckId::ReverseConnectedBus => checks::reverse_connected_bus(unit, library),
        CheckId::ImproperRangeIndex => checks::improper_range_index(unit),
        CheckId::ConcatInArrayAssign => checks::concat_in_array_assign(unit),
        CheckId::ConcatUsingUnsizedNumbers => checks::concat_using_unsized(unit),
        CheckId::RhsHasConcat => checks::rhs_has_concat(unit),
        CheckId::IfWithoutElse => checks::if_without_else(unit),
        CheckId::InferredLatch => latch::inferred_latch(unit),
    };
    let mut seen = IndexSet::new();
    hits.retain(|h| seen.insert((h.span.start, h.span.end, h.lhsexpr.clone())));
    hits
}

/// Keep hits whose signals intersect `assets`; the matched asset is the
/// first hit signal (in textual order) that is an asset.
pub fn filter_by_assets(
    cwe: CweId,
    hits: &[RawHit],
    assets: &IndexSet<String>,
) -> (Vec<LintViolation>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    if assets.is_empty() {
        diags.push(Diagnostic::warning(
            DiagCode::EmptyAssets,
            format!(
                "no assets identified for CWE-{}; lint hits cannot be matched",
                cwe.number()
            ),
        ));
        return (Vec::new(), diags);
    }
    let out = hits
        .iter()
        .filter_map(|h| {
            let signal = h.signals.iter().find(|s| assets.contains(*s))?;
            Some(violation(cwe, h, signal))
        })
        .collect();
    (out, diags)
}

fn violation(cwe: CweId, h: &RawHit, signal: &str) -> LintViolation {
    let file = h.span.file.to_string();
    let line = h.span.line_start.to_string();
    let col = h.span.col_start.to_string();
    let num = cwe.number().to_string();
    let id = short_id(
        "lint",
        &[&num, h.check.name(), &h.module, &file, &line, &col, &h.lhsexpr, signal],
    );
    LintViolation {
        id,
        check: h.check,
        cwe,
        module: h.module.clone(),
        file,
        line_no: h.span.line_start,
        statement: h.statement.clone(),
        lhsexpr: h.lhsexpr.clone(),
        security_sensitive_signal: signal.to_string(),
        span: h.span.clone(),
    }
}

/// All mapped checks for `cwe` over `units`, filtered by `assets` and
/// ordered by (file, line, check, column).
pub fn run_lint_strategy(
    cwe: CweId,
    units: &[&DesignUnit],
    assets: &IndexSet<String>,
) -> Result<(Vec<LintViolation>, Vec<Diagnostic>), LintError> {
    if cwe.strategy() != Strategy::Lint {
        return Err(LintError::NotLintCwe(cwe.number()));
    }
    let library: ModuleLibrary = units.iter().map(|u| (u.name.as_str(), *u)).collect();
    let mut hits = Vec::new();
    for unit in units {
        for &check in checks_for(cwe) {
            hits.extend(run_check_with(check, unit, &library));
        }
    }
    let (mut violations, diags) = filter_by_assets(cwe, &hits, assets);
    sort_violations(&mut violations);
    Ok((violations, diags))
}

pub fn sort_violations(v: &mut [LintViolation]) {
    v.sort_by(|a, b| {
        (&a.file, a.line_no, a.check, a.span.col_start, &a.id).cmp(&(
            &b.file,
            b.line_no,
            b.check,
            b.span.col_start,
            &b.id,
        ))
    });
}
