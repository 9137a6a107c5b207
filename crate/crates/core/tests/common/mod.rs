// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rtlscan_core::checker::CheckerConfig;
use rtlscan_core::lint::{run_check_with, CheckId, ModuleLibrary};
use rtlscan_core::llm::{Catalog, FixtureStore, ProviderConfig, ReplayProvider};
use rtlscan_core::pipeline::{run_scan, ContextMode, ScanConfig, ScanOutcome};
use rtlscan_core::verilog::parse_str;
use rtlscan_core::{CweId, Variation};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// The shipped example corpus: RTL, manifests, replay fixtures, labels.
pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub const MODEL: &str = "scripted";

pub fn replay_config(manifest: &str, cwes: &[CweId], variation: Variation) -> ScanConfig {
    let corpus = corpus_dir();
    ScanConfig {
        manifest: corpus.join(manifest),
        cwes: cwes.to_vec(),
        variation,
        provider: ProviderConfig::replay(MODEL, corpus.join("fixtures")),
        checker: CheckerConfig::default(),
        emit_sva: false,
        dump_vcd: false,
        context: ContextMode::Module,
        deterministic: true,
        jobs: 0,
    }
}

/// Scan a corpus manifest against the shipped fixtures.
pub fn replay_scan(manifest: &str, cwes: &[CweId], variation: Variation) -> ScanOutcome {
    let cfg = replay_config(manifest, cwes, variation);
    let provider = ReplayProvider::new(FixtureStore::new(corpus_dir().join("fixtures")), MODEL);
    run_scan(&cfg, &provider, &Catalog::builtin()).expect("scan")
}

/// One line of the published results summary.
pub struct PublishedRow {
    /// `None` for the grand total.
    pub cwe: Option<CweId>,
    /// `None` for total rows.
    pub variation: Option<Variation>,
    pub flagged: u64,
    pub tps: u64,
    pub precision: String,
    pub fdr: String,
    pub assets: u64,
    pub assertions: Option<u64>,
}

pub fn published_summary() -> Vec<PublishedRow> {
    let text = std::fs::read_to_string(data_dir().join("metrics/published_summary.csv")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 8, "{l}");
            PublishedRow {
                cwe: (f[0] != "all").then(|| f[0].parse().unwrap()),
                variation: (f[1] != "total").then(|| f[1].parse().unwrap()),
                flagged: f[2].parse().unwrap(),
                tps: f[3].parse().unwrap(),
                precision: f[4].into(),
                fdr: f[5].into(),
                assets: f[6].parse().unwrap(),
                assertions: (f[7] != "-").then(|| f[7].parse().unwrap()),
            }
        })
        .collect()
}

/// A template binding and the SVA text it must render to.
#[derive(serde::Deserialize)]
pub struct SvaCase {
    pub name: String,
    pub design: String,
    pub assets: rtlscan_core::assertion::AssetSet,
    pub expected: String,
}

pub fn sva_cases() -> Vec<SvaCase> {
    let path = data_dir().join("sva/cases.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// One labeled lint snippet.
pub struct Snippet {
    pub name: String,
    pub source: String,
    pub expected: BTreeSet<CheckId>,
}

pub fn lint_corpus() -> Vec<Snippet> {
    let mut paths: Vec<_> = std::fs::read_dir(data_dir().join("lint"))
        .expect("lint corpus dir")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "v"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let source = std::fs::read_to_string(&p).unwrap();
            let header = source.lines().next().unwrap_or_default();
            let labels = header
                .strip_prefix("// expect:")
                .unwrap_or_else(|| panic!("{} lacks an expect header", p.display()))
                .trim();
            let expected = if labels == "none" {
                BTreeSet::new()
            } else {
                labels
                    .split(',')
                    .map(|s| CheckId::from_name(s.trim()).unwrap_or_else(|| panic!("bad label {s}")))
                    .collect()
            };
            Snippet {
                name: p.file_stem().unwrap().to_string_lossy().into_owned(),
                source,
                expected,
            }
        })
        .collect()
}

/// Every check that fires anywhere in `source`.
pub fn checks_fired(name: &str, source: &str) -> BTreeSet<CheckId> {
    let out = parse_str(source, &format!("{name}.v"));
    let library: ModuleLibrary = out.units.iter().map(|u| (u.name.as_str(), u)).collect();
    let mut fired = BTreeSet::new();
    for u in &out.units {
        for c in CheckId::ALL {
            if !run_check_with(c, u, &library).is_empty() {
                fired.insert(c);
            }
        }
    }
    fired
}
