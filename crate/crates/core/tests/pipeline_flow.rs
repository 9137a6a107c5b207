// SPDX-License-Identifier: Apache-2.0

//! End-to-end scans over the shipped corpus and replay fixtures.

mod common;

use std::sync::Arc;

use common::{corpus_dir, replay_config, replay_scan, MODEL};
use proptest::prelude::*;
use rtlscan_core::checker::{elaborate, replay_trace, CheckStatus};
use rtlscan_core::llm::{
    sa_output_key, Catalog, FixtureStore, FnProvider, LlmError, PromptBundle, Provider, ReplayProvider, Stage,
};
use rtlscan_core::pipeline::{
    load_manifest, render_summary, run_scan, scan_design, write_outputs, ScanReport, Site, StageName,
};
use rtlscan_core::verilog::parse_str;
use rtlscan_core::{CweId, Variation};
use serde_json::{json, Value};

const FIG3_PROPERTY: &str =
    "@(posedge clk_i) disable iff (~(rst_ni && ~rst_8)) reglk_ctrl_i[7] == '1 |=> $stable(core_lock_reg);";

fn squash(s: &str) -> String {
    s.split_whitespace().collect()
}

/// The serialized static-analysis outputs embedded in the last user turn.
fn sa_items(b: &PromptBundle) -> Vec<Value> {
    let key = sa_output_key(b.cwe.strategy());
    let last = b.user.last().unwrap();
    let at = last.rfind(&format!("{{\n  \"{key}\"")).expect("outputs in prompt");
    let v: Value = serde_json::Deserializer::from_str(&last[at..])
        .into_iter()
        .next()
        .unwrap()
        .unwrap();
    v[key].as_array().cloned().unwrap_or_default()
}

fn replay() -> Arc<ReplayProvider> {
    Arc::new(ReplayProvider::new(
        FixtureStore::new(corpus_dir().join("fixtures")),
        MODEL,
    ))
}

#[test]
fn fig2_lint_flow_flags_the_padded_password() {
    let out = replay_scan("fig2.json", &[CweId::Cwe1191], Variation::V0);
    let r = &out.report;
    assert_eq!(r.units.len(), 1);
    let u = &r.units[0];
    assert!(u.error.is_none(), "{:?}", u.error);
    let flagged: Vec<_> = u.findings.iter().filter(|f| f.finding.insecure).collect();
    assert_eq!(flagged.len(), 1);
    let Site::Violation {
        statement,
        lhsexpr,
        security_sensitive_signal,
        ..
    } = &flagged[0].site
    else {
        panic!("lint finding without a violation site");
    };
    assert!(statement.contains("pass_data = {{60{8'h00}}, data_d}"), "{statement}");
    assert_eq!(lhsexpr, "pass_data");
    assert_eq!(security_sensitive_signal, "pass_data");
    assert!(!flagged[0].finding.explanation.is_empty());

    let v = serde_json::to_value(flagged[0]).unwrap();
    for key in ["line_no", "statement", "lhsexpr", "security_sensitive_signal"] {
        assert!(v.get(key).is_some(), "finding JSON lacks {key}");
    }
}

#[test]
fn fig3_assertion_flow_falsifies_the_unlocked_register() {
    let out = replay_scan("fig3.json", &[CweId::Cwe1233], Variation::V0);
    let u = &out.report.units[0];
    assert!(u.error.is_none(), "{:?}", u.error);
    let rec = u
        .assertions
        .iter()
        .find(|a| squash(&a.sva) == squash(FIG3_PROPERTY))
        .expect("core_lock_reg assertion");
    let CheckStatus::Falsified { trace, cycle, .. } = &rec.status else {
        panic!("{:?}", rec.status);
    };

    // The counterexample replays on an independently elaborated model and
    // shows core_lock_reg changing while its lock bit is set.
    let src = std::fs::read_to_string(corpus_dir().join("rtl/dma_wrapper.v")).unwrap();
    let parsed = parse_str(&src, "dma_wrapper.v");
    let model = elaborate(&parsed.units[0]).unwrap();
    let vals = replay_trace(&model, trace).unwrap();
    let c = *cycle as usize;
    assert!(c >= 1 && c < vals.len());
    let slot = |n: &str| model.signal(n).unwrap().slot;
    let (lock, reg) = (slot("reglk_ctrl_i"), slot("core_lock_reg"));
    assert_eq!(vals[c - 1][lock] >> 7 & 1, 1);
    assert_ne!(vals[c - 1][reg], vals[c][reg]);

    let f = u
        .findings
        .iter()
        .find(|f| f.finding.source == rec.id)
        .expect("finding for the falsified property");
    assert!(f.finding.insecure);
    assert!(f.finding.explanation.contains("core_lock_reg"));
}

#[test]
fn empty_manifest_yields_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("empty.json");
    std::fs::write(&manifest, r#"{"name": "empty", "files": []}"#).unwrap();
    let mut cfg = replay_config("fig2.json", &CweId::ALL, Variation::V0);
    cfg.manifest = manifest;
    let out = run_scan(&cfg, replay().as_ref(), &Catalog::builtin()).unwrap();
    assert!(out.report.units.is_empty());
    assert_eq!(out.report.flagged(), 0);
}

#[test]
fn reports_round_trip_byte_for_byte() {
    for v in Variation::ALL {
        let r = replay_scan("all.json", &CweId::ALL, v).report;
        let text = r.to_json();
        let back = ScanReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), text);
    }
}

#[test]
fn deterministic_scans_are_identical() {
    let a = replay_scan("all.json", &CweId::ALL, Variation::V2).report.to_json();
    let b = replay_scan("all.json", &CweId::ALL, Variation::V2).report.to_json();
    assert_eq!(a, b);
}

#[test]
fn summary_matches_golden() {
    let cwes = [CweId::Cwe1191, CweId::Cwe1233, CweId::Cwe1300];
    let r = replay_scan("all.json", &cwes, Variation::V0).report;
    let text = render_summary(&r);
    let golden = std::fs::read_to_string(common::data_dir().join("summary/all_v0_three_cwes.txt")).unwrap();
    assert_eq!(text, golden);
    let sections = text.lines().filter(|l| l.starts_with("CWE-")).count();
    assert_eq!(sections, 3);
    assert!(text.contains("\nall CWEs\n"));
}

#[test]
fn outputs_written_with_artifacts() {
    let mut cfg = replay_config("fig3.json", &[CweId::Cwe1233], Variation::V0);
    cfg.emit_sva = true;
    cfg.dump_vcd = true;
    let out = run_scan(&cfg, replay().as_ref(), &Catalog::builtin()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &out.report, &out.artifacts).unwrap();
    let sva = std::fs::read_to_string(dir.path().join("sva/dma_wrapper_cwe1233.sv")).unwrap();
    let body = FIG3_PROPERTY.trim_end_matches(';');
    assert!(squash(&sva).contains(&squash(&format!("assert property ({body});"))));
    let vcds = std::fs::read_dir(dir.path().join("vcd")).unwrap().count();
    assert_eq!(vcds, 2);
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(report, out.report.to_json());
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn replay_miss_is_isolated_to_its_unit() {
    let full = replay_scan("fig3.json", &[CweId::Cwe1233], Variation::V0).report;
    let gone = full.units[0].findings[0]
        .finding
        .provenance
        .context_prompt_digest
        .clone();
    let dir = tempfile::tempdir().unwrap();
    for e in std::fs::read_dir(corpus_dir().join("fixtures")).unwrap() {
        let e = e.unwrap();
        if e.file_name().to_string_lossy() != format!("{gone}.json") {
            std::fs::copy(e.path(), dir.path().join(e.file_name())).unwrap();
        }
    }
    let cfg = replay_config("fig3.json", &[CweId::Cwe1231, CweId::Cwe1233], Variation::V0);
    let p = ReplayProvider::new(FixtureStore::new(dir.path()), MODEL);
    let r = run_scan(&cfg, &p, &Catalog::builtin()).unwrap().report;
    assert_eq!(r.failed_units(), 1);
    let ok = r.units.iter().find(|u| u.cwe == CweId::Cwe1231).unwrap();
    assert!(ok.error.is_none());
    let bad = r.units.iter().find(|u| u.cwe == CweId::Cwe1233).unwrap();
    let err = bad.error.as_ref().unwrap();
    assert_eq!(err.stage, StageName::Contextualization);
    assert!(
        err.message
            .contains(&format!("no replay fixture for request digest {gone}")),
        "{}",
        err.message
    );
    assert!(bad.findings.is_empty());
    assert_eq!(bad.removed_in_contextualization, bad.sa_outputs);
}

#[test]
fn unknown_model_misses_with_digest() {
    let cfg = replay_config("fig2.json", &[CweId::Cwe1191], Variation::V0);
    let p = ReplayProvider::new(FixtureStore::new(corpus_dir().join("fixtures")), "other-model");
    let r = run_scan(&cfg, &p, &Catalog::builtin()).unwrap().report;
    let err = r.units[0].error.as_ref().expect("miss");
    assert_eq!(err.stage, StageName::AssetId);
    let digest = err.message.split("digest ").nth(1).unwrap().split(';').next().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(err.message.contains("nearest stored"));
}

/// Assets from the fixtures; verdicts from `verdict`.
fn scripted(verdict: impl Fn(&PromptBundle, &Value) -> Option<(bool, String)> + Send + Sync + 'static) -> FnProvider {
    let assets = replay();
    FnProvider::new("replay", MODEL, move |b| match b.stage {
        Stage::AssetId => assets.complete(b),
        _ => {
            let results: Vec<Value> = sa_items(b)
                .iter()
                .filter_map(|item| {
                    let (insecure, why) = verdict(b, item)?;
                    Some(json!({"id": item["id"], "insecure": insecure, "explanation": why}))
                })
                .collect();
            Ok::<_, LlmError>(json!({ "results": results }))
        }
    })
}

#[test]
fn rethink_pass_overrides_first_verdicts() {
    let provider = scripted(|b, item| {
        let prop = item["assertion"].as_str().unwrap_or_default();
        let second_thoughts = b.stage == Stage::Rethink && prop.contains("$stable(end_reg)");
        Some((!second_thoughts, "written while locked".into()))
    });
    let cfg = replay_config("fig3.json", &[CweId::Cwe1233], Variation::V2);
    let design = load_manifest(&cfg.manifest).unwrap();
    let r = scan_design(&cfg, &design, &provider, &Catalog::builtin())
        .unwrap()
        .report;
    let u = &r.units[0];
    assert!(u.error.is_none(), "{:?}", u.error);
    assert_eq!(u.sa_outputs, 2);
    let insecure: Vec<&str> = u
        .findings
        .iter()
        .filter(|f| f.finding.insecure)
        .map(|f| match &f.site {
            Site::Property { assertion, .. } => assertion.as_str(),
            Site::Violation { .. } => unreachable!(),
        })
        .collect();
    assert_eq!(insecure.len(), 1);
    assert!(insecure[0].contains("core_lock_reg"));
    assert_eq!(u.removed_in_contextualization, 1);
    let cleared = u.findings.iter().find(|f| !f.finding.insecure).unwrap();
    assert!(cleared.finding.explanation.is_empty());
}

#[test]
fn all_secure_first_pass_still_rethinks() {
    let provider = scripted(|b, _| Some((b.stage == Stage::Rethink, "on reflection".into())));
    let cfg = replay_config("fig3.json", &[CweId::Cwe1233], Variation::V3);
    let design = load_manifest(&cfg.manifest).unwrap();
    let u = scan_design(&cfg, &design, &provider, &Catalog::builtin())
        .unwrap()
        .report
        .units
        .remove(0);
    assert_eq!(u.flagged, u.sa_outputs);
    assert!(u.flagged > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Count bookkeeping holds whatever the model answers, including missing
    /// and stray verdicts.
    #[test]
    fn counts_are_conserved(
        seed in any::<u64>(),
        v in prop::sample::select(Variation::ALL.to_vec()),
        cwes in prop::sample::subsequence(CweId::ALL.to_vec(), 1..=5),
    ) {
        let provider = scripted(move |_, item| {
            let id = item["id"].as_str().unwrap_or_default();
            let h = id.bytes().fold(seed, |h, c| h.rotate_left(7) ^ u64::from(c)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            match h >> 62 {
                0 => None,
                1 => Some((false, String::new())),
                _ => Some((true, if h & 1 == 0 { "reason".into() } else { String::new() })),
            }
        });
        let cfg = replay_config("all.json", &cwes, v);
        let design = load_manifest(&cfg.manifest).unwrap();
        let r = scan_design(&cfg, &design, &provider, &Catalog::builtin()).unwrap().report;
        for u in &r.units {
            prop_assert!(u.error.is_none(), "{:?}", u.error);
            let entries = u.assets.as_ref().map_or(0, |a| a.entry_count());
            prop_assert!(u.assertions_formed <= entries);
            prop_assert!(u.flagged <= u.sa_outputs);
            prop_assert_eq!(u.removed_in_contextualization, u.sa_outputs - u.flagged);
            prop_assert_eq!(u.flagged, u.findings.iter().filter(|f| f.finding.insecure).count());
            let outputs = if u.cwe.strategy() == rtlscan_core::Strategy::Lint {
                u.violations.len()
            } else {
                u.assertions.iter().filter(|a| a.status.is_falsified()).count()
            };
            prop_assert_eq!(u.sa_outputs, outputs);
            for f in &u.findings {
                prop_assert_eq!(f.finding.insecure, !f.finding.explanation.is_empty());
            }
        }
    }
}
