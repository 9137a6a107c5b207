// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;
use serde_json::json;

use super::config::{load_manifest, ContextMode, Design, ScanConfig};
use super::report::{
    Artifact, AssertionRecord, FindingRecord, InputDigest, Site, StageName, UnitError, UnitReport, REPORT_VERSION,
};
use super::{PipelineError, ScanReport};
use crate::assertion::{populate_assertions, render_sva_file, PopulatedAssertion};
use crate::checker::{check_assertions, elaborate, render_vcd, CheckStatus};
use crate::diag::DiagCode;
use crate::digest::sha256_hex;
use crate::lint::run_lint_strategy;
use crate::llm::{
    build_asset_prompt, build_contextualization_prompt, build_rethink_prompt, canonical_json, parse_asset_response,
    parse_context_response, Catalog, Finding, FixtureStore, LlmError, PromptBundle, Provenance, Provider, SaOutputs,
};
use crate::verilog::DesignUnit;
use crate::{CweId, Diagnostic, Severity, Strategy};

/// A finished scan and the extra files it asked for.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub report: ScanReport,
    pub artifacts: Vec<Artifact>,
}

struct Ctx<'a> {
    cfg: &'a ScanConfig,
    provider: &'a dyn Provider,
    catalog: &'a Catalog,
    units: Vec<&'a DesignUnit>,
}

fn ms(t: Instant, deterministic: bool) -> u64 {
    if deterministic {
        0
    } else {
        t.elapsed().as_millis() as u64
    }
}

fn config_digest(cfg: &ScanConfig) -> String {
    let v = json!({
        "cwes": cfg.cwes,
        "variation": cfg.variation,
        "provider": cfg.provider.provider,
        "model": cfg.provider.model,
        "temperature": cfg.provider.temperature,
        "checker": cfg.checker,
        "context": cfg.context,
        "emit_sva": cfg.emit_sva,
        "dump_vcd": cfg.dump_vcd,
    });
    sha256_hex(canonical_json(&v).as_bytes())
}

fn rtl_for(unit: &DesignUnit, mode: ContextMode) -> &str {
    let text = &unit.source.text;
    match mode {
        ContextMode::WholeFile => text,
        ContextMode::Module => text.get(unit.span.start..unit.span.end).unwrap_or(text),
    }
}

impl Ctx<'_> {
    fn digest(&self, b: &PromptBundle) -> String {
        FixtureStore::digest(b, self.provider.model())
    }

    /// First contextualization turn plus the rethink turn when the variation
    /// asks for it. Returns the final reply and the digest of its prompt.
    fn contextualize(&self, cwe: CweId, rtl: &str, sa: &SaOutputs) -> Result<Option<(String, String)>, LlmError> {
        let v = self.cfg.variation;
        let Some(first) = build_contextualization_prompt(self.catalog, cwe, v, rtl, sa)? else {
            return Ok(None);
        };
        let reply = self.provider.complete(&first)?;
        if !v.uses_rethink() {
            return Ok(Some((reply.to_string(), self.digest(&first))));
        }
        let second = build_rethink_prompt(&first, &reply, sa)?;
        let reply = self.provider.complete(&second)?;
        Ok(Some((reply.to_string(), self.digest(&second))))
    }

    fn scan_unit(&self, cwe: CweId, unit: &DesignUnit) -> (UnitReport, Vec<Artifact>) {
        let det = self.cfg.deterministic;
        let mut r = UnitReport::new(cwe, &unit.name, &unit.source.path);
        let mut artifacts = Vec::new();
        let rtl = rtl_for(unit, self.cfg.context);
        let fail = |r: &mut UnitReport, stage, e: &dyn std::fmt::Display| {
            r.error = Some(UnitError {
                stage,
                message: e.to_string(),
            });
            r.settle_counts();
        };

        // Asset identification.
        let t = Instant::now();
        let asked = build_asset_prompt(self.catalog, cwe, self.cfg.variation, rtl).and_then(|b| {
            let reply = self.provider.complete(&b)?;
            Ok((self.digest(&b), parse_asset_response(cwe, &reply.to_string())?))
        });
        r.timings.asset_id_ms = ms(t, det);
        let (asset_digest, (assets, diags)) = match asked {
            Ok(x) => x,
            Err(e) => {
                fail(&mut r, StageName::AssetId, &e);
                return (r, artifacts);
            }
        };
        r.diagnostics.extend(diags);
        r.assets_identified = assets.entry_count();
        if assets.is_empty() {
            r.diagnostics.push(Diagnostic::new(
                Severity::Info,
                DiagCode::EmptyAssets,
                format!("no CWE-{cwe} assets identified in {}", unit.name),
            ));
        }

        // Static analysis.
        let t = Instant::now();
        let mut populated: Vec<PopulatedAssertion> = Vec::new();
        let sa = match cwe.strategy() {
            Strategy::Lint => {
                let names = assets.signal_names();
                match run_lint_strategy(cwe, &self.units, &names) {
                    Ok((v, d)) => {
                        r.violations = v.into_iter().filter(|x| x.module == unit.name).collect();
                        r.diagnostics.extend(d);
                    }
                    Err(e) => {
                        fail(&mut r, StageName::StaticAnalysis, &e);
                        return (r, artifacts);
                    }
                }
                SaOutputs::from_violations(&r.violations)
            }
            Strategy::Assertion => {
                let (a, d) = populate_assertions(&assets, unit);
                r.diagnostics.extend(d);
                populated = a;
                let results = check_assertions(unit, &populated, &self.cfg.checker);
                r.assertions = populated
                    .iter()
                    .zip(results)
                    .map(|(a, res)| AssertionRecord {
                        id: a.id.clone(),
                        sva: a.sva_text.clone(),
                        status: res.status,
                    })
                    .collect();
                SaOutputs::from_falsified(populated.iter().zip(r.assertions.iter().map(|x| &x.status)))
            }
        };
        r.assertions_formed = populated.len();
        r.sa_outputs = sa.items.len();
        r.assets = Some(assets);
        r.timings.static_analysis_ms = ms(t, det);
        self.artifacts(cwe, unit, &populated, &r.assertions, &mut artifacts, &mut r.diagnostics);

        // Contextualization.
        let t = Instant::now();
        let ids = sa.ids();
        let verdicts = self.contextualize(cwe, rtl, &sa).and_then(|reply| {
            reply
                .map(|(text, digest)| parse_context_response(&text, &ids).map(|v| (v, digest)))
                .transpose()
        });
        r.timings.contextualization_ms = ms(t, det);
        let (verdicts, context_digest) = match verdicts {
            Ok(Some(((v, d), digest))) => {
                r.diagnostics.extend(d);
                (v, digest)
            }
            Ok(None) => (Vec::new(), String::new()),
            Err(e) => {
                fail(&mut r, StageName::Contextualization, &e);
                return (r, artifacts);
            }
        };
        let provenance = Provenance {
            asset_prompt_digest: asset_digest,
            context_prompt_digest: context_digest,
            provider: self.provider.name().into(),
            model: self.provider.model().into(),
        };
        for v in verdicts {
            let site = match cwe.strategy() {
                Strategy::Lint => r.violations.iter().find(|x| x.id == v.id).map(|x| Site::Violation {
                    check: x.check.name().into(),
                    line_no: x.line_no,
                    statement: x.statement.clone(),
                    lhsexpr: x.lhsexpr.clone(),
                    security_sensitive_signal: x.security_sensitive_signal.clone(),
                }),
                Strategy::Assertion => r
                    .assertions
                    .iter()
                    .find(|x| x.id == v.id)
                    .and_then(|x| match &x.status {
                        CheckStatus::Falsified { cycle, .. } => Some(Site::Property {
                            assertion: x.sva.clone(),
                            failing_cycle: *cycle,
                        }),
                        _ => None,
                    }),
            };
            let Some(site) = site else { continue };
            r.findings.push(FindingRecord {
                finding: Finding {
                    cwe,
                    source: v.id,
                    explanation: if v.insecure { v.explanation } else { String::new() },
                    insecure: v.insecure,
                    variation: self.cfg.variation,
                    provenance: provenance.clone(),
                },
                site,
            });
        }
        r.settle_counts();
        (r, artifacts)
    }

    fn artifacts(
        &self,
        cwe: CweId,
        unit: &DesignUnit,
        populated: &[PopulatedAssertion],
        records: &[AssertionRecord],
        out: &mut Vec<Artifact>,
        diags: &mut Vec<Diagnostic>,
    ) {
        if self.cfg.emit_sva && !populated.is_empty() {
            out.push(Artifact {
                path: PathBuf::from(format!("sva/{}_cwe{}.sv", unit.name, cwe.number())),
                contents: render_sva_file(populated, unit),
            });
        }
        if !self.cfg.dump_vcd {
            return;
        }
        let falsified: Vec<_> = records
            .iter()
            .filter_map(|a| match &a.status {
                CheckStatus::Falsified { trace, .. } => Some((a, trace)),
                _ => None,
            })
            .collect();
        if falsified.is_empty() {
            return;
        }
        let model = match elaborate(unit) {
            Ok(m) => m,
            Err(e) => {
                diags.push(Diagnostic::warning(
                    DiagCode::SkippedConstruct,
                    format!("no waveform: {e}"),
                ));
                return;
            }
        };
        for (a, trace) in falsified {
            match render_vcd(&model, trace) {
                Ok(text) => out.push(Artifact {
                    path: PathBuf::from(format!("vcd/{}_{}.vcd", unit.name, a.id)),
                    contents: text,
                }),
                Err(e) => diags.push(Diagnostic::warning(
                    DiagCode::SkippedConstruct,
                    format!("no waveform for {}: {e}", a.id),
                )),
            }
        }
    }
}

/// Run every (CWE, module) unit of an already loaded design.
pub fn scan_design(
    cfg: &ScanConfig,
    design: &Design,
    provider: &dyn Provider,
    catalog: &Catalog,
) -> Result<ScanOutcome, PipelineError> {
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        provider,
        catalog,
        units: design.units.iter().collect(),
    };
    let work: Vec<(CweId, &DesignUnit)> = cfg
        .cwes
        .iter()
        .flat_map(|&c| design.selected().map(move |u| (c, u)))
        .collect();
    let results = run_units(cfg.jobs, &work, |&(c, u)| ctx.scan_unit(c, u))?;

    let mut units = Vec::with_capacity(results.len());
    let mut artifacts = Vec::new();
    let mut seen = IndexMap::new();
    for (u, a) in results {
        units.push(u);
        for x in a {
            seen.entry(x.path.clone()).or_insert(x);
        }
    }
    artifacts.extend(seen.into_values());
    let generated_at =
        (!cfg.deterministic).then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let report = ScanReport {
        report_version: REPORT_VERSION,
        tool: "rtlscan".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_digest: config_digest(cfg),
        generated_at,
        manifest: cfg.manifest.display().to_string(),
        inputs: design
            .sources
            .iter()
            .map(|s| InputDigest {
                path: s.path.to_string(),
                sha256: sha256_hex(s.text.as_bytes()),
            })
            .collect(),
        variation: cfg.variation,
        provider: provider.name().into(),
        model: provider.model().into(),
        cwes: cfg.cwes.clone(),
        units,
        diagnostics: design.diagnostics.clone(),
    };
    Ok(ScanOutcome { report, artifacts })
}

/// Load the manifest named in `cfg` and scan it.
pub fn run_scan(cfg: &ScanConfig, provider: &dyn Provider, catalog: &Catalog) -> Result<ScanOutcome, PipelineError> {
    cfg.validate()?;
    let design = load_manifest(&cfg.manifest)?;
    scan_design(cfg, &design, provider, catalog)
}

#[cfg(feature = "parallel")]
fn run_units<T: Sync, R: Send>(jobs: usize, work: &[T], f: impl Fn(&T) -> R + Sync) -> Result<Vec<R>, PipelineError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| work.par_iter().map(&f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_units<T: Sync, R: Send>(_jobs: usize, work: &[T], f: impl Fn(&T) -> R + Sync) -> Result<Vec<R>, PipelineError> {
    Ok(work.iter().map(f).collect())
}
