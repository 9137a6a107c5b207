// SPDX-License-Identifier: Apache-2.0

//! Regenerate the replay fixtures and labels of a corpus from its
//! hand-written `script.json`.
//!
//! ```text
//! cargo run -p rtlscan-core --example author_fixtures -- corpus
//! ```
//!
//! Every prompt the pipeline issues is answered from the script and stored
//! under `<corpus>/fixtures`. Fixtures not produced by this run are deleted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rtlscan_core::checker::CheckerConfig;
use rtlscan_core::llm::{
    sa_output_key, Catalog, Fixture, FixtureStore, FnProvider, PromptBundle, ProviderConfig, Stage,
};
use rtlscan_core::pipeline::{load_manifest, scan_design, ContextMode, Labels, ScanConfig};
use rtlscan_core::{CweId, Variation};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Deserialize)]
struct Script {
    model: String,
    recorded_at: u64,
    manifests: BTreeMap<String, Vec<CweId>>,
    units: Vec<Unit>,
}

#[derive(Deserialize, Clone)]
struct Unit {
    module: String,
    cwe: CweId,
    assets: Value,
    #[serde(default)]
    assets_exemplar: Option<Value>,
    #[serde(default)]
    verdicts: Vec<Rule>,
}

#[derive(Deserialize, Clone)]
struct Rule {
    #[serde(rename = "match")]
    needle: String,
    insecure: bool,
    tp: bool,
    explanation: String,
    #[serde(default)]
    rethink: Option<Answer>,
}

#[derive(Deserialize, Clone)]
struct Answer {
    insecure: bool,
    explanation: String,
}

fn empty_assets(cwe: CweId) -> Value {
    match cwe {
        CweId::Cwe1191 => json!({"access_control_related_signals": []}),
        CweId::Cwe1300 => json!({"side_channel_related_signals": []}),
        CweId::Cwe1231 => json!({"relevant-signals": {
            "lock_signals_info": [], "clk": "clk_i", "clk_sense": "posedge"}}),
        CweId::Cwe1233 => json!({"relevant-signals": {
            "security_sensitive_signals_info": [], "reset_conditions": "!rst_ni",
            "clk": "clk_i", "clk_sense": "posedge"}}),
        CweId::Cwe1244 => json!({"relevant-signals": {
            "privilege_signals_info": [], "reset_conditions": "!rst_ni",
            "clk": "clk_i", "clk_sense": "posedge"}}),
    }
}

/// The static-analysis items serialized at the end of the last user turn.
fn sa_items(b: &PromptBundle) -> Vec<Value> {
    let last = b.user.last().expect("user turn");
    let marker = if b.stage == Stage::Rethink {
        "object:\n"
    } else {
        "Here is the output:\n"
    };
    let at = last.rfind(marker).expect("outputs block") + marker.len();
    let v: Value = serde_json::from_str(&last[at..]).expect("outputs JSON");
    let key = sa_output_key(b.cwe.strategy());
    v[key].as_array().cloned().unwrap_or_default()
}

fn rule_for<'a>(unit: Option<&'a Unit>, item: &Value) -> Option<&'a Rule> {
    let text = serde_json::to_string(item).expect("item");
    unit?.verdicts.iter().find(|r| text.contains(&r.needle))
}

fn answer(unit: Option<&Unit>, b: &PromptBundle, labels: &Mutex<BTreeMap<String, bool>>) -> Value {
    match b.stage {
        Stage::AssetId => match unit {
            Some(u) if b.variation.uses_exemplar() && u.assets_exemplar.is_some() => {
                u.assets_exemplar.clone().expect("checked")
            }
            Some(u) => u.assets.clone(),
            None => empty_assets(b.cwe),
        },
        stage => {
            let results: Vec<Value> = sa_items(b)
                .iter()
                .map(|item| {
                    let id = item["id"].clone();
                    let rule = rule_for(unit, item);
                    if let (Some(r), Some(id)) = (rule, id.as_str()) {
                        labels.lock().expect("labels").insert(id.to_string(), r.tp);
                    }
                    let (insecure, explanation) = match rule {
                        Some(Rule { rethink: Some(a), .. }) if stage == Stage::Rethink => {
                            (a.insecure, a.explanation.clone())
                        }
                        Some(r) => (r.insecure, r.explanation.clone()),
                        None => (false, String::new()),
                    };
                    json!({"id": id, "insecure": insecure, "explanation": explanation})
                })
                .collect();
            json!({ "results": results })
        }
    }
}

fn main() {
    let corpus = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corpus".into()));
    let script: Script =
        serde_json::from_str(&std::fs::read_to_string(corpus.join("script.json")).expect("read script.json"))
            .expect("parse script.json");
    let store = FixtureStore::new(corpus.join("fixtures"));
    let catalog = Catalog::builtin();
    let written: Arc<Mutex<BTreeSet<String>>> = Arc::default();
    let labels: Arc<Mutex<BTreeMap<String, bool>>> = Arc::default();

    for (manifest, cwes) in &script.manifests {
        let path = corpus.join(manifest);
        let design = load_manifest(&path).expect("manifest");
        let modules: Vec<String> = design.selected().map(|u| u.name.clone()).collect();
        for variation in Variation::ALL {
            for module in &modules {
                let unit_for = |cwe: CweId| {
                    script
                        .units
                        .iter()
                        .find(|u| &u.module == module && u.cwe == cwe)
                        .cloned()
                };
                let table: BTreeMap<CweId, Option<Unit>> = cwes.iter().map(|&c| (c, unit_for(c))).collect();
                let (store2, written2, labels2) = (store.clone(), written.clone(), labels.clone());
                let (model, at) = (script.model.clone(), script.recorded_at);
                let provider = FnProvider::new("replay", &script.model, move |b| {
                    let response = answer(table[&b.cwe].as_ref(), b, &labels2);
                    let request = FixtureStore::request_value(b, &model);
                    let digest = FixtureStore::digest_of(&request);
                    store2
                        .save(&Fixture {
                            digest: digest.clone(),
                            request,
                            response: response.clone(),
                            model: model.clone(),
                            timestamp: at,
                        })
                        .expect("save fixture");
                    written2.lock().expect("set").insert(digest);
                    Ok(response)
                });
                let mut single = design.clone();
                single.manifest.modules = vec![module.clone()];
                let cfg = ScanConfig {
                    manifest: path.clone(),
                    cwes: cwes.clone(),
                    variation,
                    provider: ProviderConfig::replay(&script.model, store.dir.clone()),
                    checker: CheckerConfig::default(),
                    emit_sva: false,
                    dump_vcd: false,
                    context: ContextMode::Module,
                    deterministic: true,
                    jobs: 1,
                };
                let out = scan_design(&cfg, &single, &provider, &catalog).expect("scan");
                if let Some(u) = out.report.units.iter().find(|u| u.error.is_some()) {
                    panic!("{} CWE-{} {variation}: {:?}", u.module, u.cwe, u.error);
                }
            }
        }
    }

    let keep = written.lock().expect("set").clone();
    let mut removed = 0;
    for f in store.list().expect("list") {
        if !keep.contains(&f.digest) {
            std::fs::remove_file(store.dir.join(format!("{}.json", f.digest))).expect("remove");
            removed += 1;
        }
    }
    let labels = Labels {
        version: 1,
        labels: labels.lock().expect("labels").clone(),
    };
    let text = serde_json::to_string_pretty(&labels).expect("labels") + "\n";
    std::fs::write(corpus.join("labels.json"), text).expect("write labels");
    println!(
        "{} fixtures, {removed} stale removed, {} labels",
        keep.len(),
        labels.labels.len()
    );
}
