// SPDX-License-Identifier: Apache-2.0

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::LlmError;
use crate::assertion::{AssetSet, ClockSense, LockBitAsset, LockPair, LockProtectionAssets, PrivilegeAsset};
use crate::diag::{DiagCode, Diagnostic, Severity};
use crate::verilog::parse_expr;
use crate::CweId;

const NO_EXPLANATION: &str = "(no explanation provided)";

/// One contextualization decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub insecure: bool,
    pub explanation: String,
}

/// Pull a JSON value out of a model reply: the whole text, a fenced block,
/// or the outermost braces.
pub fn extract_json(text: &str) -> Result<Value, LlmError> {
    let t = text.trim();
    if let Ok(v) = serde_json::from_str(t) {
        return Ok(v);
    }
    if let Some(start) = t.find("```") {
        let body = &t[start + 3..];
        let body = body.strip_prefix("json").unwrap_or(body);
        if let Some(end) = body.find("```") {
            if let Ok(v) = serde_json::from_str(body[..end].trim()) {
                return Ok(v);
            }
        }
    }
    if let (Some(a), Some(b)) = (t.find('{'), t.rfind('}')) {
        if a < b {
            if let Ok(v) = serde_json::from_str(&t[a..=b]) {
                return Ok(v);
            }
        }
    }
    let head: String = t.chars().take(80).collect();
    Err(LlmError::NotJson(head))
}

fn schema_err(cwe: CweId, detail: impl Into<String>) -> LlmError {
    LlmError::Schema {
        schema: format!("cwe{}_assets", cwe.number()),
        detail: detail.into(),
    }
}

fn invalid(what: &str, text: &str) -> Diagnostic {
    Diagnostic::warning(
        DiagCode::InvalidAsset,
        format!("dropped {what} '{text}': not a Verilog expression"),
    )
}

/// Trimmed text if it parses as an expression.
fn expr_field(item: &Map<String, Value>, keys: &[&str]) -> Option<String> {
    let s = keys.iter().find_map(|k| item.get(*k)?.as_str())?.trim();
    (!s.is_empty() && parse_expr(s).is_ok()).then(|| s.to_string())
}

fn str_field(obj: &Map<String, Value>, key: &str, cwe: CweId) -> Result<String, LlmError> {
    obj.get(key)
        .and_then(Value::as_str)
        .map(|s| s.trim().to_string())
        .ok_or_else(|| schema_err(cwe, format!("missing string '{key}'")))
}

fn clock(obj: &Map<String, Value>, cwe: CweId) -> Result<(String, ClockSense), LlmError> {
    let clk = str_field(obj, "clk", cwe)?;
    let sense = str_field(obj, "clk_sense", cwe)?
        .parse::<ClockSense>()
        .map_err(|e| schema_err(cwe, e))?;
    Ok((clk, sense))
}

fn entries<'a>(obj: &'a Map<String, Value>, key: &str, cwe: CweId) -> Result<&'a Vec<Value>, LlmError> {
    obj.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| schema_err(cwe, format!("missing array '{key}'")))
}

fn signal_list(
    obj: &Map<String, Value>,
    key: &str,
    cwe: CweId,
    diags: &mut Vec<Diagnostic>,
) -> Result<Vec<String>, LlmError> {
    let mut out = Vec::new();
    for v in entries(obj, key, cwe)? {
        let Some(s) = v.as_str().map(str::trim) else {
            diags.push(invalid("signal", &v.to_string()));
            continue;
        };
        if s.is_empty() || parse_expr(s).is_err() {
            diags.push(invalid("signal", s));
        } else {
            out.push(s.to_string());
        }
    }
    Ok(out)
}

/// Parse an asset-identification reply into an [`AssetSet`]. Entries that
/// are not usable expressions are dropped with an `InvalidAsset`
/// diagnostic; a reply missing required keys is an error.
pub fn parse_asset_response(cwe: CweId, text: &str) -> Result<(AssetSet, Vec<Diagnostic>), LlmError> {
    let v = extract_json(text)?;
    let top = v
        .as_object()
        .ok_or_else(|| schema_err(cwe, "top level is not an object"))?;
    let mut diags = Vec::new();
    // Assertion CWEs may or may not wrap their fields.
    let root = top
        .get("relevant-signals")
        .or_else(|| top.get("relevant_signals"))
        .and_then(Value::as_object)
        .unwrap_or(top);
    let set = match cwe {
        CweId::Cwe1191 => AssetSet::Cwe1191 {
            access_control_related_signals: signal_list(top, "access_control_related_signals", cwe, &mut diags)?,
        },
        CweId::Cwe1300 => AssetSet::Cwe1300 {
            side_channel_related_signals: signal_list(top, "side_channel_related_signals", cwe, &mut diags)?,
        },
        CweId::Cwe1231 => {
            let (clk, clk_sense) = clock(root, cwe)?;
            let mut lock_signals = Vec::new();
            for item in entries(root, "lock_signals_info", cwe)? {
                let Some(o) = item.as_object() else {
                    diags.push(invalid("lock entry", &item.to_string()));
                    continue;
                };
                let lock = expr_field(o, &["lock_signal"]);
                let cond = expr_field(o, &["conditions_for_lock_modification", "conditions_for_stable_lock"]);
                match (lock, cond) {
                    (Some(lock_signal), Some(conditions_for_lock_modification)) => lock_signals.push(LockBitAsset {
                        lock_signal,
                        conditions_for_lock_modification,
                        clk: clk.clone(),
                        clk_sense,
                    }),
                    _ => diags.push(invalid("lock entry", &item.to_string())),
                }
            }
            AssetSet::Cwe1231 { lock_signals }
        }
        CweId::Cwe1233 => {
            let (clk, clk_sense) = clock(root, cwe)?;
            let reset_conditions = str_field(root, "reset_conditions", cwe)?;
            let mut pairs = Vec::new();
            for item in entries(root, "security_sensitive_signals_info", cwe)? {
                let o = item.as_object();
                let lock = o.and_then(|o| expr_field(o, &["lock_signal"]));
                let reg = o.and_then(|o| expr_field(o, &["security_sensitive_signal"]));
                match (lock, reg) {
                    (Some(lock_signal), Some(security_sensitive_signal)) => pairs.push(LockPair {
                        lock_signal,
                        security_sensitive_signal,
                    }),
                    _ => diags.push(invalid("lock pair", &item.to_string())),
                }
            }
            AssetSet::Cwe1233(LockProtectionAssets {
                pairs,
                reset_conditions,
                clk,
                clk_sense,
            })
        }
        CweId::Cwe1244 => {
            let (clk, clk_sense) = clock(root, cwe)?;
            let reset_conditions = str_field(root, "reset_conditions", cwe)?;
            let mut privilege_signals = Vec::new();
            for item in entries(root, "privilege_signals_info", cwe)? {
                let o = item.as_object();
                let f = |k: &str| o.and_then(|o| expr_field(o, &[k]));
                match (
                    f("privilege_signal"),
                    f("conditions_for_privilege_escalation"),
                    f("high_privilege"),
                    f("previous_privilege"),
                ) {
                    (Some(p), Some(c), Some(h), Some(prev)) => privilege_signals.push(PrivilegeAsset {
                        privilege_signal: p,
                        conditions_for_privilege_escalation: c,
                        reset_conditions: reset_conditions.clone(),
                        high_privilege: h,
                        previous_privilege: prev,
                        clk: clk.clone(),
                        clk_sense,
                    }),
                    _ => diags.push(invalid("privilege entry", &item.to_string())),
                }
            }
            AssetSet::Cwe1244 { privilege_signals }
        }
    };
    Ok((set, diags))
}

fn verdict_of(item: &Value, fallback_id: Option<&str>) -> Result<Verdict, String> {
    let o = item.as_object().ok_or("verdict is not an object")?;
    let id = match o.get("id").and_then(Value::as_str) {
        Some(s) => s.trim().to_string(),
        None => fallback_id.ok_or("verdict without an id")?.to_string(),
    };
    let insecure = match o.get("insecure") {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => true,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => false,
        _ => return Err(format!("verdict '{id}' has no boolean 'insecure'")),
    };
    let explanation = o
        .get("explanation")
        .and_then(Value::as_str)
        .unwrap_or("")
        .trim()
        .to_string();
    Ok(Verdict {
        id,
        insecure,
        explanation,
    })
}

/// Parse a contextualization reply against the ids that were asked about.
/// The result holds one verdict per id, in `ids` order; ids without an
/// answer count as not insecure.
pub fn parse_context_response(text: &str, ids: &[String]) -> Result<(Vec<Verdict>, Vec<Diagnostic>), LlmError> {
    let schema = |detail: String| LlmError::Schema {
        schema: "contextualization".into(),
        detail,
    };
    let v = extract_json(text)?;
    let single = (ids.len() == 1).then(|| ids[0].as_str());
    let raw: Vec<Verdict> = match &v {
        Value::Object(o) if o.contains_key("results") => o["results"]
            .as_array()
            .ok_or_else(|| schema("'results' is not an array".into()))?
            .iter()
            .map(|i| verdict_of(i, single))
            .collect::<Result<_, _>>()
            .map_err(schema)?,
        Value::Object(o) if o.contains_key("insecure") && single.is_some() => {
            vec![verdict_of(&v, single).map_err(schema)?]
        }
        _ => return Err(schema("missing 'results'".into())),
    };
    let mut diags = Vec::new();
    let mut by_id: IndexMap<String, Verdict> = IndexMap::new();
    for r in raw {
        if !ids.contains(&r.id) {
            diags.push(Diagnostic::warning(
                DiagCode::UnknownVerdict,
                format!("verdict for unknown id '{}' ignored", r.id),
            ));
        } else if by_id.contains_key(&r.id) {
            diags.push(Diagnostic::new(
                Severity::Info,
                DiagCode::UnknownVerdict,
                format!("repeated verdict for '{}' ignored", r.id),
            ));
        } else {
            by_id.insert(r.id.clone(), r);
        }
    }
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        match by_id.shift_remove(id) {
            Some(mut v) => {
                if v.insecure && v.explanation.is_empty() {
                    diags.push(Diagnostic::warning(
                        DiagCode::MissingExplanation,
                        format!("'{id}' marked insecure without an explanation"),
                    ));
                    v.explanation = NO_EXPLANATION.into();
                }
                out.push(v);
            }
            None => {
                diags.push(Diagnostic::warning(
                    DiagCode::MissingVerdict,
                    format!("no verdict for '{id}'; treated as not insecure"),
                ));
                out.push(Verdict {
                    id: id.clone(),
                    insecure: false,
                    explanation: String::new(),
                });
            }
        }
    }
    Ok((out, diags))
}
