// SPDX-License-Identifier: Apache-2.0

use serde_json::{json, Value};

use super::{Catalog, LlmError, PromptBundle, Stage};
use crate::assertion::PopulatedAssertion;
use crate::checker::CheckStatus;
use crate::lint::LintViolation;
use crate::{CweId, Strategy, Variation};

/// Singular noun for one static-analysis output of `strategy`.
pub fn sa_output_noun(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Lint => "violation",
        Strategy::Assertion => "falsified property",
    }
}

/// JSON key under which outputs of `strategy` are listed.
pub fn sa_output_key(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Lint => "relevant_violations",
        Strategy::Assertion => "falsified_properties",
    }
}

/// Static-analysis outputs handed to contextualization. Every item carries
/// an `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaOutputs {
    pub strategy: Strategy,
    pub items: Vec<Value>,
}

impl SaOutputs {
    pub fn from_violations(v: &[LintViolation]) -> SaOutputs {
        SaOutputs {
            strategy: Strategy::Lint,
            items: v
                .iter()
                .map(|x| {
                    json!({
                        "id": x.id,
                        "check": x.check.name(),
                        "line_no": x.line_no,
                        "statement": x.statement,
                        "lhsexpr": x.lhsexpr,
                        "security_sensitive_signal": x.security_sensitive_signal,
                    })
                })
                .collect(),
        }
    }

    /// Falsified assertions with their counterexamples; other statuses are
    /// skipped.
    pub fn from_falsified<'a>(
        results: impl IntoIterator<Item = (&'a PopulatedAssertion, &'a CheckStatus)>,
    ) -> SaOutputs {
        let items = results
            .into_iter()
            .filter_map(|(a, st)| match st {
                CheckStatus::Falsified { trace, cycle, .. } => Some(json!({
                    "id": a.id,
                    "assertion": a.sva_text,
                    "failing_cycle": cycle,
                    "counterexample": trace.cycles,
                })),
                _ => None,
            })
            .collect();
        SaOutputs {
            strategy: Strategy::Assertion,
            items,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.items
            .iter()
            .filter_map(|i| i["id"].as_str().map(String::from))
            .collect()
    }

    /// `{"<key>": [...]}`, pretty-printed.
    pub fn to_json(&self) -> String {
        let v = json!({ sa_output_key(self.strategy): self.items });
        serde_json::to_string_pretty(&v).expect("values serialize")
    }
}

fn system_prompt(catalog: &Catalog, cwe: CweId) -> String {
    format!(
        "You are a hardware security expert. Your task is to analyze Verilog code for potential CWE-{cwe} bugs. CWE-{cwe} is {}.",
        catalog.entry(cwe).description
    )
}

fn exemplar_block(catalog: &Catalog, cwe: CweId, variation: Variation) -> Result<String, LlmError> {
    if !variation.uses_exemplar() {
        return Ok(String::new());
    }
    let ex = catalog
        .entry(cwe)
        .exemplar
        .as_ref()
        .ok_or(LlmError::MissingExemplar(cwe.number()))?;
    Ok(format!(
        "Here is an example of CWE-{cwe} with code from the {}:\n\"\"\"\n{}\n\"\"\"\n{}\n{}\n\n",
        ex.module, ex.code, ex.explanation, ex.assets
    ))
}

/// Asset-identification prompt. `v2` matches `v0`; `v1`/`v3` prepend the
/// exemplar.
pub fn build_asset_prompt(
    catalog: &Catalog,
    cwe: CweId,
    variation: Variation,
    rtl: &str,
) -> Result<PromptBundle, LlmError> {
    let e = catalog.entry(cwe);
    let user = format!(
        "{}What are the {}? {}\n{rtl}",
        exemplar_block(catalog, cwe, variation)?,
        e.relevant_signals,
        e.typical_nature
    );
    Ok(PromptBundle {
        cwe,
        variation,
        stage: Stage::AssetId,
        system: system_prompt(catalog, cwe),
        user: vec![user],
        assistant: Vec::new(),
        schema_name: format!("cwe{}_assets", cwe.number()),
        schema: catalog.asset_schema(cwe).clone(),
    })
}

/// First contextualization turn, or `None` when there is nothing to judge.
pub fn build_contextualization_prompt(
    catalog: &Catalog,
    cwe: CweId,
    variation: Variation,
    rtl: &str,
    sa: &SaOutputs,
) -> Result<Option<PromptBundle>, LlmError> {
    if sa.is_empty() {
        return Ok(None);
    }
    let noun = sa_output_noun(sa.strategy);
    let plural = sa_output_key(sa.strategy).replace('_', " ");
    let user = format!(
        "{}Consider the following Verilog code:\n{rtl}\nFor each of the {plural}, determine whether the {noun} poses a security issue pertaining to CWE-{cwe} and provide an explanation if that is the case. If the {noun} does not pose a security issue, no explanation is needed. Here is the output:\n{}",
        exemplar_block(catalog, cwe, variation)?,
        sa.to_json()
    );
    Ok(Some(PromptBundle {
        cwe,
        variation,
        stage: Stage::Contextualization,
        system: system_prompt(catalog, cwe),
        user: vec![user],
        assistant: Vec::new(),
        schema_name: "contextualization".into(),
        schema: catalog.context_schema().clone(),
    }))
}

/// Second contextualization turn: the first exchange as transcript plus the
/// re-evaluation instruction.
pub fn build_rethink_prompt(
    first: &PromptBundle,
    first_response: &Value,
    sa: &SaOutputs,
) -> Result<PromptBundle, LlmError> {
    if !first.variation.uses_rethink() {
        return Err(LlmError::NoRethink(first.variation));
    }
    let noun = sa_output_noun(sa.strategy);
    let turn = format!(
        "Go over the previously provided response and reason about the provided explanation for each {noun}. Only categorize the {noun} as insecure if you are confident in your assessment. Here is the `{}' object:\n{}",
        sa_output_key(sa.strategy),
        sa.to_json()
    );
    let mut b = first.clone();
    b.stage = Stage::Rethink;
    b.assistant = vec![serde_json::to_string(first_response).expect("values serialize")];
    b.user.push(turn);
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RTL: &str = "module m(input a, output y);\n  assign y = a;\nendmodule\n";

    fn lint_sa() -> SaOutputs {
        SaOutputs {
            strategy: Strategy::Lint,
            items: vec![json!({"id": "lint_1", "line_no": 2})],
        }
    }

    #[test]
    fn asset_prompt_shape() {
        let c = Catalog::builtin();
        let b = build_asset_prompt(&c, CweId::Cwe1191, Variation::V0, RTL).unwrap();
        assert!(b.system.starts_with("You are a hardware security expert."));
        assert!(b.system.contains("potential CWE-1191 bugs"));
        assert!(b.user[0].starts_with("What are the access control related signals?"));
        assert!(b.user[0].ends_with(RTL));
        assert_eq!(b.schema["required"][0], "access_control_related_signals");
    }

    #[test]
    fn exemplar_only_for_v1_and_v3() {
        let c = Catalog::builtin();
        let v0 = build_asset_prompt(&c, CweId::Cwe1231, Variation::V0, RTL).unwrap();
        let v1 = build_asset_prompt(&c, CweId::Cwe1231, Variation::V1, RTL).unwrap();
        assert!(v1.user[0].starts_with("Here is an example of CWE-1231 with code from the register locks module:"));
        assert!(v1.user[0].ends_with(&v0.user[0]));
        assert_eq!(v1.system, v0.system);
        let v2 = build_asset_prompt(&c, CweId::Cwe1231, Variation::V2, RTL).unwrap();
        assert_eq!(v2.user, v0.user);
    }

    #[test]
    fn missing_exemplar_is_an_error() {
        let c = Catalog::builtin().without_exemplar(CweId::Cwe1300);
        assert!(build_asset_prompt(&c, CweId::Cwe1300, Variation::V0, RTL).is_ok());
        assert!(matches!(
            build_asset_prompt(&c, CweId::Cwe1300, Variation::V3, RTL),
            Err(LlmError::MissingExemplar(1300))
        ));
    }

    #[test]
    fn empty_outputs_short_circuit() {
        let c = Catalog::builtin();
        let sa = SaOutputs {
            strategy: Strategy::Lint,
            items: vec![],
        };
        assert!(
            build_contextualization_prompt(&c, CweId::Cwe1191, Variation::V0, RTL, &sa)
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn rethink_appends_turn_and_transcript() {
        let c = Catalog::builtin();
        let sa = lint_sa();
        let first = build_contextualization_prompt(&c, CweId::Cwe1300, Variation::V2, RTL, &sa)
            .unwrap()
            .unwrap();
        assert!(first.user[0].contains("\"relevant_violations\""));
        let resp = json!({"results": [{"id": "lint_1", "insecure": true, "explanation": "x"}]});
        let second = build_rethink_prompt(&first, &resp, &sa).unwrap();
        assert_eq!(second.user.len(), 2);
        assert_eq!(second.user[0], first.user[0]);
        assert!(second.user[1].starts_with("Go over the previously provided response"));
        assert!(second.user[1].contains("each violation"));
        assert_eq!(second.messages().len(), 4);

        let v0 = build_contextualization_prompt(&c, CweId::Cwe1300, Variation::V0, RTL, &sa)
            .unwrap()
            .unwrap();
        assert!(matches!(
            build_rethink_prompt(&v0, &resp, &sa),
            Err(LlmError::NoRethink(_))
        ));
    }
}
