// SPDX-License-Identifier: Apache-2.0

//! Prompt construction, response parsing and chat-completion providers for
//! asset identification and contextualization.

mod catalog;
mod fixtures;
#[cfg(feature = "http")]
mod http;
mod parse;
mod prompts;
mod provider;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use catalog::{Catalog, CatalogEntry, Exemplar};
pub use fixtures::{canonical_json, Fixture, FixtureStore, Nearest, VerifyProblem};
#[cfg(feature = "http")]
pub use http::{Attempt, HttpProvider};
pub use parse::{extract_json, parse_asset_response, parse_context_response, Verdict};
pub use prompts::{
    build_asset_prompt, build_contextualization_prompt, build_rethink_prompt, sa_output_key, sa_output_noun, SaOutputs,
};
pub use provider::{build_provider, FnProvider, Provider, ProviderConfig, ProviderKind, ReplayProvider};

use crate::{CweId, Variation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    AssetId,
    Contextualization,
    Rethink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// Everything sent for one chat completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub cwe: CweId,
    pub variation: Variation,
    pub stage: Stage,
    pub system: String,
    /// User turns; two for the rethink pass.
    pub user: Vec<String>,
    /// Prior assistant turns, interleaved after each user turn but the last.
    pub assistant: Vec<String>,
    pub schema_name: String,
    pub schema: Value,
}

impl PromptBundle {
    pub fn messages(&self) -> Vec<Message> {
        let mut out = vec![Message {
            role: Role::System,
            content: self.system.clone(),
        }];
        for (i, u) in self.user.iter().enumerate() {
            out.push(Message {
                role: Role::User,
                content: u.clone(),
            });
            if let Some(a) = self.assistant.get(i) {
                out.push(Message {
                    role: Role::Assistant,
                    content: a.clone(),
                });
            }
        }
        out
    }
}

/// Which stages produced a finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub asset_prompt_digest: String,
    pub context_prompt_digest: String,
    pub provider: String,
    pub model: String,
}

/// A contextualized static-analysis output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub cwe: CweId,
    /// Lint violation or assertion id.
    pub source: String,
    pub insecure: bool,
    pub explanation: String,
    pub variation: Variation,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("response is not JSON: {0}")]
    NotJson(String),
    #[error("response does not match the {schema} schema: {detail}")]
    Schema { schema: String, detail: String },
    #[error("no replay fixture for request digest {digest}{}", fmt_nearest(.nearest))]
    FixtureMissing { digest: String, nearest: Vec<Nearest> },
    #[error("fixture store: {0}")]
    Store(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("request failed after {attempts} attempt(s): {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("rethink prompts apply to v2 and v3 only, not {0}")]
    NoRethink(Variation),
    #[error("no exemplar for CWE-{0}")]
    MissingExemplar(u32),
}

fn fmt_nearest(n: &[Nearest]) -> String {
    if n.is_empty() {
        return "; the store is empty".into();
    }
    let list: Vec<String> = n
        .iter()
        .map(|x| format!("{} (similarity {:.2})", x.digest, x.similarity))
        .collect();
    format!("; nearest stored: {}", list.join(", "))
}

impl LlmError {
    /// Worth another attempt at the provider layer.
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::NotJson(_) | LlmError::Schema { .. })
    }
}
