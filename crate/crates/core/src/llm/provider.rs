// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{FixtureStore, LlmError, PromptBundle};

/// A chat-completion backend returning the parsed JSON content of a reply.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn model(&self) -> &str;
    fn complete(&self, bundle: &PromptBundle) -> Result<Value, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    Replay,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_retries() -> u32 {
    3
}
fn default_timeout() -> u64 {
    120
}
fn default_backoff() -> u64 {
    500
}

/// Provider settings. The API key itself is never part of this structure;
/// only the name of the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub provider: ProviderKind,
    pub model: String,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    /// Replay source, or recording target for the HTTP provider.
    #[serde(default)]
    pub fixture_path: Option<PathBuf>,
    #[serde(default)]
    pub record: bool,
}

impl ProviderConfig {
    pub fn replay(model: &str, fixtures: impl Into<PathBuf>) -> ProviderConfig {
        ProviderConfig {
            provider: ProviderKind::Replay,
            model: model.into(),
            endpoint_url: None,
            api_key_env: default_key_env(),
            temperature: 0.0,
            max_retries: default_retries(),
            request_timeout_secs: default_timeout(),
            backoff_base_ms: default_backoff(),
            fixture_path: Some(fixtures.into()),
            record: false,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: &str| Err(LlmError::Config(m.into()));
        if self.model.trim().is_empty() {
            return bad("model is empty");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must be within [0, 2]");
        }
        let env_ok = !self.api_key_env.is_empty()
            && self
                .api_key_env
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
        if !env_ok {
            return bad("api_key_env must name an environment variable (A-Z, 0-9, _), not hold a key");
        }
        match self.provider {
            ProviderKind::Http => {
                if self.endpoint_url.as_deref().is_none_or(|u| !u.starts_with("http")) {
                    return bad("http provider needs an http(s) endpoint_url");
                }
                if self.record && self.fixture_path.is_none() {
                    return bad("recording needs fixture_path");
                }
            }
            ProviderKind::Replay => {
                if self.fixture_path.is_none() {
                    return bad("replay provider needs fixture_path");
                }
            }
        }
        Ok(())
    }
}

/// Does `v` have the shape the bundle's schema asks for at the top level?
#[cfg_attr(not(feature = "http"), allow(dead_code))]
pub(crate) fn conforms(bundle: &PromptBundle, v: &Value) -> Result<(), LlmError> {
    let err = |detail: String| LlmError::Schema {
        schema: bundle.schema_name.clone(),
        detail,
    };
    let obj = v.as_object().ok_or_else(|| err("reply is not an object".into()))?;
    for key in bundle.schema["required"].as_array().into_iter().flatten() {
        let k = key.as_str().unwrap_or_default();
        if !obj.contains_key(k) {
            return Err(err(format!("missing '{k}'")));
        }
    }
    Ok(())
}

/// Serves recorded responses keyed by request digest.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    pub store: FixtureStore,
    model: String,
}

impl ReplayProvider {
    pub fn new(store: FixtureStore, model: &str) -> ReplayProvider {
        ReplayProvider {
            store,
            model: model.into(),
        }
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> &str {
        "replay"
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<Value, LlmError> {
        let request = FixtureStore::request_value(bundle, &self.model);
        let digest = FixtureStore::digest_of(&request);
        match self.store.load(&digest)? {
            Some(f) => Ok(f.response),
            None => Err(LlmError::FixtureMissing {
                nearest: self.store.nearest(&request, 3),
                digest,
            }),
        }
    }
}

type CompleteFn = dyn Fn(&PromptBundle) -> Result<Value, LlmError> + Send + Sync;

/// Closure-backed provider for tests and embedding.
pub struct FnProvider {
    name: String,
    model: String,
    f: Box<CompleteFn>,
}

impl FnProvider {
    pub fn new(
        name: &str,
        model: &str,
        f: impl Fn(&PromptBundle) -> Result<Value, LlmError> + Send + Sync + 'static,
    ) -> FnProvider {
        FnProvider {
            name: name.into(),
            model: model.into(),
            f: Box::new(f),
        }
    }
}

impl Provider for FnProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<Value, LlmError> {
        (self.f)(bundle)
    }
}

/// Instantiate the provider a config describes.
pub fn build_provider(cfg: &ProviderConfig) -> Result<Box<dyn Provider>, LlmError> {
    cfg.validate()?;
    match cfg.provider {
        ProviderKind::Replay => Ok(Box::new(ReplayProvider::new(
            FixtureStore::new(cfg.fixture_path.clone().expect("validated")),
            &cfg.model,
        ))),
        #[cfg(feature = "http")]
        ProviderKind::Http => Ok(Box::new(super::HttpProvider::from_config(cfg)?)),
        #[cfg(not(feature = "http"))]
        ProviderKind::Http => Err(LlmError::Config("built without the http feature".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{build_asset_prompt, Catalog, Fixture};
    use crate::{CweId, Variation};
    use serde_json::json;

    #[test]
    fn config_rejects_inline_keys() {
        let text = r#"{"provider": "http", "model": "m", "endpoint_url": "http://x", "api_key": "sk-1"}"#;
        assert!(serde_json::from_str::<ProviderConfig>(text).is_err());
        let mut c: ProviderConfig =
            serde_json::from_str(r#"{"provider": "http", "model": "m", "endpoint_url": "http://x"}"#).unwrap();
        assert_eq!(c.api_key_env, "OPENAI_API_KEY");
        assert!(c.validate().is_ok());
        c.api_key_env = "sk-abc123".into();
        assert!(c.validate().is_err());
        assert!(ProviderConfig::replay("m", "/nowhere").validate().is_ok());
    }

    #[test]
    fn replay_hit_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let cat = Catalog::builtin();
        let b = build_asset_prompt(&cat, CweId::Cwe1191, Variation::V0, "module m; endmodule").unwrap();
        let p = ReplayProvider::new(store.clone(), "m1");

        let Err(LlmError::FixtureMissing { digest, nearest }) = p.complete(&b) else {
            panic!()
        };
        assert_eq!(digest, FixtureStore::digest(&b, "m1"));
        assert!(nearest.is_empty());

        let response = json!({"access_control_related_signals": ["a"]});
        let request = FixtureStore::request_value(&b, "m1");
        store
            .save(&Fixture {
                digest: digest.clone(),
                request,
                response: response.clone(),
                model: "m1".into(),
                timestamp: 1,
            })
            .unwrap();
        assert_eq!(
            serde_json::to_string(&p.complete(&b).unwrap()).unwrap(),
            serde_json::to_string(&response).unwrap()
        );

        // A different model is a different request.
        let other = ReplayProvider::new(store, "m2");
        let e = other.complete(&b).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains(&FixtureStore::digest(&b, "m2")));
        assert!(msg.contains(&digest));
    }

    #[test]
    fn conformance_checks_required_keys() {
        let cat = Catalog::builtin();
        let b = build_asset_prompt(&cat, CweId::Cwe1300, Variation::V0, "").unwrap();
        assert!(conforms(&b, &json!({"side_channel_related_signals": []})).is_ok());
        assert!(conforms(&b, &json!({"x": 1})).is_err());
        assert!(conforms(&b, &json!([1])).is_err());
    }
}
