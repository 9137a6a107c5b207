// SPDX-License-Identifier: Apache-2.0

use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use ureq::Agent;

use super::provider::conforms;
use super::{extract_json, Fixture, FixtureStore, LlmError, PromptBundle, Provider, ProviderConfig};

/// One request attempt, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Attempt {
    pub digest: String,
    pub number: u32,
    /// HTTP status, when a response arrived.
    pub status: Option<u16>,
    pub outcome: String,
}

/// OpenAI-compatible chat-completions client with structured output.
pub struct HttpProvider {
    cfg: ProviderConfig,
    url: String,
    key: String,
    agent: Agent,
    record: Option<FixtureStore>,
    attempts: Mutex<Vec<Attempt>>,
}

enum Failure {
    Retry(String),
    Fatal(LlmError),
}

impl HttpProvider {
    /// Reads the API key from the environment variable named in `cfg`.
    pub fn from_config(cfg: &ProviderConfig) -> Result<HttpProvider, LlmError> {
        cfg.validate()?;
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| LlmError::Config(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.request_timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpProvider {
            url: cfg.endpoint_url.clone().expect("validated"),
            key,
            agent,
            record: cfg
                .record
                .then(|| FixtureStore::new(cfg.fixture_path.clone().expect("validated"))),
            cfg: cfg.clone(),
            attempts: Mutex::new(Vec::new()),
        })
    }

    /// Every attempt made so far.
    pub fn attempts(&self) -> Vec<Attempt> {
        self.attempts.lock().expect("attempt log").clone()
    }

    fn body(&self, bundle: &PromptBundle) -> Value {
        json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": bundle.messages(),
            "response_format": {
                "type": "json_schema",
                "json_schema": {
                    "name": bundle.schema_name,
                    "schema": bundle.schema,
                    "strict": true,
                },
            },
        })
    }

    fn once(&self, bundle: &PromptBundle, body: &Value) -> (Option<u16>, Result<Value, Failure>) {
        let sent = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(body);
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return (None, Err(Failure::Retry(format!("transport: {e}")))),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return (Some(status), Err(Failure::Retry(format!("HTTP {status}"))));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            let head: String = text.chars().take(200).collect();
            return (
                Some(status),
                Err(Failure::Fatal(LlmError::Exhausted {
                    attempts: 1,
                    last: format!("HTTP {status}: {head}"),
                })),
            );
        }
        let reply: Value = match resp.body_mut().read_json() {
            Ok(v) => v,
            Err(e) => return (Some(status), Err(Failure::Retry(format!("bad body: {e}")))),
        };
        let Some(content) = reply["choices"][0]["message"]["content"].as_str() else {
            return (Some(status), Err(Failure::Retry("reply has no message content".into())));
        };
        let parsed = extract_json(content).and_then(|v| conforms(bundle, &v).map(|_| v));
        match parsed {
            Ok(v) => (Some(status), Ok(v)),
            Err(e) if e.is_retryable() => (Some(status), Err(Failure::Retry(e.to_string()))),
            Err(e) => (Some(status), Err(Failure::Fatal(e))),
        }
    }

    fn log(&self, a: Attempt) {
        log::info!(
            "request {} attempt {}: {}",
            &a.digest[..12.min(a.digest.len())],
            a.number,
            a.outcome
        );
        self.attempts.lock().expect("attempt log").push(a);
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn model(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<Value, LlmError> {
        let request = FixtureStore::request_value(bundle, &self.cfg.model);
        let digest = FixtureStore::digest_of(&request);
        let body = self.body(bundle);
        let total = self.cfg.max_retries + 1;
        let mut last = String::new();
        for n in 1..=total {
            let (status, r) = self.once(bundle, &body);
            let outcome = match &r {
                Ok(_) => "ok".to_string(),
                Err(Failure::Retry(m)) => format!("retry: {m}"),
                Err(Failure::Fatal(e)) => format!("failed: {e}"),
            };
            self.log(Attempt {
                digest: digest.clone(),
                number: n,
                status,
                outcome,
            });
            match r {
                Ok(response) => {
                    if let Some(store) = &self.record {
                        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
                        store.save(&Fixture {
                            digest,
                            request,
                            response: response.clone(),
                            model: self.cfg.model.clone(),
                            timestamp,
                        })?;
                    }
                    return Ok(response);
                }
                Err(Failure::Fatal(LlmError::Exhausted { last, .. })) => {
                    return Err(LlmError::Exhausted { attempts: n, last })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(m)) => last = m,
            }
            if n < total {
                let wait = self.cfg.backoff_base_ms.saturating_mul(1 << (n - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
        }
        Err(LlmError::Exhausted { attempts: total, last })
    }
}
