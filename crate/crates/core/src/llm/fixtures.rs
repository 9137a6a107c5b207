// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{LlmError, PromptBundle};
use crate::digest::sha256_hex;

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut keys: Vec<&String> = m.keys().collect();
                keys.sort();
                let mut out = Map::new();
                for k in keys {
                    out.insert(k.clone(), sorted(&m[k]));
                }
                Value::Object(out)
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sorted(v)).expect("values serialize")
}

/// A recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub digest: String,
    pub request: Value,
    pub response: Value,
    pub model: String,
    /// Unix seconds at recording time.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nearest {
    pub digest: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyProblem {
    pub file: String,
    pub problem: String,
}

impl fmt::Display for VerifyProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.file, self.problem)
    }
}

/// Directory of `<digest>.json` fixtures.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    pub dir: PathBuf,
}

fn store_err(path: &Path, e: impl fmt::Display) -> LlmError {
    LlmError::Store(format!("{}: {e}", path.display()))
}

fn tokens(request: &Value) -> HashSet<String> {
    request["messages"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|m| m["content"].as_str())
        .flat_map(str::split_whitespace)
        .map(String::from)
        .collect()
}

fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> FixtureStore {
        FixtureStore { dir: dir.into() }
    }

    /// The request object a digest is computed over.
    pub fn request_value(bundle: &PromptBundle, model: &str) -> Value {
        json!({
            "model": model,
            "messages": bundle.messages(),
            "schema": bundle.schema,
        })
    }

    pub fn digest_of(request: &Value) -> String {
        sha256_hex(canonical_json(request).as_bytes())
    }

    pub fn digest(bundle: &PromptBundle, model: &str) -> String {
        Self::digest_of(&Self::request_value(bundle, model))
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn load(&self, digest: &str) -> Result<Option<Fixture>, LlmError> {
        let p = self.path(digest);
        match fs::read_to_string(&p) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| store_err(&p, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(store_err(&p, e)),
        }
    }

    /// Write through a temporary file and rename.
    pub fn save(&self, f: &Fixture) -> Result<PathBuf, LlmError> {
        fs::create_dir_all(&self.dir).map_err(|e| store_err(&self.dir, e))?;
        let p = self.path(&f.digest);
        let tmp = self.dir.join(format!(".{}.tmp", f.digest));
        let text = serde_json::to_string_pretty(f).expect("fixtures serialize");
        let write = || -> std::io::Result<()> {
            let mut h = fs::File::create(&tmp)?;
            h.write_all(text.as_bytes())?;
            h.write_all(b"\n")?;
            h.sync_all()?;
            fs::rename(&tmp, &p)
        };
        write().map_err(|e| store_err(&p, e))?;
        Ok(p)
    }

    fn files(&self) -> Result<Vec<PathBuf>, LlmError> {
        let rd = match fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(store_err(&self.dir, e)),
        };
        let mut out: Vec<PathBuf> = rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'))
            })
            .collect();
        out.sort();
        Ok(out)
    }

    /// All readable fixtures, by digest.
    pub fn list(&self) -> Result<Vec<Fixture>, LlmError> {
        let mut out = Vec::new();
        for p in self.files()? {
            let text = fs::read_to_string(&p).map_err(|e| store_err(&p, e))?;
            out.push(serde_json::from_str(&text).map_err(|e| store_err(&p, e))?);
        }
        Ok(out)
    }

    /// Files that do not parse or whose digest does not match their content
    /// or name.
    pub fn verify(&self) -> Result<Vec<VerifyProblem>, LlmError> {
        let mut out = Vec::new();
        for p in self.files()? {
            let file = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let mut bad = |problem: String| {
                out.push(VerifyProblem {
                    file: file.clone(),
                    problem,
                })
            };
            let f: Fixture = match fs::read_to_string(&p)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
            {
                Ok(f) => f,
                Err(e) => {
                    bad(format!("unreadable: {e}"));
                    continue;
                }
            };
            let actual = Self::digest_of(&f.request);
            if actual != f.digest {
                bad(format!("recorded digest {} but request hashes to {actual}", f.digest));
            }
            if file != format!("{}.json", f.digest) {
                bad(format!("file name does not match digest {}", f.digest));
            }
            if f.request["model"].as_str() != Some(f.model.as_str()) {
                bad("model field disagrees with the request".into());
            }
            if !f.response.is_object() {
                bad("response is not a JSON object".into());
            }
        }
        Ok(out)
    }

    /// Up to `k` stored fixtures most similar to `request` by token Jaccard.
    pub fn nearest(&self, request: &Value, k: usize) -> Vec<Nearest> {
        let Ok(all) = self.list() else {
            return Vec::new();
        };
        let want = tokens(request);
        let mut scored: Vec<Nearest> = all
            .iter()
            .map(|f| Nearest {
                digest: f.digest.clone(),
                similarity: jaccard(&want, &tokens(&f.request)),
            })
            .collect();
        scored.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then_with(|| a.digest.cmp(&b.digest))
        });
        scored.truncate(k);
        scored
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_sorts_nested_keys() {
        let a = json!({"b": 1, "a": {"y": [1, {"d": 0, "c": 0}], "x": null}});
        assert_eq!(canonical_json(&a), r#"{"a":{"x":null,"y":[1,{"c":0,"d":0}]},"b":1}"#);
        let b: Value = serde_json::from_str(r#"{"a": {"x": null, "y": [1, {"c": 0, "d": 0}]}, "b": 1}"#).unwrap();
        assert_eq!(canonical_json(&a), canonical_json(&b));
    }

    #[test]
    fn save_load_verify() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let request = json!({"model": "m", "messages": [{"role": "user", "content": "alpha beta"}], "schema": {}});
        let f = Fixture {
            digest: FixtureStore::digest_of(&request),
            request,
            response: json!({"results": []}),
            model: "m".into(),
            timestamp: 0,
        };
        store.save(&f).unwrap();
        assert_eq!(store.load(&f.digest).unwrap(), Some(f.clone()));
        assert!(store.load("00").unwrap().is_none());
        assert!(store.verify().unwrap().is_empty());

        let mut tampered = f.clone();
        tampered.request["messages"][0]["content"] = json!("alpha gamma");
        store.save(&tampered).unwrap();
        assert_eq!(store.verify().unwrap().len(), 1);

        let near = store.nearest(&json!({"messages": [{"content": "alpha beta"}]}), 3);
        assert_eq!(near.len(), 1);
        assert!((near[0].similarity - 1.0 / 3.0).abs() < 1e-9);
    }
}
