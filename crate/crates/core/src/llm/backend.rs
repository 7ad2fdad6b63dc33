//! Completion backends: an HTTP chat-completions client and an offline
//! mock driven by fixtures or a fixed script.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::LlmError;

pub const AUTH_ENV: &str = "PROCURE_LLM_KEY";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Http,
    Mock,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_retries() -> u32 {
    5
}

fn default_auth_env() -> String {
    AUTH_ENV.to_string()
}

fn default_request_timeout() -> u64 {
    120
}

/// Backend settings, read from a JSON file. The secret itself never appears
/// in the file; `auth_env` names the variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_auth_env")]
    pub auth_env: String,
    /// Mock fixtures directory.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            endpoint: String::new(),
            model: String::new(),
            temperature: default_temperature(),
            max_retries: default_retries(),
            auth_env: default_auth_env(),
            fixtures: None,
            request_timeout_secs: default_request_timeout(),
        }
    }
}

impl BackendConfig {
    pub fn mock(fixtures: Option<PathBuf>) -> Self {
        BackendConfig { kind: BackendKind::Mock, model: "mock".into(), fixtures, ..Default::default() }
    }

    /// Reads a config file; a relative fixtures path resolves against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: BackendConfig =
            serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(fixtures), Some(dir)) = (&cfg.fixtures, path.parent()) {
            if fixtures.is_relative() {
                cfg.fixtures = Some(dir.join(fixtures));
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), LlmError> {
        if self.max_retries < 1 {
            return Err(LlmError::Config("max_retries must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::Config("temperature must be a finite number >= 0".into()));
        }
        if self.kind == BackendKind::Http && self.endpoint.is_empty() {
            return Err(LlmError::Config("http backend needs an endpoint".into()));
        }
        Ok(())
    }

    /// Generator label stored in datasets and manifests.
    pub fn generator_label(&self) -> String {
        let model = if self.model.is_empty() { "unknown" } else { &self.model };
        format!("llm:{model}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// Total tokens for the exchange, when the backend reports usage.
    pub tokens: Option<u64>,
}

pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &str, cfg: &BackendConfig) -> Result<Completion, LlmError>;
}

/// Builds the backend described by `cfg`.
pub fn backend_from_config(cfg: &BackendConfig) -> Result<Box<dyn Backend>, LlmError> {
    cfg.check()?;
    Ok(match cfg.kind {
        BackendKind::Http => Box::new(HttpBackend::new(cfg)),
        BackendKind::Mock => match &cfg.fixtures {
            Some(dir) => Box::new(MockBackend::from_dir(dir)?),
            None => return Err(LlmError::Config("mock backend needs a fixtures directory".into())),
        },
    })
}

pub struct HttpBackend {
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(cfg: &BackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.request_timeout_secs)))
            .build()
            .into();
        HttpBackend { agent }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &str, cfg: &BackendConfig) -> Result<Completion, LlmError> {
        let body = json!({
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
        });
        let mut request = self.agent.post(&cfg.endpoint);
        if let Ok(key) = std::env::var(&cfg.auth_env) {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| LlmError::Transport(e.to_string()))?;
        let value: Value =
            response.body_mut().read_json().map_err(|e| LlmError::Transport(format!("bad response body: {e}")))?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LlmError::Transport("response has no choices[0].message.content".into()))?
            .to_string();
        Ok(Completion { text, tokens: value["usage"]["total_tokens"].as_u64() })
    }
}

/// One scripted reply. `{{target}}` in the text is replaced by the target
/// program of the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Full {
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        tokens: Option<u64>,
        /// Simulated transport failure.
        #[serde(default)]
        error: Option<String>,
    },
}

impl MockReply {
    pub fn text(text: impl Into<String>) -> Self {
        MockReply::Text(text.into())
    }

    pub fn with_tokens(text: impl Into<String>, tokens: u64) -> Self {
        MockReply::Full { text: Some(text.into()), tokens: Some(tokens), error: None }
    }

    pub fn error(message: impl Into<String>) -> Self {
        MockReply::Full { text: None, tokens: None, error: Some(message.into()) }
    }

    fn resolve(&self, prompt: &str) -> Result<Completion, LlmError> {
        let (text, tokens) = match self {
            MockReply::Text(t) => (t.as_str(), None),
            MockReply::Full { error: Some(e), .. } => return Err(LlmError::Transport(e.clone())),
            MockReply::Full { text, tokens, .. } => (text.as_deref().unwrap_or(""), *tokens),
        };
        let text = if text.contains("{{target}}") {
            text.replace("{{target}}", &target_program(prompt).unwrap_or_default())
        } else {
            text.to_string()
        };
        Ok(Completion { text, tokens })
    }
}

#[derive(Debug, Deserialize)]
struct FixtureFile {
    responses: Vec<MockReply>,
}

/// Hex SHA-256 of a prompt, the key of its fixture file.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// The last fenced block of a prompt, which holds the target program.
fn target_program(prompt: &str) -> Option<String> {
    let end = prompt.rfind("\n```")?;
    let start = prompt[..end].rfind("```python\n")? + "```python\n".len();
    Some(format!("{}\n", &prompt[start..end]))
}

/// Offline backend. Replies are looked up by prompt hash
/// (`<hash>.json`), falling back to `default.json`; each file holds a
/// `responses` list consumed in order, the last entry repeating. A scripted
/// mock ignores the prompt and plays one list.
pub struct MockBackend {
    by_prompt: HashMap<String, Vec<MockReply>>,
    fallback: Option<Vec<MockReply>>,
    calls: Mutex<HashMap<String, usize>>,
}

impl MockBackend {
    pub fn scripted(replies: Vec<MockReply>) -> Self {
        MockBackend { by_prompt: HashMap::new(), fallback: Some(replies), calls: Mutex::new(HashMap::new()) }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, LlmError> {
        let fixture_err = |e: String| LlmError::Fixture { path: dir.to_path_buf(), message: e };
        let mut by_prompt = HashMap::new();
        let mut fallback = None;
        let entries = std::fs::read_dir(dir).map_err(|e| fixture_err(e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| fixture_err(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let text = std::fs::read_to_string(&path)
                .map_err(|e| LlmError::Fixture { path: path.clone(), message: e.to_string() })?;
            let file: FixtureFile = serde_json::from_str(&text)
                .map_err(|e| LlmError::Fixture { path: path.clone(), message: e.to_string() })?;
            if file.responses.is_empty() {
                return Err(LlmError::Fixture { path, message: "empty responses list".into() });
            }
            if stem == "default" {
                fallback = Some(file.responses);
            } else {
                by_prompt.insert(stem, file.responses);
            }
        }
        Ok(MockBackend { by_prompt, fallback, calls: Mutex::new(HashMap::new()) })
    }

    /// Writes a fixture file for `prompt` into `dir`.
    pub fn write_fixture(dir: &Path, prompt: &str, replies: &[MockReply]) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{}.json", prompt_hash(prompt)));
        let text = serde_json::to_string_pretty(&json!({ "responses": replies })).expect("fixture serializes");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &str, _cfg: &BackendConfig) -> Result<Completion, LlmError> {
        let hash = prompt_hash(prompt);
        let replies = match self.by_prompt.get(&hash).or(self.fallback.as_ref()) {
            Some(r) => r,
            None => return Err(LlmError::Transport(format!("no fixture for prompt {hash}"))),
        };
        // Per-prompt counters keep concurrent tasks independent.
        let n = {
            let mut calls = self.calls.lock().expect("mock call table");
            let slot = calls.entry(hash).or_default();
            *slot += 1;
            *slot - 1
        };
        replies[n.min(replies.len() - 1)].resolve(prompt)
    }
}
