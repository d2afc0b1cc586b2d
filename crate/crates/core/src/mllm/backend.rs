//! Model backends: fixture replay, HTTP chat completion, and a recording
//! wrapper that captures request/response pairs for later replay.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{MllmError, Part, PromptBundle};

/// A completion backend. Implementations must be usable from multiple
/// threads at once.
pub trait MllmBackend: Sync {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, MllmError>;
}

fn check_bundle(bundle: &PromptBundle) -> Result<(), MllmError> {
    if bundle.user_parts.is_empty() {
        return Err(MllmError::EmptyBundle);
    }
    Ok(())
}

/// Replays recorded responses from a directory of `{bundle-hash}.txt`
/// files. Deterministic by construction: the response depends only on the
/// bundle hash.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    dir: PathBuf,
}

impl FixtureBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureBackend { dir: dir.into() }
    }

    pub fn response_path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.txt"))
    }
}

impl MllmBackend for FixtureBackend {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, MllmError> {
        check_bundle(bundle)?;
        let hash = bundle.hash();
        let path = self.response_path(&hash);
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(MllmError::FixtureMissing {
                hash,
                dir: self.dir.clone(),
            }),
            Err(e) => Err(e.into()),
        }
    }
}

/// Wraps another backend and writes each exchange into a fixture
/// directory: `{hash}.txt` with the response and `{hash}.request.json`
/// with the canonical bundle.
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: MllmBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        RecordingBackend {
            inner,
            dir: dir.into(),
        }
    }
}

impl<B: MllmBackend> MllmBackend for RecordingBackend<B> {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, MllmError> {
        let response = self.inner.complete(bundle)?;
        std::fs::create_dir_all(&self.dir)?;
        let hash = bundle.hash();
        std::fs::write(self.dir.join(format!("{hash}.txt")), &response)?;
        std::fs::write(
            self.dir.join(format!("{hash}.request.json")),
            bundle.canonical_json(),
        )?;
        Ok(response)
    }
}

fn default_timeout_s() -> u64 {
    120
}

fn default_max_retries() -> u32 {
    3
}

/// HTTP backend settings, loaded from a JSON config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpModelConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

impl HttpModelConfig {
    pub fn from_file(path: &Path) -> Result<Self, MllmError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| MllmError::Config(format!("{}: {e}", path.display())))
    }
}

/// Chat-completion backend.
///
/// Request: `{"model", "messages": [system, user-with-parts]}`. Response:
/// first `choices[].message.content`. Transport failures and 5xx retry
/// with exponential backoff; 4xx and content problems do not.
pub struct HttpBackend {
    config: HttpModelConfig,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpModelConfig) -> Result<Self, MllmError> {
        let api_key = match &config.api_key_env {
            None => None,
            Some(var) => Some(std::env::var(var).map_err(|_| {
                MllmError::Config(format!("environment variable {var} is not set"))
            })?),
        };
        Ok(HttpBackend { config, api_key })
    }

    fn request_body(&self, bundle: &PromptBundle) -> serde_json::Value {
        let content: Vec<serde_json::Value> = bundle
            .user_parts
            .iter()
            .map(|p| match p {
                Part::Text { text } => serde_json::json!({"type": "text", "text": text}),
                Part::Image { image } => serde_json::json!({"type": "image_ref", "image": image}),
                Part::Video { manifest_id } => {
                    serde_json::json!({"type": "video_ref", "manifest_id": manifest_id})
                }
            })
            .collect();
        serde_json::json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": content},
            ],
        })
    }
}

impl MllmBackend for HttpBackend {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, MllmError> {
        check_bundle(bundle)?;
        let agent = ureq::AgentBuilder::new()
            .timeout(std::time::Duration::from_secs(self.config.timeout_s))
            .build();
        let body = self.request_body(bundle);
        let attempts = self.config.max_retries.max(1);
        let mut last_err = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(
                    250 * (1u64 << (attempt - 1)),
                ));
            }
            let mut request = agent.post(&self.config.endpoint);
            if let Some(key) = &self.api_key {
                request = request.set("Authorization", &format!("Bearer {key}"));
            }
            match request.send_json(&body) {
                Ok(resp) => {
                    let parsed: serde_json::Value = resp
                        .into_json()
                        .map_err(|e| MllmError::BadResponse(e.to_string()))?;
                    let content = parsed["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| {
                            MllmError::BadResponse("missing choices[0].message.content".to_string())
                        })?;
                    return Ok(content.to_string());
                }
                Err(ureq::Error::Status(code, _)) if code < 500 => {
                    return Err(MllmError::Http {
                        attempts: attempt + 1,
                        message: format!("status {code}"),
                    });
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(MllmError::Http {
            attempts,
            message: last_err,
        })
    }
}
