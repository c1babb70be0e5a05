//! Completion backends: a remote HTTP adapter and a scripted stub that
//! replays canned replies per stage.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use base64::Engine as _;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::driver::Png;

pub const API_KEY_ENV: &str = "WEBNAV_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptPart {
    Text(String),
    Image(Png),
}

impl PromptPart {
    pub fn text(s: impl Into<String>) -> Self {
        PromptPart::Text(s.into())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PromptPart::Text(t) => Some(t),
            PromptPart::Image(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("scripted {0} replies exhausted")]
    Exhausted(&'static str),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("{0} is not set")]
    MissingKey(&'static str),
}

pub trait ModelBackend: Send + Sync {
    fn complete(&self, parts: &[PromptPart]) -> Result<String, BackendError>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for Arc<B> {
    fn complete(&self, parts: &[PromptPart]) -> Result<String, BackendError> {
        (**self).complete(parts)
    }
}

#[derive(Debug, Default)]
struct StageState {
    replies: VecDeque<String>,
    prompts: Vec<Vec<PromptPart>>,
}

/// One stage of a [`ScriptedBackend`]: replies are consumed in order and
/// every prompt is kept for inspection.
#[derive(Debug, Clone)]
pub struct ScriptedStage {
    name: &'static str,
    state: Arc<Mutex<StageState>>,
}

impl ScriptedStage {
    pub fn new(name: &'static str, replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name,
            state: Arc::new(Mutex::new(StageState {
                replies: replies.into_iter().map(Into::into).collect(),
                prompts: Vec::new(),
            })),
        }
    }

    fn lock(&self) -> MutexGuard<'_, StageState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Every prompt received so far, oldest first.
    pub fn prompts(&self) -> Vec<Vec<PromptPart>> {
        self.lock().prompts.clone()
    }

    pub fn calls(&self) -> usize {
        self.lock().prompts.len()
    }

    pub fn remaining(&self) -> usize {
        self.lock().replies.len()
    }
}

impl ModelBackend for ScriptedStage {
    fn complete(&self, parts: &[PromptPart]) -> Result<String, BackendError> {
        let mut st = self.lock();
        st.prompts.push(parts.to_vec());
        st.replies.pop_front().ok_or(BackendError::Exhausted(self.name))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default)]
    controller: Vec<String>,
    #[serde(default)]
    assistant: Vec<String>,
}

/// Canned replies for both stages, from `{"controller": [...], "assistant": [...]}`.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    pub controller: ScriptedStage,
    pub assistant: ScriptedStage,
}

impl ScriptedBackend {
    pub fn new<C, A>(controller: C, assistant: A) -> Self
    where
        C: IntoIterator,
        C::Item: Into<String>,
        A: IntoIterator,
        A::Item: Into<String>,
    {
        Self {
            controller: ScriptedStage::new("controller", controller),
            assistant: ScriptedStage::new("assistant", assistant),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let f: ScriptFile = serde_json::from_str(text)?;
        Ok(Self::new(f.controller, f.assistant))
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))
        })
    }
}

/// Posts `{"parts": [...]}` to an endpoint and reads `{"text": "..."}` back.
///
/// Image parts are sent as `{"type": "image", "mime_type": "image/png",
/// "data": <base64>}`; the key goes in a bearer `Authorization` header.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(60);

    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, deadline: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(deadline))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            agent,
        }
    }

    /// Reads the key from `WEBNAV_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| BackendError::MissingKey(API_KEY_ENV))?;
        Ok(Self::new(endpoint, key, Self::DEFAULT_DEADLINE))
    }

    pub fn request_body(parts: &[PromptPart]) -> Value {
        let parts: Vec<Value> = parts
            .iter()
            .map(|p| match p {
                PromptPart::Text(t) => json!({ "type": "text", "text": t }),
                PromptPart::Image(png) => json!({
                    "type": "image",
                    "mime_type": "image/png",
                    "data": base64::engine::general_purpose::STANDARD.encode(png.as_bytes()),
                }),
            })
            .collect();
        json!({ "parts": parts })
    }
}

impl ModelBackend for HttpBackend {
    fn complete(&self, parts: &[PromptPart]) -> Result<String, BackendError> {
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(Self::request_body(parts).to_string())
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::BadResponse(format!("HTTP {status}: {body}")));
        }
        let value: Value =
            serde_json::from_str(&body).map_err(|e| BackendError::BadResponse(e.to_string()))?;
        value["text"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::BadResponse("missing \"text\" field".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_replays_in_order_then_exhausts() {
        let b = ScriptedBackend::from_json(r#"{"controller": ["a", "b"], "assistant": []}"#).unwrap();
        let p = [PromptPart::text("x")];
        assert_eq!(b.controller.complete(&p).unwrap(), "a");
        assert_eq!(b.controller.complete(&p).unwrap(), "b");
        assert_eq!(b.controller.complete(&p), Err(BackendError::Exhausted("controller")));
        assert_eq!(b.assistant.complete(&p), Err(BackendError::Exhausted("assistant")));
        assert_eq!(b.controller.calls(), 3);
    }

    #[test]
    fn script_file_rejects_unknown_stage() {
        assert!(ScriptedBackend::from_json(r#"{"planner": []}"#).is_err());
    }

    #[test]
    fn request_body_shape() {
        let png = Png::new(crate::driver::PNG_SIGNATURE.to_vec()).unwrap();
        let body = HttpBackend::request_body(&[PromptPart::text("hi"), PromptPart::Image(png)]);
        assert_eq!(body["parts"][0], json!({ "type": "text", "text": "hi" }));
        assert_eq!(body["parts"][1]["mime_type"], "image/png");
        assert_eq!(body["parts"][1]["data"], "iVBORw0KGgo=");
    }
}
