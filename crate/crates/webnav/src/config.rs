//! Frontend configuration: defaults, then a flat JSON file, then
//! environment variables, then command-line flags.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::driver::ENDPOINT_ENV;
use crate::session::DEFAULT_MAX_STEPS;

pub const DEFAULT_ACTIVATION_PHRASE: &str = "activate DIGNAV";
pub const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:9222";
pub const DEFAULT_TRANSCRIPT: &str = "webnav-transcript.jsonl";

pub const BACKEND_ENV: &str = "WEBNAV_BACKEND";
pub const MAX_STEPS_ENV: &str = "WEBNAV_MAX_STEPS";
pub const VERIFY_ENV: &str = "WEBNAV_VERIFY";
pub const ACTIVATION_ENV: &str = "WEBNAV_ACTIVATION";
pub const VOICE_ENV: &str = "WEBNAV_VOICE";
pub const TRANSCRIPT_ENV: &str = "WEBNAV_TRANSCRIPT";

/// Config file keys, in the order they are documented.
pub const KEYS: &[&str] = &[
    "browser_endpoint",
    "backend",
    "max_steps",
    "verify",
    "activation_phrase",
    "voice_enabled",
    "transcript_path",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Scripted(PathBuf),
    Http(String),
}

impl BackendSpec {
    /// `scripted:PATH` or `http:URL`; a bare `http://` or `https://` URL is
    /// also accepted.
    pub fn parse(s: &str) -> Result<Self, String> {
        if let Some(path) = s.strip_prefix("scripted:") {
            if path.is_empty() {
                return Err("scripted backend needs a path".into());
            }
            return Ok(BackendSpec::Scripted(PathBuf::from(path)));
        }
        let url = if s.starts_with("http://") || s.starts_with("https://") {
            s
        } else if let Some(rest) = s.strip_prefix("http:") {
            rest
        } else {
            return Err(format!("expected scripted:PATH or http:URL, got {s:?}"));
        };
        url::Url::parse(url).map_err(|e| format!("bad backend URL {url:?}: {e}"))?;
        Ok(BackendSpec::Http(url.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppConfig {
    pub browser_endpoint: String,
    pub backend: BackendSpec,
    pub max_steps: u32,
    pub verify: bool,
    pub activation_phrase: String,
    pub voice_enabled: bool,
    pub transcript_path: PathBuf,
}

/// Values given on the command line; `None` defers to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigOverrides {
    pub browser_endpoint: Option<String>,
    pub backend: Option<String>,
    pub max_steps: Option<u32>,
    pub verify: Option<bool>,
    pub activation_phrase: Option<String>,
    pub voice_enabled: Option<bool>,
    pub transcript_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {reason}")]
    BadValue { key: String, reason: String },
    #[error("cannot read config file {path}: {reason}")]
    File { path: String, reason: String },
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Default)]
struct Layer {
    browser_endpoint: Option<String>,
    backend: Option<String>,
    max_steps: Option<u32>,
    verify: Option<bool>,
    activation_phrase: Option<String>,
    voice_enabled: Option<bool>,
    transcript_path: Option<PathBuf>,
}

impl Layer {
    fn over(self, lower: Layer) -> Layer {
        Layer {
            browser_endpoint: self.browser_endpoint.or(lower.browser_endpoint),
            backend: self.backend.or(lower.backend),
            max_steps: self.max_steps.or(lower.max_steps),
            verify: self.verify.or(lower.verify),
            activation_phrase: self.activation_phrase.or(lower.activation_phrase),
            voice_enabled: self.voice_enabled.or(lower.voice_enabled),
            transcript_path: self.transcript_path.or(lower.transcript_path),
        }
    }
}

impl From<&ConfigOverrides> for Layer {
    fn from(o: &ConfigOverrides) -> Self {
        Layer {
            browser_endpoint: o.browser_endpoint.clone(),
            backend: o.backend.clone(),
            max_steps: o.max_steps,
            verify: o.verify,
            activation_phrase: o.activation_phrase.clone(),
            voice_enabled: o.voice_enabled,
            transcript_path: o.transcript_path.clone(),
        }
    }
}

fn file_layer(obj: &Map<String, Value>) -> Result<Layer, ConfigError> {
    let mut layer = Layer::default();
    let string = |key: &str, v: &Value| {
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| bad(key, format!("expected a string, got {v}")))
    };
    let boolean = |key: &str, v: &Value| v.as_bool().ok_or_else(|| bad(key, format!("expected true or false, got {v}")));
    for (key, v) in obj {
        match key.as_str() {
            "browser_endpoint" => layer.browser_endpoint = Some(string(key, v)?),
            "backend" => layer.backend = Some(string(key, v)?),
            "max_steps" => {
                let n = v
                    .as_u64()
                    .and_then(|n| u32::try_from(n).ok())
                    .ok_or_else(|| bad(key, format!("expected a non-negative integer, got {v}")))?;
                layer.max_steps = Some(n);
            }
            "verify" => layer.verify = Some(boolean(key, v)?),
            "activation_phrase" => layer.activation_phrase = Some(string(key, v)?),
            "voice_enabled" => layer.voice_enabled = Some(boolean(key, v)?),
            "transcript_path" => layer.transcript_path = Some(PathBuf::from(string(key, v)?)),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
    }
    Ok(layer)
}

fn parse_bool(key: &str, s: &str) -> Result<bool, ConfigError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(bad(key, format!("expected a boolean, got {s:?}"))),
    }
}

fn env_layer(env: &dyn Fn(&str) -> Option<String>) -> Result<Layer, ConfigError> {
    let max_steps = match env(MAX_STEPS_ENV) {
        Some(s) => Some(
            s.trim()
                .parse()
                .map_err(|_| bad(MAX_STEPS_ENV, format!("expected a non-negative integer, got {s:?}")))?,
        ),
        None => None,
    };
    Ok(Layer {
        browser_endpoint: env(ENDPOINT_ENV),
        backend: env(BACKEND_ENV),
        max_steps,
        verify: env(VERIFY_ENV).map(|s| parse_bool(VERIFY_ENV, &s)).transpose()?,
        activation_phrase: env(ACTIVATION_ENV),
        voice_enabled: env(VOICE_ENV).map(|s| parse_bool(VOICE_ENV, &s)).transpose()?,
        transcript_path: env(TRANSCRIPT_ENV).map(PathBuf::from),
    })
}

/// Resolves the configuration. `env` looks up environment variables.
pub fn load_config(
    path: Option<&Path>,
    flags: &ConfigOverrides,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<AppConfig, ConfigError> {
    let file = match path {
        Some(p) => {
            let file_err = |reason: String| ConfigError::File {
                path: p.display().to_string(),
                reason,
            };
            let text = std::fs::read_to_string(p).map_err(|e| file_err(e.to_string()))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
            let obj = value
                .as_object()
                .ok_or_else(|| file_err("expected a JSON object".into()))?;
            file_layer(obj)?
        }
        None => Layer::default(),
    };
    let merged = Layer::from(flags).over(env_layer(env)?).over(file);

    let backend = merged
        .backend
        .ok_or_else(|| bad("backend", "no backend configured"))
        .and_then(|s| BackendSpec::parse(&s).map_err(|r| bad("backend", r)))?;
    let activation_phrase = merged
        .activation_phrase
        .unwrap_or_else(|| DEFAULT_ACTIVATION_PHRASE.into());
    if activation_phrase.trim().is_empty() {
        return Err(bad("activation_phrase", "must not be empty"));
    }
    let browser_endpoint = merged
        .browser_endpoint
        .unwrap_or_else(|| DEFAULT_ENDPOINT.into());
    if browser_endpoint.trim().is_empty() {
        return Err(bad("browser_endpoint", "must not be empty"));
    }
    Ok(AppConfig {
        browser_endpoint,
        backend,
        max_steps: merged.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        verify: merged.verify.unwrap_or(true),
        activation_phrase: activation_phrase.trim().to_string(),
        voice_enabled: merged.voice_enabled.unwrap_or(false),
        transcript_path: merged
            .transcript_path
            .unwrap_or_else(|| PathBuf::from(DEFAULT_TRANSCRIPT)),
    })
}

/// Looks variables up in the process environment.
pub fn process_env(name: &str) -> Option<String> {
    std::env::var(name).ok()
}
