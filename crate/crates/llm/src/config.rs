use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Base URL; `/v1/chat/completions` is appended unless already present.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: f64,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    /// Mock script path (JSON).
    pub script: Option<PathBuf>,
    /// First backoff delay; doubles per retry.
    pub retry_base_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model: None,
            temperature: 0.2,
            timeout_s: 60.0,
            max_retries: 3,
            api_key_env: "MENTER_API_KEY".to_string(),
            script: None,
            retry_base_ms: 1000,
        }
    }
}

impl BackendConfig {
    pub fn mock(script: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            script: Some(script.into()),
            ..Default::default()
        }
    }

    pub fn http(endpoint: &str, model: &str) -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            endpoint: Some(endpoint.to_string()),
            model: Some(model.to_string()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.kind {
            BackendKind::Http => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    return Err(LlmError::Config("http backend requires `endpoint`".into()));
                }
                if self.model.as_deref().is_none_or(str::is_empty) {
                    return Err(LlmError::Config("http backend requires `model`".into()));
                }
                if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
                    return Err(LlmError::Config(format!("timeout_s must be positive, got {}", self.timeout_s)));
                }
            }
            BackendKind::Mock => {
                if self.script.is_none() {
                    return Err(LlmError::Config("mock backend requires `script`".into()));
                }
            }
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }

    pub fn url(&self) -> String {
        let base = self.endpoint.as_deref().unwrap_or_default().trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }
}
