use std::thread;
use std::time::Duration;

use rand::Rng;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use crate::config::BackendConfig;
use crate::error::LlmError;
use crate::message::{ChatMessage, Role};
use crate::usage::TokenUsage;
use crate::{check_conversation, ChatBackend, Completion};

#[derive(Serialize)]
struct WireMessage<'a> {
    role: Role,
    content: &'a str,
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ResponseBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum Failure {
    Retryable(String),
    Fatal(LlmError),
}

/// Blocking client for an OpenAI-compatible chat-completions endpoint.
pub struct HttpBackend {
    client: Client,
    url: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    max_retries: u32,
    retry_base: Duration,
    attempts: u32,
}

impl HttpBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let client = Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::debug!("{} is unset; sending requests without a bearer token", config.api_key_env);
        }
        Ok(HttpBackend {
            client,
            url: config.url(),
            model: config.model.clone().unwrap_or_default(),
            temperature: config.temperature,
            api_key,
            max_retries: config.max_retries,
            retry_base: Duration::from_millis(config.retry_base_ms),
            attempts: 0,
        })
    }

    /// HTTP requests sent so far, retries included.
    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.retry_base.saturating_mul(1u32 << retry.min(16));
        let jitter = rand::thread_rng().gen_range(0.0..0.25);
        base.mul_f64(1.0 + jitter)
    }

    fn send_once(&mut self, body: &RequestBody<'_>) -> Result<Completion, Failure> {
        self.attempts += 1;
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                Failure::Retryable(e.to_string())
            } else {
                Failure::Fatal(LlmError::Protocol(e.to_string()))
            }
        })?;
        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED {
            return Err(Failure::Fatal(LlmError::AuthError));
        }
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            return Err(Failure::Retryable(format!("HTTP {}", status.as_u16())));
        }
        let text = resp.text().map_err(|e| Failure::Retryable(e.to_string()))?;
        if !status.is_success() {
            return Err(Failure::Fatal(LlmError::Rejected {
                status: status.as_u16(),
                body: text,
            }));
        }
        let parsed: ResponseBody =
            serde_json::from_str(&text).map_err(|e| Failure::Fatal(LlmError::Protocol(e.to_string())))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Failure::Fatal(LlmError::Protocol("response has no choices".into())))?;
        let usage = parsed
            .usage
            .map(|u| TokenUsage::new(u.prompt_tokens, u.completion_tokens))
            .unwrap_or_default();
        Ok(Completion {
            content: choice.message.content.unwrap_or_default(),
            usage,
            backend_id: self.model.clone(),
        })
    }
}

impl ChatBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.model
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        check_conversation(messages)?;
        let model = self.model.clone();
        let body = RequestBody {
            model: &model,
            messages: messages
                .iter()
                .map(|m| WireMessage {
                    role: m.role,
                    content: &m.content,
                })
                .collect(),
            temperature: self.temperature,
        };
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                let wait = self.backoff(attempt - 1);
                log::warn!("retrying {} in {:?} after: {last_error}", self.url, wait);
                thread::sleep(wait);
            }
            match self.send_once(&body) {
                Ok(c) => return Ok(c),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => last_error = msg,
            }
        }
        Err(LlmError::BackendUnavailable {
            attempts: self.max_retries + 1,
            last_error,
        })
    }
}
