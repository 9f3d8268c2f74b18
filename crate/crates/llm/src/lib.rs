//! Chat-completion plumbing for the design agents.
//!
//! Two backends implement [`ChatBackend`]: [`HttpBackend`] speaks the
//! OpenAI-compatible `/v1/chat/completions` wire format, and [`MockBackend`]
//! replays a script so whole agent sessions can run offline.

mod config;
mod error;
mod http;
mod message;
mod mock;
mod usage;

pub use config::{BackendConfig, BackendKind};
pub use error::LlmError;
pub use http::HttpBackend;
pub use message::{truncate_history, ChatMessage, Role};
pub use mock::{MockBackend, MockScript, ScriptedReply};
pub use usage::{whitespace_tokens, TokenUsage, UsageLedger};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub content: String,
    pub usage: TokenUsage,
    pub backend_id: String,
}

pub trait ChatBackend: Send {
    /// Identifier recorded with every completion (`mock`, or the model name).
    fn id(&self) -> &str;

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<Completion, LlmError>;
}

/// Reject conversations the wire format cannot express.
pub fn check_conversation(messages: &[ChatMessage]) -> Result<(), LlmError> {
    match messages.first() {
        None => Err(LlmError::EmptyConversation),
        Some(m) if m.role != Role::System => Err(LlmError::NoSystemPrompt),
        Some(_) => Ok(()),
    }
}

/// One-shot call: build a backend from `config` and send `messages`.
pub fn complete(config: &BackendConfig, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
    let mut backend = open_backend(config, None, 0)?;
    backend.complete(messages)
}

/// Open a backend for one agent session.
///
/// For the mock kind, `task_id` and `attempt` select which scripted session
/// is replayed; the HTTP kind ignores them.
pub fn open_backend(
    config: &BackendConfig,
    task_id: Option<&str>,
    attempt: usize,
) -> Result<Box<dyn ChatBackend>, LlmError> {
    config.validate()?;
    match config.kind {
        BackendKind::Http => Ok(Box::new(HttpBackend::new(config)?)),
        BackendKind::Mock => {
            let path = config.script.as_ref().expect("validated");
            let script = MockScript::load(path)?;
            Ok(Box::new(script.session(task_id, attempt)))
        }
    }
}
