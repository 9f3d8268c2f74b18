use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("conversation has no messages")]
    EmptyConversation,
    #[error("conversation must open with a system message")]
    NoSystemPrompt,
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("backend unavailable after {attempts} attempt(s): {last_error}")]
    BackendUnavailable { attempts: u32, last_error: String },
    #[error("backend rejected credentials (HTTP 401)")]
    AuthError,
    #[error("backend returned HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("mock script exhausted after {served} repl(ies)")]
    ScriptExhausted { served: usize },
    #[error("cannot load mock script {path}: {reason}")]
    Script { path: String, reason: String },
}
