use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::LlmError;
use crate::message::ChatMessage;
use crate::usage::{whitespace_tokens, TokenUsage};
use crate::{check_conversation, ChatBackend, Completion};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedReply {
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

impl From<&str> for ScriptedReply {
    fn from(s: &str) -> Self {
        ScriptedReply {
            content: s.to_string(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

type Session = Vec<ScriptedReply>;

/// A mock script document.
///
/// Accepted shapes:
/// * `[reply, ...]`: one session, replayed from the start for every attempt;
/// * `{"sessions": [[reply, ...], ...]}`: attempt `i` replays `sessions[i % len]`;
/// * `{"tasks": {"<task_id>": <either shape above>}, "default": <either shape>}`.
///
/// A reply is either a string or `{content, prompt_tokens?, completion_tokens?}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MockScript {
    default: Vec<Session>,
    tasks: BTreeMap<String, Vec<Session>>,
}

impl MockScript {
    pub fn single(replies: Vec<ScriptedReply>) -> Self {
        MockScript {
            default: vec![replies],
            tasks: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let err = |reason: String| LlmError::Script {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json(&text).map_err(err)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let Some(tasks) = v.get("tasks") {
            let obj = tasks.as_object().ok_or("`tasks` must be an object")?;
            let mut out = MockScript::default();
            for (id, body) in obj {
                out.tasks.insert(id.clone(), sessions(body).map_err(|e| format!("tasks.{id}: {e}"))?);
            }
            if let Some(d) = v.get("default") {
                out.default = sessions(d).map_err(|e| format!("default: {e}"))?;
            }
            return Ok(out);
        }
        Ok(MockScript {
            default: sessions(&v)?,
            tasks: BTreeMap::new(),
        })
    }

    /// Backend replaying the session scripted for (`task_id`, `attempt`).
    /// An unscripted task gets an empty session that is exhausted at once.
    pub fn session(&self, task_id: Option<&str>, attempt: usize) -> MockBackend {
        let pool = task_id.and_then(|t| self.tasks.get(t)).unwrap_or(&self.default);
        let replies = if pool.is_empty() {
            Vec::new()
        } else {
            pool[attempt % pool.len()].clone()
        };
        MockBackend::new(replies)
    }
}

fn sessions(v: &Value) -> Result<Vec<Session>, String> {
    match v {
        Value::Array(_) => Ok(vec![session(v)?]),
        Value::Object(o) => {
            let list = o
                .get("sessions")
                .and_then(Value::as_array)
                .ok_or("expected a reply array or {\"sessions\": [...]}")?;
            list.iter().enumerate().map(|(i, s)| session(s).map_err(|e| format!("sessions[{i}]: {e}"))).collect()
        }
        _ => Err("expected a reply array or {\"sessions\": [...]}".into()),
    }
}

fn session(v: &Value) -> Result<Session, String> {
    let arr = v.as_array().ok_or("session must be an array")?;
    arr.iter()
        .enumerate()
        .map(|(i, r)| match r {
            Value::String(s) => Ok(ScriptedReply::from(s.as_str())),
            other => serde_json::from_value(other.clone()).map_err(|e| format!("reply {i}: {e}")),
        })
        .collect()
}

/// Replays scripted replies in order.
#[derive(Debug, Clone)]
pub struct MockBackend {
    replies: Vec<ScriptedReply>,
    next: usize,
}

impl MockBackend {
    pub fn new(replies: Vec<ScriptedReply>) -> Self {
        MockBackend { replies, next: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.replies.len() - self.next
    }
}

impl ChatBackend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        check_conversation(messages)?;
        let reply = self
            .replies
            .get(self.next)
            .ok_or(LlmError::ScriptExhausted { served: self.next })?;
        self.next += 1;
        let prompt = reply
            .prompt_tokens
            .unwrap_or_else(|| messages.iter().map(|m| whitespace_tokens(&m.content)).sum());
        let completion = reply.completion_tokens.unwrap_or_else(|| whitespace_tokens(&reply.content));
        Ok(Completion {
            content: reply.content.clone(),
            usage: TokenUsage::new(prompt, completion),
            backend_id: "mock".to_string(),
        })
    }
}
