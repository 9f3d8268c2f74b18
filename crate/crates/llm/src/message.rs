use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

/// Keep the system prompt, the first non-system message and the latest
/// message, in their original order. Output never exceeds three messages.
pub fn truncate_history(history: &[ChatMessage]) -> Vec<ChatMessage> {
    let mut keep: Vec<usize> = Vec::with_capacity(3);
    if let Some(i) = history.iter().position(|m| m.role == Role::System) {
        keep.push(i);
    }
    if let Some(i) = history.iter().position(|m| m.role != Role::System) {
        keep.push(i);
    }
    if !history.is_empty() {
        keep.push(history.len() - 1);
    }
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter().map(|i| history[i].clone()).collect()
}
