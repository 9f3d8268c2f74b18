use std::path::Path;

use menter_core::SpecRequirement;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TASK_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("task JSON is invalid: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid task: {0}")]
    Invalid(String),
}

/// A design request with the functional checks that define success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDef {
    #[serde(default = "task_version")]
    pub version: u32,
    pub task_id: String,
    pub title: String,
    pub prompt: String,
    pub spec: SpecRequirement,
    /// Named stage template; skips the planning call when it resolves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_template: Option<String>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Ceiling on prompt + completion tokens for the whole session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Identical consecutive failure signatures that end the session.
    #[serde(default = "default_loop_threshold")]
    pub loop_threshold: usize,
}

fn task_version() -> u32 {
    TASK_VERSION
}

fn default_max_iterations() -> usize {
    8
}

fn default_loop_threshold() -> usize {
    3
}

impl TaskDef {
    pub fn new(task_id: &str, title: &str, prompt: &str, spec: SpecRequirement) -> Self {
        TaskDef {
            version: TASK_VERSION,
            task_id: task_id.to_string(),
            title: title.to_string(),
            prompt: prompt.to_string(),
            spec,
            stage_template: None,
            max_iterations: default_max_iterations(),
            budget: None,
            loop_threshold: default_loop_threshold(),
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.version != TASK_VERSION {
            return Err(TaskError::Invalid(format!("unsupported version {}", self.version)));
        }
        if self.task_id.trim().is_empty() {
            return Err(TaskError::Invalid("task_id is empty".into()));
        }
        if self.prompt.trim().is_empty() {
            return Err(TaskError::Invalid("prompt is empty".into()));
        }
        if self.max_iterations == 0 {
            return Err(TaskError::Invalid("max_iterations must be at least 1".into()));
        }
        if self.loop_threshold < 2 {
            return Err(TaskError::Invalid("loop_threshold must be at least 2".into()));
        }
        self.spec.validate().map_err(|e| TaskError::Invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let t: TaskDef = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaskError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_guards() {
        let t = TaskDef::from_json(r#"{"task_id":"t","title":"T","prompt":"make it","spec":{"checks":[]}}"#).unwrap();
        assert_eq!((t.max_iterations, t.loop_threshold, t.budget), (8, 3, None));
        assert!(TaskDef::from_json(r#"{"task_id":"t","title":"T","prompt":" ","spec":{"checks":[]}}"#).is_err());
        assert!(TaskDef::from_json(
            r#"{"task_id":"t","title":"T","prompt":"p","spec":{"checks":[]},"max_iterations":0}"#
        )
        .is_err());
        assert!(TaskDef::from_json(r#"{"task_id":"t","title":"T","prompt":"p","spec":{"checks":[]},"extra":1}"#).is_err());
    }
}
