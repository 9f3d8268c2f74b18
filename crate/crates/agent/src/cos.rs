//! Chain-of-Stage planning: decide the ordered design stages for a task.

use std::collections::BTreeMap;

use menter_llm::{ChatBackend, ChatMessage, Completion, LlmError};

use crate::prompts::{parse_stage_list, planning_request, PLANNER_SYSTEM};
use crate::task::TaskDef;

pub fn fallback_stages() -> Vec<String> {
    ["requirements", "topology", "parameter synthesis", "netlist"]
        .map(String::from)
        .to_vec()
}

/// Built-in templates. `bgr-default` is a reconstruction of the bandgap
/// reference stages, not a transcription of a published list.
pub fn builtin_templates() -> BTreeMap<String, Vec<String>> {
    let mut t = BTreeMap::new();
    t.insert("default".to_string(), fallback_stages());
    t.insert(
        "bgr-default".to_string(),
        ["design requirements", "PTAT and CTAT core", "parameter synthesis", "netlist"]
            .map(String::from)
            .to_vec(),
    );
    t
}

#[derive(Debug)]
pub struct Plan {
    pub stages: Vec<String>,
    /// The planning call, when one was made.
    pub call: Option<(Vec<ChatMessage>, Result<Completion, LlmError>)>,
    pub from_template: bool,
}

/// Pick the stages for `task`: a configured template verbatim, otherwise one
/// planning call parsed leniently, otherwise the fallback template.
pub fn cos_plan(
    task: &TaskDef,
    brief: &str,
    backend: &mut dyn ChatBackend,
    templates: &BTreeMap<String, Vec<String>>,
) -> Plan {
    if let Some(stages) = task.stage_template.as_ref().and_then(|name| templates.get(name)) {
        return Plan {
            stages: stages.clone(),
            call: None,
            from_template: true,
        };
    }
    let messages = vec![ChatMessage::system(PLANNER_SYSTEM), ChatMessage::user(planning_request(brief))];
    let reply = backend.complete(&messages);
    let stages = match &reply {
        Ok(c) => parse_stage_list(&c.content).unwrap_or_else(fallback_stages),
        Err(_) => fallback_stages(),
    };
    Plan {
        stages,
        call: Some((messages, reply)),
        from_template: false,
    }
}
