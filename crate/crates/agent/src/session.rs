use std::io::Write;
use std::path::Path;

use menter_core::CheckOutcome;
use menter_knowledge::StageRecord;
use menter_llm::{ChatMessage, TokenUsage, UsageLedger};
use serde::{Deserialize, Serialize};

use crate::task::TaskDef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Intake,
    CosPlanning,
    Drafting,
    ExecutorCheck,
    Testbench,
    Repair,
    Done,
    Failed,
}

impl Phase {
    /// Edges of the session graph. Any phase may end in `Failed`.
    pub fn can_follow(self, prev: Phase) -> bool {
        use Phase::*;
        self == Failed && !matches!(prev, Done | Failed)
            || matches!(
                (prev, self),
                (Intake, CosPlanning)
                    | (CosPlanning, Drafting)
                    | (Drafting, ExecutorCheck)
                    | (ExecutorCheck, Testbench)
                    | (ExecutorCheck, Drafting)
                    | (Testbench, Done)
                    | (Testbench, Repair)
                    | (Repair, Drafting)
            )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskStatus {
    Success,
    Failed,
    LoopDetected,
    BudgetExceeded,
}

/// One backend call as persisted in a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub seq: usize,
    pub agent: String,
    pub messages: Vec<ChatMessage>,
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub usage: TokenUsage,
    /// Wall-clock time; omitted for the scripted backend so replays are byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

pub fn write_transcript(path: &Path, records: &[TranscriptRecord]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionState {
    pub task: TaskDef,
    pub phase: Phase,
    pub phase_trace: Vec<Phase>,
    pub planned_stages: Vec<String>,
    pub stages: Vec<StageRecord>,
    pub drafts: Vec<String>,
    pub error_signatures: Vec<String>,
    pub attempt: usize,
    pub usage: UsageLedger,
    pub transcript: Vec<TranscriptRecord>,
}

impl SessionState {
    pub fn new(task: TaskDef) -> Self {
        SessionState {
            task,
            phase: Phase::Intake,
            phase_trace: vec![Phase::Intake],
            planned_stages: Vec::new(),
            stages: Vec::new(),
            drafts: Vec::new(),
            error_signatures: Vec::new(),
            attempt: 0,
            usage: UsageLedger::default(),
            transcript: Vec::new(),
        }
    }

    pub fn enter(&mut self, next: Phase) {
        assert!(next.can_follow(self.phase), "illegal transition {:?} -> {next:?}", self.phase);
        self.phase = next;
        self.phase_trace.push(next);
    }

    pub fn record_call(
        &mut self,
        agent: &str,
        messages: &[ChatMessage],
        reply: Result<(&str, TokenUsage, &str), String>,
    ) {
        let (reply, usage, error, timestamp) = match reply {
            Ok((content, usage, backend)) => {
                self.usage.record(agent, usage);
                let ts = (backend != "mock")
                    .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true));
                (Some(content.to_string()), usage, None, ts)
            }
            Err(e) => (None, TokenUsage::default(), Some(e), None),
        };
        self.transcript.push(TranscriptRecord {
            seq: self.transcript.len(),
            agent: agent.to_string(),
            messages: messages.to_vec(),
            reply,
            error,
            usage,
            timestamp,
        });
    }

    pub fn over_budget(&self) -> bool {
        self.task.budget.is_some_and(|b| self.usage.total.total() > b)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub status: TaskStatus,
    pub final_netlist: Option<String>,
    /// Drafting calls made.
    pub iterations: usize,
    pub outcomes: Vec<CheckOutcome>,
    pub usage: UsageLedger,
    pub ctt_entry_id: Option<String>,
    pub note: Option<String>,
    pub stages: Vec<StageRecord>,
    pub phase_trace: Vec<Phase>,
    pub transcript: Vec<TranscriptRecord>,
}
