//! The design session: intake, stage planning, drafting, executor gate,
//! testbench, and repair, until success or a terminal condition.

use std::collections::BTreeMap;
use std::path::PathBuf;

use menter_core::{emit, ErcConfig, SolverOptions};
use menter_knowledge::{CorpusIndex, CttEntry, CttStore, CttView};
use menter_llm::{open_backend, truncate_history, BackendConfig, ChatBackend, ChatMessage, LlmError};

use crate::cos::{builtin_templates, cos_plan};
use crate::executor::executor_validate;
use crate::guard::{loop_guard, signature, GuardDecision};
use crate::prompts::{brief, drafting_request, extract_netlist, repair_request, stage_records, CIRCUIT_SYSTEM};
use crate::session::{write_transcript, Phase, SessionState, TaskResult, TaskStatus};
use crate::task::TaskDef;
use crate::testbench::testbench_run;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub erc: ErcConfig,
    pub solver: SolverOptions,
    /// Retrieved chunks and prior designs injected at intake, each.
    pub retrieval_k: usize,
    pub templates: BTreeMap<String, Vec<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            erc: ErcConfig::default(),
            solver: SolverOptions::default(),
            retrieval_k: 3,
            templates: builtin_templates(),
        }
    }
}

#[derive(Clone, Copy, Default)]
pub struct Stores<'a> {
    /// Where successful designs are captured.
    pub ctt: Option<&'a CttStore>,
    /// Prior designs consulted at intake. Falls back to `ctt` when unset.
    pub prior: Option<&'a CttView>,
    pub corpus: Option<&'a CorpusIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckpointAction {
    Approve,
    /// Replace the artifact under review.
    Edit(String),
    Abort,
}

/// Human review at phase transitions. The artifact is the stage list (one
/// per line) after planning, the draft after drafting, and the final deck
/// before it is stored.
pub trait Checkpoint {
    fn review(&mut self, phase: Phase, artifact: &str) -> CheckpointAction;
}

#[derive(Default)]
pub struct Hooks<'a> {
    pub checkpoint: Option<&'a mut dyn Checkpoint>,
    /// JSON-lines transcript written when the session ends.
    pub transcript: Option<PathBuf>,
}

enum Review {
    Keep,
    Replace(String),
    Abort,
}

fn review(hooks: &mut Hooks<'_>, phase: Phase, artifact: &str) -> Review {
    match hooks.checkpoint.as_mut().map(|c| c.review(phase, artifact)) {
        None | Some(CheckpointAction::Approve) => Review::Keep,
        Some(CheckpointAction::Edit(s)) => Review::Replace(s),
        Some(CheckpointAction::Abort) => Review::Abort,
    }
}

/// Open a fresh backend session for (`task`, `attempt`) and run it.
pub fn run_task(
    task: &TaskDef,
    backend: &BackendConfig,
    attempt: usize,
    stores: Stores<'_>,
    config: &RunConfig,
    hooks: Hooks<'_>,
) -> TaskResult {
    match open_backend(backend, Some(&task.task_id), attempt) {
        Ok(mut b) => run_session(task, b.as_mut(), stores, config, hooks),
        Err(e) => {
            let mut s = SessionState::new(task.clone());
            s.enter(Phase::Failed);
            finish(s, TaskStatus::Failed, Some(format!("backend unavailable: {e}")), None, vec![], None, &hooks)
        }
    }
}

fn finish(
    s: SessionState,
    status: TaskStatus,
    note: Option<String>,
    final_netlist: Option<String>,
    outcomes: Vec<menter_core::CheckOutcome>,
    ctt_entry_id: Option<String>,
    hooks: &Hooks<'_>,
) -> TaskResult {
    let mut note = note;
    if let Some(path) = &hooks.transcript {
        if let Err(e) = write_transcript(path, &s.transcript) {
            log::error!("cannot write transcript {}: {e}", path.display());
            note = Some(match note {
                Some(n) => format!("{n}; transcript not written: {e}"),
                None => format!("transcript not written: {e}"),
            });
        }
    }
    TaskResult {
        task_id: s.task.task_id.clone(),
        status,
        final_netlist,
        iterations: s.attempt,
        outcomes,
        usage: s.usage,
        ctt_entry_id,
        note,
        stages: s.stages,
        phase_trace: s.phase_trace,
        transcript: s.transcript,
    }
}

fn backend_note(e: &LlmError) -> String {
    match e {
        LlmError::BackendUnavailable { .. } => format!("backend unavailable: {e}"),
        _ => format!("backend error: {e}"),
    }
}

/// Run one design session against an already-open backend.
pub fn run_session(
    task: &TaskDef,
    backend: &mut dyn ChatBackend,
    stores: Stores<'_>,
    config: &RunConfig,
    mut hooks: Hooks<'_>,
) -> TaskResult {
    let mut s = SessionState::new(task.clone());
    if let Err(e) = task.validate() {
        s.enter(Phase::Failed);
        return finish(s, TaskStatus::Failed, Some(e.to_string()), None, vec![], None, &hooks);
    }

    // Intake: retrieval only, no backend call.
    let query = format!("{} {} {}", task.title, task.prompt, task.spec.describe());
    let chunks = stores.corpus.map(|c| c.retrieve(&query, config.retrieval_k)).unwrap_or_default();
    let prior = match (stores.prior, stores.ctt) {
        (Some(v), _) => v.query(&query, config.retrieval_k),
        (None, Some(c)) => c.query(&query, config.retrieval_k),
        (None, None) => Vec::new(),
    };
    let brief = brief(task, &chunks, &prior);

    s.enter(Phase::CosPlanning);
    let plan = cos_plan(task, &brief, backend, &config.templates);
    if let Some((messages, reply)) = &plan.call {
        match reply {
            Ok(c) => s.record_call("cos", messages, Ok((&c.content, c.usage, &c.backend_id))),
            Err(e) => s.record_call("cos", messages, Err(e.to_string())),
        }
        if s.over_budget() {
            s.enter(Phase::Failed);
            return finish(s, TaskStatus::BudgetExceeded, Some("token budget exhausted during planning".into()), None, vec![], None, &hooks);
        }
        if let Err(e) = reply {
            log::warn!("{}: planning call failed ({e}); using fallback stages", task.task_id);
        }
    }
    s.planned_stages = plan.stages;
    match review(&mut hooks, Phase::CosPlanning, &s.planned_stages.join("\n")) {
        Review::Keep => {}
        Review::Replace(text) => {
            let edited: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
            if !edited.is_empty() {
                s.planned_stages = edited;
            }
        }
        Review::Abort => {
            s.enter(Phase::Failed);
            return finish(s, TaskStatus::Failed, Some("aborted at planning checkpoint".into()), None, vec![], None, &hooks);
        }
    }

    let opening = drafting_request(&brief, &s.planned_stages);
    let mut history = vec![ChatMessage::system(CIRCUIT_SYSTEM), ChatMessage::user(opening)];
    let mut last_outcomes = Vec::new();

    while s.attempt < task.max_iterations {
        s.enter(Phase::Drafting);
        s.attempt += 1;
        let messages = truncate_history(&history);
        let prompt_sent = messages.last().map(|m| m.content.clone()).unwrap_or_default();
        let reply = backend.complete(&messages);
        let completion = match reply {
            Ok(c) => {
                s.record_call("circuit", &messages, Ok((&c.content, c.usage, &c.backend_id)));
                c
            }
            Err(e) => {
                s.record_call("circuit", &messages, Err(e.to_string()));
                s.enter(Phase::Failed);
                return finish(s, TaskStatus::Failed, Some(backend_note(&e)), None, last_outcomes, None, &hooks);
            }
        };
        s.stages = stage_records(&completion.content, &s.planned_stages, &prompt_sent);
        let mut draft = extract_netlist(&completion.content);
        match review(&mut hooks, Phase::Drafting, &draft) {
            Review::Keep => {}
            Review::Replace(d) => draft = d,
            Review::Abort => {
                s.enter(Phase::Failed);
                return finish(s, TaskStatus::Failed, Some("aborted at drafting checkpoint".into()), None, last_outcomes, None, &hooks);
            }
        }
        s.drafts.push(draft.clone());
        history.push(ChatMessage::assistant(completion.content));
        if s.over_budget() {
            s.enter(Phase::Failed);
            return finish(s, TaskStatus::BudgetExceeded, Some("token budget exhausted".into()), None, last_outcomes, None, &hooks);
        }

        s.enter(Phase::ExecutorCheck);
        let (report, deck) = executor_validate(&draft, &config.erc, &config.solver);
        let failures: Vec<String>;
        let code: String;
        if report.ok {
            let deck = deck.expect("validated deck");
            s.enter(Phase::Testbench);
            let tb = testbench_run(&deck, &task.spec, &config.erc, &config.solver);
            last_outcomes = tb.outcomes.clone();
            if tb.passed {
                let netlist = emit(&deck);
                match review(&mut hooks, Phase::Done, &netlist) {
                    Review::Abort => {
                        s.enter(Phase::Failed);
                        return finish(s, TaskStatus::Failed, Some("aborted before capture".into()), None, last_outcomes, None, &hooks);
                    }
                    Review::Keep | Review::Replace(_) => {}
                }
                s.enter(Phase::Done);
                let (entry_id, note) = capture(&s, stores.ctt, &netlist, hooks.transcript.as_ref());
                return finish(s, TaskStatus::Success, note, Some(netlist), last_outcomes, entry_id, &hooks);
            }
            s.enter(Phase::Repair);
            code = tb
                .failures
                .iter()
                .map(|f| f.split(':').next().unwrap_or_default())
                .collect::<Vec<_>>()
                .join(",");
            failures = tb.failures;
        } else {
            code = report.code.clone().unwrap_or_default();
            failures = vec![report.message.clone().unwrap_or_default()];
        }

        s.error_signatures.push(signature(&code, &failures.join("\n")));
        if loop_guard(&s.error_signatures, task.loop_threshold) == GuardDecision::Terminate {
            s.enter(Phase::Failed);
            let note = format!("same failure {} times in a row: {}", task.loop_threshold, failures.join("; "));
            return finish(s, TaskStatus::LoopDetected, Some(note), None, last_outcomes, None, &hooks);
        }
        history.push(ChatMessage::user(repair_request(&s.planned_stages, &failures, &draft)));
    }

    s.enter(Phase::Failed);
    let note = format!("no passing design after {} iteration(s)", task.max_iterations);
    finish(s, TaskStatus::Failed, Some(note), None, last_outcomes, None, &hooks)
}

fn capture(
    s: &SessionState,
    ctt: Option<&CttStore>,
    netlist: &str,
    transcript: Option<&PathBuf>,
) -> (Option<String>, Option<String>) {
    let Some(store) = ctt else { return (None, None) };
    let history = transcript.map(|p| p.display().to_string());
    let put = CttEntry::new(&s.task.title, s.task.spec.clone(), s.stages.clone(), netlist, history)
        .and_then(|e| store.put(&e));
    match put {
        Ok(id) => (Some(id), None),
        Err(e) => {
            log::error!("{}: think-tank write failed: {e}", s.task.task_id);
            (None, Some(format!("think-tank write failed: {e}")))
        }
    }
}
