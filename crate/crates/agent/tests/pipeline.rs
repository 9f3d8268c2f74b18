mod common;

use common::*;
use menter_agent::{
    executor_validate, run_session, testbench_run, Checkpoint, CheckpointAction, Hooks, Phase, RunConfig, Stores,
    TaskStatus,
};
use menter_core::{ErcConfig, SolverOptions};
use menter_knowledge::CttStore;

#[test]
fn repairs_a_broken_draft_on_the_second_iteration() {
    let t = task("divider");
    let r = run(&t, &[PLAN, &fenced(SYNTAX_DIVIDER), &fenced(GOOD_DIVIDER)], Stores::default());
    assert_eq!(r.status, TaskStatus::Success, "{:?}", r.note);
    assert_eq!(r.iterations, 2);
    let repair = &drafting_calls(&r)[1].messages;
    let last = &repair.last().unwrap().content;
    assert!(last.contains("SYNTAX") || last.contains("line 2"), "{last}");
}

#[test]
fn three_iteration_trace_writes_one_proven_entry() {
    let dir = tempfile::tempdir().unwrap();
    let store = CttStore::open(dir.path().join("ctt.jsonl")).unwrap();
    let t = task("divider");
    let r = run(
        &t,
        &[PLAN, &fenced(SYNTAX_DIVIDER), &fenced(OFF_SPEC_DIVIDER), &fenced(GOOD_DIVIDER)],
        Stores { ctt: Some(&store), ..Stores::default() },
    );
    assert_eq!(r.status, TaskStatus::Success);
    assert_eq!(r.iterations, 3);
    let drafts = drafting_calls(&r);
    assert_eq!(drafts.len(), 3);
    assert!(drafts.iter().all(|c| c.messages.len() <= 3));

    store.reload().unwrap();
    let entries = store.entries();
    assert_eq!(entries.len(), 1);
    assert_eq!(Some(&entries[0].entry_id), r.ctt_entry_id.as_ref());

    let (report, deck) = executor_validate(&entries[0].netlist, &ErcConfig::default(), &SolverOptions::default());
    assert!(report.ok, "{:?}", report.message);
    let tb = testbench_run(&deck.unwrap(), &t.spec, &ErcConfig::default(), &SolverOptions::default());
    assert!(tb.passed, "{:?}", tb.failures);
}

#[test]
fn second_repair_prompt_cites_the_spec_failure() {
    let t = task("divider");
    let r = run(
        &t,
        &[PLAN, &fenced(SYNTAX_DIVIDER), &fenced(OFF_SPEC_DIVIDER), &fenced(GOOD_DIVIDER)],
        Stores::default(),
    );
    let third = &drafting_calls(&r)[2].messages;
    assert!(third.last().unwrap().content.contains("OPPOINT:"));
    assert_eq!(third[0].role, menter_llm::Role::System);
}

#[test]
fn repeating_failure_trips_the_loop_guard() {
    let t = task("divider");
    let bad = fenced(OFF_SPEC_DIVIDER);
    let r = run(&t, &[PLAN, &bad, &bad, &bad, &fenced(GOOD_DIVIDER)], Stores::default());
    assert_eq!(r.status, TaskStatus::LoopDetected);
    assert_eq!(r.iterations, 3);
    assert!(r.final_netlist.is_none());
}

#[test]
fn single_iteration_cap_fails() {
    let mut t = task("divider");
    t.max_iterations = 1;
    let r = run(&t, &[PLAN, &fenced(SYNTAX_DIVIDER), &fenced(GOOD_DIVIDER)], Stores::default());
    assert_eq!(r.status, TaskStatus::Failed);
    assert_eq!(r.iterations, 1);
}

#[test]
fn budget_ceiling_stops_the_session_and_keeps_partial_work() {
    let mut t = task("divider");
    t.budget = Some(50);
    let r = run(&t, &[PLAN, &fenced(SYNTAX_DIVIDER), &fenced(GOOD_DIVIDER)], Stores::default());
    assert_eq!(r.status, TaskStatus::BudgetExceeded);
    assert!(r.usage.total.total() > 50);
    assert!(!r.transcript.is_empty());
}

#[test]
fn template_skips_the_planning_call() {
    let mut t = task("divider");
    t.stage_template = Some("default".into());
    let r = run(&t, &[&fenced(GOOD_DIVIDER)], Stores::default());
    assert_eq!(r.status, TaskStatus::Success);
    assert!(r.transcript.iter().all(|c| c.agent != "cos"));
    assert_eq!(r.stages.len(), 4);
}

#[test]
fn prose_plan_falls_back_to_default_stages() {
    let t = task("divider");
    let r = run(&t, &["I would start by thinking about it.", &fenced(GOOD_DIVIDER)], Stores::default());
    assert_eq!(r.status, TaskStatus::Success);
    let names: Vec<_> = r.stages.iter().map(|s| s.stage_name.as_str()).collect();
    assert_eq!(names, menter_agent::fallback_stages());
}

#[test]
fn stage_outputs_follow_markers() {
    let t = task("divider");
    let r = run(&t, &[PLAN, &fenced(GOOD_DIVIDER)], Stores::default());
    assert_eq!(r.stages[0].output, "halve the supply");
    assert!(r.stages[1].output.is_empty());
    assert!(r.stages[3].output.contains("R2 out 0 10k"));
}

#[test]
fn exhausted_script_is_a_failure_not_a_panic() {
    let t = task("divider");
    let r = run(&t, &[PLAN], Stores::default());
    assert_eq!(r.status, TaskStatus::Failed);
    assert!(r.note.unwrap().contains("backend"));
}

#[test]
fn phase_trace_follows_the_graph() {
    let t = task("divider");
    let r = run(
        &t,
        &[PLAN, &fenced(SYNTAX_DIVIDER), &fenced(OFF_SPEC_DIVIDER), &fenced(GOOD_DIVIDER)],
        Stores::default(),
    );
    use Phase::*;
    assert_eq!(
        r.phase_trace,
        [
            Intake, CosPlanning, Drafting, ExecutorCheck, Drafting, ExecutorCheck, Testbench, Repair, Drafting,
            ExecutorCheck, Testbench, Done
        ]
    );
}

struct Scripted(Vec<CheckpointAction>, Vec<Phase>);

impl Checkpoint for Scripted {
    fn review(&mut self, phase: Phase, _artifact: &str) -> CheckpointAction {
        self.1.push(phase);
        if self.0.is_empty() { CheckpointAction::Approve } else { self.0.remove(0) }
    }
}

#[test]
fn checkpoint_edit_replaces_the_draft() {
    let t = task("divider");
    let mut b = mock(&[PLAN, &fenced(SYNTAX_DIVIDER)]);
    let mut cp = Scripted(vec![CheckpointAction::Approve, CheckpointAction::Edit(GOOD_DIVIDER.into())], vec![]);
    let hooks = Hooks { checkpoint: Some(&mut cp), transcript: None };
    let r = run_session(&t, &mut b, Stores::default(), &RunConfig::default(), hooks);
    assert_eq!(r.status, TaskStatus::Success);
    assert_eq!(cp.1, [Phase::CosPlanning, Phase::Drafting, Phase::Done]);
}

#[test]
fn checkpoint_abort_stops_before_drafting() {
    let t = task("divider");
    let mut b = mock(&[PLAN, &fenced(GOOD_DIVIDER)]);
    let mut cp = Scripted(vec![CheckpointAction::Abort], vec![]);
    let hooks = Hooks { checkpoint: Some(&mut cp), transcript: None };
    let r = run_session(&t, &mut b, Stores::default(), &RunConfig::default(), hooks);
    assert_eq!(r.status, TaskStatus::Failed);
    assert_eq!(r.iterations, 0);
    assert_eq!(b.remaining(), 1);
}

#[test]
fn transcript_is_written_without_timestamps_for_mock() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t/attempt-0.jsonl");
    let t = task("divider");
    let mut b = mock(&[PLAN, &fenced(GOOD_DIVIDER)]);
    let hooks = Hooks { checkpoint: None, transcript: Some(path.clone()) };
    let r = run_session(&t, &mut b, Stores::default(), &RunConfig::default(), hooks);
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), r.transcript.len());
    assert!(!text.contains("timestamp"));
    let first: menter_agent::TranscriptRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first, r.transcript[0]);
}

#[test]
fn prior_designs_reach_the_prompt() {
    let dir = tempfile::tempdir().unwrap();
    let store = CttStore::open(dir.path().join("ctt.jsonl")).unwrap();
    let t = task("divider");
    run(&t, &[PLAN, &fenced(GOOD_DIVIDER)], Stores { ctt: Some(&store), ..Stores::default() });
    let again = run(&t, &[PLAN, &fenced(GOOD_DIVIDER)], Stores { ctt: Some(&store), ..Stores::default() });
    let planning = &again.transcript[0].messages[1].content;
    assert!(planning.contains("Solved designs"), "{planning}");
    assert_eq!(store.len(), 1);
}
