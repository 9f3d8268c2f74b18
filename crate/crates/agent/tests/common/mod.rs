#![allow(dead_code)]

use std::path::PathBuf;

use menter_agent::{run_session, Hooks, RunConfig, Stores, TaskDef, TaskResult};
use menter_llm::{MockBackend, ScriptedReply};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn task(name: &str) -> TaskDef {
    TaskDef::load(&fixture(&format!("tasks/{name}.json"))).unwrap()
}

pub const PLAN: &str = "1. requirements\n2. topology\n3. parameter synthesis\n4. netlist";
pub const GOOD_DIVIDER: &str = "V1 in 0 5\nR1 in out 10k\nR2 out 0 10k\n";
pub const SYNTAX_DIVIDER: &str = "V1 in 0 5\nR1 in out\nR2 out 0 10k\n";
pub const OFF_SPEC_DIVIDER: &str = "V1 in 0 5\nR1 in out 10k\nR2 out 0 20k\n";

pub fn fenced(deck: &str) -> String {
    format!("## Stage 1: requirements\nhalve the supply\n## Stage 4: netlist\n```spice\n{deck}```\n")
}

pub fn mock(replies: &[&str]) -> MockBackend {
    MockBackend::new(replies.iter().map(|r| ScriptedReply::from(*r)).collect())
}

pub fn run(task: &TaskDef, replies: &[&str], stores: Stores<'_>) -> TaskResult {
    let mut b = mock(replies);
    run_session(task, &mut b, stores, &RunConfig::default(), Hooks::default())
}

/// Drafting calls, by the role recorded in the transcript.
pub fn drafting_calls(r: &TaskResult) -> Vec<&menter_agent::TranscriptRecord> {
    r.transcript.iter().filter(|t| t.agent == "circuit").collect()
}
