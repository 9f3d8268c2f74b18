//! The design loop around a chat backend: stage planning, drafting,
//! executor and testbench validation, repair, and capture of working
//! designs. [`eval`] scores repeated runs.

pub mod cos;
pub mod eval;
pub mod executor;
pub mod guard;
pub mod pipeline;
pub mod prompts;
pub mod session;
pub mod task;
pub mod testbench;

pub use cos::{builtin_templates, cos_plan, fallback_stages, Plan};
pub use executor::{executor_validate, ValidationReport};
pub use guard::{loop_guard, signature, GuardDecision};
pub use pipeline::{run_session, run_task, Checkpoint, CheckpointAction, Hooks, RunConfig, Stores};
pub use session::{Phase, SessionState, TaskResult, TaskStatus, TranscriptRecord};
pub use task::{TaskDef, TaskError};
pub use testbench::{testbench_run, Component, SweepSummary, TestbenchReport, Verdict};
