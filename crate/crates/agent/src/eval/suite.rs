//! Repeated attempts per task with fresh sessions, scored with pass@k.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use menter_llm::{BackendConfig, TokenUsage};
use serde::{Deserialize, Serialize};

use super::passk::{pass_at_k, EvalStats};
use crate::pipeline::{run_task, Hooks, RunConfig, Stores};
use crate::session::TaskStatus;
use crate::task::{TaskDef, TaskError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub status: TaskStatus,
    pub iterations: usize,
    pub usage: TokenUsage,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub task_id: String,
    pub n: u64,
    pub c: u64,
    /// Percentages.
    pub pass_at_1: f64,
    /// Blank when fewer than 5 attempts were made.
    pub pass_at_5: Option<f64>,
    /// Summed over attempts.
    pub usage: TokenUsage,
    pub attempts: Vec<AttemptRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteAverages {
    pub pass_at_1: f64,
    pub pass_at_5: Option<f64>,
    pub prompt_tokens: f64,
    pub completion_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub rows: Vec<SuiteRow>,
    pub avg: SuiteAverages,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub workers: usize,
    /// Transcripts go to `{dir}/{task_id}/attempt-{i}.jsonl`.
    pub transcript_dir: Option<PathBuf>,
}

/// A suite file: task definition paths, relative to the suite file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    tasks: Vec<PathBuf>,
}

pub fn load_suite(path: &Path) -> Result<Vec<TaskDef>, TaskError> {
    let text = std::fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: SuiteFile = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    file.tasks.iter().map(|p| TaskDef::load(&base.join(p))).collect()
}

fn percent(stats: EvalStats) -> Option<f64> {
    (stats.k <= stats.n).then(|| pass_at_k(stats).map(|p| p * 100.0).ok()).flatten()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { sum / n as f64 }
}

pub fn summarize(rows: Vec<SuiteRow>) -> SuiteResult {
    let pass_at_5 = rows
        .iter()
        .map(|r| r.pass_at_5)
        .collect::<Option<Vec<f64>>>()
        .filter(|v| !v.is_empty())
        .map(|v| mean(v.into_iter()));
    let avg = SuiteAverages {
        pass_at_1: mean(rows.iter().map(|r| r.pass_at_1)),
        pass_at_5,
        prompt_tokens: mean(rows.iter().map(|r| r.usage.prompt_tokens as f64)),
        completion_tokens: mean(rows.iter().map(|r| r.usage.completion_tokens as f64)),
    };
    SuiteResult { rows, avg }
}

fn run_one(
    task: &TaskDef,
    attempts: usize,
    backend: &BackendConfig,
    stores: Stores<'_>,
    config: &RunConfig,
    transcript_dir: Option<&Path>,
) -> SuiteRow {
    let mut records = Vec::with_capacity(attempts);
    let mut usage = TokenUsage::default();
    for attempt in 0..attempts {
        let hooks = Hooks {
            checkpoint: None,
            transcript: transcript_dir.map(|d| d.join(&task.task_id).join(format!("attempt-{attempt}.jsonl"))),
        };
        let r = run_task(task, backend, attempt, stores, config, hooks);
        usage += r.usage.total;
        records.push(AttemptRecord { status: r.status, iterations: r.iterations, usage: r.usage.total, note: r.note });
    }
    let n = attempts as u64;
    let c = records.iter().filter(|r| r.status == TaskStatus::Success).count() as u64;
    SuiteRow {
        task_id: task.task_id.clone(),
        n,
        c,
        pass_at_1: percent(EvalStats { n, c, k: 1 }).unwrap_or(0.0),
        pass_at_5: percent(EvalStats { n, c, k: 5 }),
        usage,
        attempts: records,
    }
}

/// Run every task `attempts` times. Tasks are spread over `workers`
/// threads; rows come back in task order whatever the interleaving.
///
/// Intake sees the think-tank as it was when the suite started, so
/// captures from one task cannot change another task's prompts.
pub fn run_suite(
    tasks: &[TaskDef],
    attempts: usize,
    backend: &BackendConfig,
    stores: Stores<'_>,
    config: &RunConfig,
    options: &SuiteOptions,
) -> SuiteResult {
    assert!(attempts >= 1, "attempts must be at least 1");
    let view = match (stores.prior, stores.ctt) {
        (None, Some(c)) => Some(c.view()),
        _ => None,
    };
    let stores = Stores { prior: stores.prior.or(view.as_ref()), ..stores };
    let workers = options.workers.clamp(1, tasks.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SuiteRow>>> = Mutex::new(vec![None; tasks.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                let row = run_one(task, attempts, backend, stores, config, options.transcript_dir.as_deref());
                slots.lock().unwrap()[i] = Some(row);
            });
        }
    });
    let rows = slots.into_inner().unwrap().into_iter().map(|r| r.expect("every task ran")).collect();
    summarize(rows)
}
