mod common;

use std::path::Path;

use common::*;
use menter_agent::eval::{
    load_suite, render_report, run_suite, summarize, ReportFormat, SuiteOptions, SuiteResult, SuiteRow, CSV_HEADER,
};
use menter_agent::{RunConfig, Stores, TaskDef, TaskStatus};
use menter_knowledge::CttStore;
use menter_llm::{BackendConfig, TokenUsage};
use serde_json::json;

fn quick_task(id: &str) -> TaskDef {
    let mut t = task("divider");
    t.task_id = id.to_string();
    t.stage_template = Some("default".into());
    t.max_iterations = 1;
    t
}

/// Mock script where attempt i of each task passes iff `pattern[i]` is true.
fn script(dir: &Path, patterns: &[(&str, &[bool])]) -> BackendConfig {
    let good = fenced(GOOD_DIVIDER);
    let bad = fenced(SYNTAX_DIVIDER);
    let mut tasks = serde_json::Map::new();
    for (id, pattern) in patterns {
        let sessions: Vec<_> = pattern.iter().map(|&ok| json!([if ok { &good } else { &bad }])).collect();
        tasks.insert(id.to_string(), json!({ "sessions": sessions }));
    }
    let path = dir.join(format!("script-{}.json", patterns.len()));
    std::fs::write(&path, serde_json::to_string(&json!({ "tasks": tasks })).unwrap()).unwrap();
    BackendConfig::mock(path)
}

fn suite(tasks: &[TaskDef], attempts: usize, cfg: &BackendConfig, workers: usize) -> SuiteResult {
    let options = SuiteOptions { workers, transcript_dir: None };
    run_suite(tasks, attempts, cfg, Stores::default(), &RunConfig::default(), &options)
}

#[test]
fn endpoints_average_to_fifty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = script(dir.path(), &[("all", &[true; 5]), ("none", &[false; 5])]);
    let r = suite(&[quick_task("all"), quick_task("none")], 5, &cfg, 1);
    assert_eq!((r.rows[0].pass_at_1, r.rows[1].pass_at_1), (100.0, 0.0));
    assert_eq!((r.rows[0].pass_at_5, r.rows[1].pass_at_5), (Some(100.0), Some(0.0)));
    assert_eq!(r.avg.pass_at_1, 50.0);
}

#[test]
fn three_of_five_gives_sixty_and_hundred() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = script(dir.path(), &[("t", &[true, false, true, false, true])]);
    let r = suite(&[quick_task("t")], 5, &cfg, 1);
    let row = &r.rows[0];
    assert_eq!((row.n, row.c), (5, 3));
    assert_eq!(row.pass_at_1, 60.0);
    assert_eq!(row.pass_at_5, Some(100.0));
    let statuses: Vec<_> = row.attempts.iter().map(|a| a.status).collect();
    use TaskStatus::*;
    assert_eq!(statuses, [Success, Failed, Success, Failed, Success]);
}

#[test]
fn single_attempt_leaves_pass_at_five_blank() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = script(dir.path(), &[("t", &[true])]);
    let r = suite(&[quick_task("t")], 1, &cfg, 1);
    assert_eq!(r.rows[0].pass_at_5, None);
    assert_eq!(r.avg.pass_at_5, None);
    let md = render_report(&r, ReportFormat::Markdown);
    assert!(md.contains("| t | 1 | 1 | 100.0 |  |"), "{md}");
    assert!(md.contains("| Avg | | | 100.0 |  |"), "{md}");
}

#[test]
fn reports_and_transcripts_are_bit_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let pattern: &[bool] = &[true, false, true, false, true];
    let cfg = script(dir.path(), &[("a", pattern), ("b", &[false; 5]), ("c", &[true; 5])]);
    let tasks = [quick_task("a"), quick_task("b"), quick_task("c")];
    let mut outputs = Vec::new();
    for (i, workers) in [1, 3, 3].into_iter().enumerate() {
        let tdir = dir.path().join(format!("run{i}"));
        let store = CttStore::open(tdir.join("ctt.jsonl")).unwrap();
        let options = SuiteOptions { workers, transcript_dir: Some(tdir.join("transcripts")) };
        let stores = Stores { ctt: Some(&store), ..Stores::default() };
        let r = run_suite(&tasks, 5, &cfg, stores, &RunConfig::default(), &options);
        let transcript = std::fs::read(tdir.join("transcripts/a/attempt-2.jsonl")).unwrap();
        outputs.push((
            render_report(&r, ReportFormat::Markdown),
            render_report(&r, ReportFormat::Csv),
            transcript,
        ));
        for t in ["a", "b", "c"] {
            assert_eq!(std::fs::read_dir(tdir.join("transcripts").join(t)).unwrap().count(), 5);
        }
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn shipped_suite_passes_with_the_all_pass_script() {
    let tasks = load_suite(&fixture("suite.json")).unwrap();
    assert_eq!(tasks.len(), 3);
    let cfg = BackendConfig::mock(fixture("mock/all_pass.json"));
    let r = suite(&tasks, 5, &cfg, 2);
    for row in &r.rows {
        assert_eq!(row.c, 5, "{}: {:?}", row.task_id, row.attempts[0].note);
    }
    assert_eq!(r.avg.pass_at_5, Some(100.0));
}

fn row(id: &str, p1: f64, p5: Option<f64>, prompt: u64, completion: u64) -> SuiteRow {
    SuiteRow {
        task_id: id.into(),
        n: 5,
        c: (p1 / 20.0) as u64,
        pass_at_1: p1,
        pass_at_5: p5,
        usage: TokenUsage::new(prompt, completion),
        attempts: vec![],
    }
}

#[test]
fn token_table_carries_usage_verbatim() {
    let r = summarize(vec![row("task-1", 100.0, Some(100.0), 53991, 2938)]);
    let md = render_report(&r, ReportFormat::Markdown);
    assert!(md.contains("| task-1 | 53991 | 2938 |"), "{md}");
    assert!(md.contains("| Avg | 53991.0 | 2938.0 |"), "{md}");
    assert!(md.contains("| task-1 | 5 | 5 | 100.0 | 100.0 |"));
    assert!(md.contains("| Avg | | | 100.0 | 100.0 |"));
}

#[test]
fn csv_round_trips_every_number() {
    let r = summarize(vec![
        row("t1", 60.0, Some(100.0), 1330, 269),
        row("t2", 0.0, Some(0.0), 53991, 2938),
        row("t3", 20.0, Some(100.0), 7, 0),
    ]);
    let text = render_report(&r, ReportFormat::Csv);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let recs: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 4);
    for (rec, want) in recs.iter().zip(&r.rows) {
        assert_eq!(&rec[0], want.task_id);
        assert_eq!(rec[1].parse::<u64>().unwrap(), want.n);
        assert_eq!(rec[2].parse::<u64>().unwrap(), want.c);
        assert_eq!(rec[3].parse::<f64>().unwrap(), want.pass_at_1);
        assert_eq!(rec[4].parse::<f64>().ok(), want.pass_at_5);
        assert_eq!(rec[5].parse::<u64>().unwrap(), want.usage.prompt_tokens);
        assert_eq!(rec[6].parse::<u64>().unwrap(), want.usage.completion_tokens);
    }
    let avg = &recs[3];
    assert_eq!(&avg[0], "Avg");
    assert_eq!(&avg[3], "26.7");
    assert_eq!(&avg[5], "18442.7");
    assert_eq!(avg[4].parse::<f64>().unwrap(), 66.7);
}
