//! Result tables: pass rates per task and token usage per task, each with
//! an `Avg` row.

use serde::{Deserialize, Serialize};

use super::suite::SuiteResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.1}")).unwrap_or_default()
}

pub fn render_report(result: &SuiteResult, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(result),
        ReportFormat::Csv => csv_table(result),
    }
}

fn markdown(r: &SuiteResult) -> String {
    let mut out = String::from("## Pass rate (%)\n\n| Task | n | c | pass@1 | pass@5 |\n|---|---:|---:|---:|---:|\n");
    for row in &r.rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            row.task_id,
            row.n,
            row.c,
            pct(Some(row.pass_at_1)),
            pct(row.pass_at_5)
        ));
    }
    out.push_str(&format!("| Avg | | | {} | {} |\n", pct(Some(r.avg.pass_at_1)), pct(r.avg.pass_at_5)));

    out.push_str("\n## Token usage\n\n| Task | Prompt | Completion |\n|---|---:|---:|\n");
    for row in &r.rows {
        out.push_str(&format!("| {} | {} | {} |\n", row.task_id, row.usage.prompt_tokens, row.usage.completion_tokens));
    }
    out.push_str(&format!("| Avg | {:.1} | {:.1} |\n", r.avg.prompt_tokens, r.avg.completion_tokens));
    out
}

pub const CSV_HEADER: [&str; 7] = ["task_id", "n", "c", "pass_at_1", "pass_at_5", "prompt_tokens", "completion_tokens"];

fn csv_table(r: &SuiteResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in &r.rows {
        w.write_record([
            row.task_id.clone(),
            row.n.to_string(),
            row.c.to_string(),
            pct(Some(row.pass_at_1)),
            pct(row.pass_at_5),
            row.usage.prompt_tokens.to_string(),
            row.usage.completion_tokens.to_string(),
        ])
        .expect("in-memory write");
    }
    w.write_record([
        "Avg".to_string(),
        String::new(),
        String::new(),
        pct(Some(r.avg.pass_at_1)),
        pct(r.avg.pass_at_5),
        format!("{:.1}", r.avg.prompt_tokens),
        format!("{:.1}", r.avg.completion_tokens),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
