//! Benchmark harness: pass@k, task suites, multiple-choice runs and reports.

pub mod mcq;
pub mod passk;
pub mod report;
pub mod suite;

pub use mcq::{parse_answer, run_mcq, McqItem, McqRecord, McqResult};
pub use passk::{pass_at_k, DomainError, EvalStats};
pub use report::{render_report, ReportFormat, CSV_HEADER};
pub use suite::{load_suite, run_suite, summarize, AttemptRecord, SuiteAverages, SuiteOptions, SuiteResult, SuiteRow};
