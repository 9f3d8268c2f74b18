//! The three testbench components: connection checker (rule check), DC
//! sweep checker, and functionality verifier (spec evaluation).

use menter_core::speccheck::{evaluate_spec_detailed, SpecRun};
use menter_core::{flatten, run_erc, Check, CheckOutcome, ErcConfig, ErcReport, Netlist, SolverOptions, SpecRequirement};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Passed,
    Failed,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub verdict: Verdict,
    pub messages: Vec<String>,
}

impl Component {
    fn new(name: &str, verdict: Verdict, messages: Vec<String>) -> Self {
        Component {
            name: name.to_string(),
            verdict,
            messages,
        }
    }

    fn skipped(name: &str, reason: &str) -> Self {
        Self::new(name, Verdict::Skipped(reason.to_string()), Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub source: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub failed_points: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbenchReport {
    pub erc: Option<ErcReport>,
    pub connection: Component,
    pub dc_sweep: Component,
    pub functionality: Component,
    pub sweeps: Vec<SweepSummary>,
    pub outcomes: Vec<CheckOutcome>,
    pub passed: bool,
    /// Failure messages in component order.
    pub failures: Vec<String>,
}

pub const CONNECTION: &str = "connection checker";
pub const DC_SWEEP: &str = "dc sweep checker";
pub const FUNCTIONALITY: &str = "functionality verifier";

fn summarize(run: &SpecRun) -> Vec<SweepSummary> {
    run.sweeps
        .iter()
        .map(|s| match &s.result {
            Ok(r) => SweepSummary {
                source: s.source.clone(),
                start: s.start,
                stop: s.stop,
                points: r.points.len() + r.failures.len(),
                failed_points: r.failures.len(),
                error: None,
            },
            Err(e) => SweepSummary {
                source: s.source.clone(),
                start: s.start,
                stop: s.stop,
                points: 0,
                failed_points: 0,
                error: Some(e.clone()),
            },
        })
        .collect()
}

pub fn testbench_run(deck: &Netlist, spec: &SpecRequirement, erc: &ErcConfig, opts: &SolverOptions) -> TestbenchReport {
    let flat = match flatten(deck) {
        Ok(f) => f,
        Err(e) => {
            let msg = format!("FLATTEN: {e}");
            return TestbenchReport {
                erc: None,
                connection: Component::new(CONNECTION, Verdict::Failed, vec![msg.clone()]),
                dc_sweep: Component::skipped(DC_SWEEP, "connection checker failed"),
                functionality: Component::skipped(FUNCTIONALITY, "connection checker failed"),
                sweeps: Vec::new(),
                outcomes: Vec::new(),
                passed: false,
                failures: vec![msg],
            };
        }
    };

    let rules = run_erc(&flat, erc);
    if !rules.passed {
        let msgs: Vec<String> = rules.errors().map(|v| v.to_string()).collect();
        return TestbenchReport {
            erc: Some(rules),
            connection: Component::new(CONNECTION, Verdict::Failed, msgs.clone()),
            dc_sweep: Component::skipped(DC_SWEEP, "connection checker failed"),
            functionality: Component::skipped(FUNCTIONALITY, "connection checker failed"),
            sweeps: Vec::new(),
            outcomes: Vec::new(),
            passed: false,
            failures: msgs,
        };
    }
    let connection = Component::new(CONNECTION, Verdict::Passed, Vec::new());

    let run = evaluate_spec_detailed(&flat, spec, opts);
    let sweeps = summarize(&run);

    let mut sweep_msgs = Vec::new();
    for s in &sweeps {
        if let Some(e) = &s.error {
            sweep_msgs.push(format!("SWEEP: {} [{}, {}]: {e}", s.source, s.start, s.stop));
        } else if s.failed_points > 0 {
            sweep_msgs.push(format!(
                "SWEEP: {} [{}, {}]: {} of {} points failed to converge",
                s.source, s.start, s.stop, s.failed_points, s.points
            ));
        }
    }
    for o in run.outcomes.iter().filter(|o| !o.passed && matches!(o.check, Check::RailBound { .. })) {
        sweep_msgs.push(o.message.clone());
    }
    let dc_sweep = Component::new(
        DC_SWEEP,
        if sweep_msgs.is_empty() { Verdict::Passed } else { Verdict::Failed },
        sweep_msgs.clone(),
    );

    let func_msgs: Vec<String> = run.outcomes.iter().filter(|o| !o.passed).map(|o| o.message.clone()).collect();
    let functionality = Component::new(
        FUNCTIONALITY,
        if func_msgs.is_empty() { Verdict::Passed } else { Verdict::Failed },
        func_msgs.clone(),
    );

    let mut failures = sweep_msgs;
    for m in func_msgs {
        if !failures.contains(&m) {
            failures.push(m);
        }
    }
    TestbenchReport {
        erc: Some(rules),
        connection,
        dc_sweep,
        functionality,
        sweeps,
        outcomes: run.outcomes,
        passed: failures.is_empty(),
        failures,
    }
}
