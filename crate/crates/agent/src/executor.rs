//! Gate every draft must pass before simulation against the spec: parse,
//! flatten, rule check, then a probe operating point.

use menter_core::{
    flatten, parse_netlist, run_erc, solve_op, DCSolution, Diagnostic, ErcConfig, ErcReport, Netlist, SolverOptions,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub syntax_ok: bool,
    pub diagnostics: Vec<Diagnostic>,
    /// Present once the deck parsed and flattened.
    pub erc: Option<ErcReport>,
    /// Present once the rule check passed.
    pub probe_op: Option<DCSolution>,
    pub ok: bool,
    /// Failure category: `SYNTAX`, `FLATTEN`, a rule code, or `SIM`.
    pub code: Option<String>,
    /// First failure, phrased for the repair prompt.
    pub message: Option<String>,
}

impl ValidationReport {
    fn fail(mut self, code: &str, message: String) -> Self {
        self.ok = false;
        self.code = Some(code.to_string());
        self.message = Some(message);
        self
    }
}

pub fn executor_validate(draft: &str, erc: &ErcConfig, opts: &SolverOptions) -> (ValidationReport, Option<Netlist>) {
    let deck = parse_netlist(draft);
    let mut report = ValidationReport {
        syntax_ok: !deck.has_errors(),
        diagnostics: deck.diagnostics.clone(),
        erc: None,
        probe_op: None,
        ok: false,
        code: None,
        message: None,
    };
    if !report.syntax_ok {
        let msg = deck.errors().map(|d| d.to_string()).collect::<Vec<_>>().join("\n");
        return (report.fail("SYNTAX", msg), None);
    }
    let flat = match flatten(&deck) {
        Ok(f) => f,
        Err(e) => return (report.fail("FLATTEN", e.to_string()), None),
    };
    let rules = run_erc(&flat, erc);
    let passed = rules.passed;
    let first = rules.errors().next().map(|v| v.rule_id.code().to_string());
    let msg = rules.errors().map(|v| v.to_string()).collect::<Vec<_>>().join("\n");
    report.erc = Some(rules);
    if !passed {
        return (report.fail(first.as_deref().unwrap_or("ERC"), msg), Some(deck));
    }
    match solve_op(&flat, opts) {
        Err(e) => (report.fail("SIM", format!("SIM: {e}")), Some(deck)),
        Ok(sol) if !sol.converged => {
            let why = sol.diagnosis.clone().unwrap_or_else(|| "no convergence".into());
            report.probe_op = Some(sol);
            (report.fail("SIM", format!("SIM: operating point failed: {why}")), Some(deck))
        }
        Ok(sol) => {
            report.probe_op = Some(sol);
            report.ok = true;
            (report, Some(deck))
        }
    }
}
