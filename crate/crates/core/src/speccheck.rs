//! Declarative DC functional checks evaluated against simulation results.
//!
//! Every failing outcome message starts with the check's code token
//! (`OPPOINT:`, `LINFIT:`, ...) so the repair loop can route on it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dcsim::{dc_sweep, solve_op, DCSolution, SolverOptions, SweepResult};
use crate::error::SpecError;
use crate::flatten::FlatCircuit;
use crate::mosfet::Region;

/// Points per sweep used by `linear_fit` and `monotone` checks.
pub const SWEEP_POINTS: usize = 21;
/// Minimum per-step change for a strictly monotone trace, volts.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    OpPoint {
        node: String,
        expected: f64,
        tol: f64,
    },
    LinearFit {
        output: String,
        source: String,
        start: f64,
        stop: f64,
        slope: f64,
        slope_tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intercept: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intercept_tol: Option<f64>,
    },
    Monotone {
        output: String,
        source: String,
        start: f64,
        stop: f64,
        direction: Direction,
    },
    RailBound {
        node: String,
        lo: f64,
        hi: f64,
    },
    Region {
        device: String,
        region: Region,
    },
}

impl Check {
    pub fn code(&self) -> &'static str {
        match self {
            Check::OpPoint { .. } => "OPPOINT",
            Check::LinearFit { .. } => "LINFIT",
            Check::Monotone { .. } => "MONOTONE",
            Check::RailBound { .. } => "RAILBOUND",
            Check::Region { .. } => "REGION",
        }
    }

    fn sweep_key(&self) -> Option<(String, f64, f64)> {
        match self {
            Check::LinearFit {
                source, start, stop, ..
            }
            | Check::Monotone {
                source, start, stop, ..
            } => Some((source.to_ascii_lowercase(), *start, *stop)),
            _ => None,
        }
    }

    fn needs_op(&self) -> bool {
        matches!(
            self,
            Check::OpPoint { .. } | Check::RailBound { .. } | Check::Region { .. }
        )
    }

    fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        let ordered = |start: f64, stop: f64| {
            if start < stop {
                Ok(())
            } else {
                Err(format!("range [{start}, {stop}] is not increasing"))
            }
        };
        match self {
            Check::OpPoint { tol, .. } => positive("tol", *tol),
            Check::LinearFit {
                start,
                stop,
                slope_tol,
                intercept,
                intercept_tol,
                ..
            } => {
                positive("slope_tol", *slope_tol)?;
                match (intercept, intercept_tol) {
                    (Some(_), Some(t)) => positive("intercept_tol", *t)?,
                    (None, None) => {}
                    _ => return Err("intercept and intercept_tol go together".into()),
                }
                ordered(*start, *stop)
            }
            Check::Monotone { start, stop, .. } => ordered(*start, *stop),
            Check::RailBound { lo, hi, .. } => {
                if lo < hi {
                    Ok(())
                } else {
                    Err(format!("rail bound [{lo}, {hi}] is empty"))
                }
            }
            Check::Region { .. } => Ok(()),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Check::OpPoint { node, expected, tol } => {
                write!(f, "op point {node} = {}±{}", num(*expected), num(*tol))
            }
            Check::LinearFit {
                output,
                source,
                start,
                stop,
                slope,
                slope_tol,
                ..
            } => write!(
                f,
                "linear fit {output} vs {source} over [{}, {}] slope {}±{}",
                num(*start),
                num(*stop),
                num(*slope),
                num(*slope_tol)
            ),
            Check::Monotone {
                output,
                source,
                direction,
                ..
            } => write!(f, "monotone {direction:?} {output} vs {source}"),
            Check::RailBound { node, lo, hi } => {
                write!(f, "rail bound {node} in [{}, {}]", num(*lo), num(*hi))
            }
            Check::Region { device, region } => write!(f, "region {device} {region:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecRequirement {
    #[serde(default = "spec_version")]
    pub version: u32,
    pub checks: Vec<Check>,
}

fn spec_version() -> u32 {
    1
}

impl SpecRequirement {
    pub fn new(checks: Vec<Check>) -> Self {
        SpecRequirement {
            version: 1,
            checks,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: SpecRequirement = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.version != 1 {
            return Err(SpecError::Version(self.version));
        }
        for (index, check) in self.checks.iter().enumerate() {
            check
                .validate()
                .map_err(|reason| SpecError::InvalidCheck { index, reason })?;
        }
        Ok(())
    }

    /// Flat text used for lexical retrieval.
    pub fn describe(&self) -> String {
        self.checks
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub measured: Vec<f64>,
    pub message: String,
}

/// A sweep run on behalf of one or more checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub source: String,
    pub start: f64,
    pub stop: f64,
    pub result: Result<SweepResult, String>,
}

/// Outcomes plus the raw simulations behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecRun {
    pub outcomes: Vec<CheckOutcome>,
    pub op: Option<Result<DCSolution, String>>,
    pub sweeps: Vec<SweepRun>,
}

/// Render a float the way a person writes it: `3.0`, `2.5`, `1e-06`.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == x.trunc() && x.abs() < 1e16 {
        return format!("{x:.1}");
    }
    let s = format!("{x:?}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mantissa}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn outcome(check: &Check, passed: bool, measured: Vec<f64>, detail: String) -> CheckOutcome {
    CheckOutcome {
        message: format!("{}: {detail}", check.code()),
        check: check.clone(),
        passed,
        measured,
    }
}

fn sweep_trace(
    check: &Check,
    run: &SweepRun,
    output: &str,
) -> Result<(Vec<f64>, Vec<f64>), CheckOutcome> {
    let sweep = match &run.result {
        Ok(s) => s,
        Err(e) => return Err(outcome(check, false, vec![], format!("simulation failed: {e}"))),
    };
    if !sweep.failures.is_empty() {
        return Err(outcome(
            check,
            false,
            vec![],
            format!(
                "simulation failed at {} of {} sweep points of {}",
                sweep.failures.len(),
                sweep.points.len(),
                sweep.swept_source
            ),
        ));
    }
    let mut xs = Vec::with_capacity(sweep.points.len());
    let mut ys = Vec::with_capacity(sweep.points.len());
    for p in &sweep.points {
        let Some(v) = p.solution.voltage(output) else {
            return Err(outcome(check, false, vec![], format!("unknown node {output}")));
        };
        xs.push(p.value);
        ys.push(v);
    }
    Ok((xs, ys))
}

fn op_solution<'a>(check: &Check, op: &'a Option<Result<DCSolution, String>>) -> Result<&'a DCSolution, CheckOutcome> {
    match op {
        Some(Ok(sol)) if sol.converged => Ok(sol),
        Some(Ok(sol)) => Err(outcome(
            check,
            false,
            vec![],
            format!(
                "simulation failed: operating point did not converge ({})",
                sol.diagnosis.as_deref().unwrap_or("no diagnosis")
            ),
        )),
        Some(Err(e)) => Err(outcome(check, false, vec![], format!("simulation failed: {e}"))),
        None => Err(outcome(check, false, vec![], "simulation failed: no operating point".into())),
    }
}

fn evaluate_one(check: &Check, op: &Option<Result<DCSolution, String>>, sweeps: &[SweepRun]) -> CheckOutcome {
    let find_sweep = |key: &(String, f64, f64)| {
        sweeps
            .iter()
            .find(|s| s.source.eq_ignore_ascii_case(&key.0) && s.start == key.1 && s.stop == key.2)
            .expect("sweep scheduled for every sweep check")
    };
    let result = (|| -> Result<CheckOutcome, CheckOutcome> {
        Ok(match check {
            Check::OpPoint { node, expected, tol } => {
                let sol = op_solution(check, op)?;
                let v = sol
                    .voltage(node)
                    .ok_or_else(|| outcome(check, false, vec![], format!("unknown node {node}")))?;
                let passed = (v - expected).abs() <= *tol;
                let verdict = if passed { "within" } else { "expected" };
                outcome(
                    check,
                    passed,
                    vec![v],
                    format!("{node}={} {verdict} {}±{}", num(v), num(*expected), num(*tol)),
                )
            }
            Check::LinearFit {
                output,
                slope,
                slope_tol,
                intercept,
                intercept_tol,
                ..
            } => {
                let run = find_sweep(&check.sweep_key().unwrap());
                let (xs, ys) = sweep_trace(check, run, output)?;
                let (m, b) = least_squares(&xs, &ys);
                let slope_ok = (m - slope).abs() <= *slope_tol;
                let intercept_ok = match (intercept, intercept_tol) {
                    (Some(i), Some(t)) => (b - i).abs() <= *t,
                    _ => true,
                };
                let mut detail = format!(
                    "{output} vs {} slope={} expected {}±{}",
                    run.source,
                    num(m),
                    num(*slope),
                    num(*slope_tol)
                );
                if let (Some(i), Some(t)) = (intercept, intercept_tol) {
                    detail.push_str(&format!(", intercept={} expected {}±{}", num(b), num(*i), num(*t)));
                }
                outcome(check, slope_ok && intercept_ok, vec![m, b], detail)
            }
            Check::Monotone {
                output, direction, ..
            } => {
                let run = find_sweep(&check.sweep_key().unwrap());
                let (xs, ys) = sweep_trace(check, run, output)?;
                let bad = ys.windows(2).position(|w| {
                    let d = w[1] - w[0];
                    match direction {
                        Direction::Increasing => d <= MONOTONE_TOL,
                        Direction::Decreasing => d >= -MONOTONE_TOL,
                    }
                });
                let dir = match direction {
                    Direction::Increasing => "increasing",
                    Direction::Decreasing => "decreasing",
                };
                match bad {
                    None => outcome(check, true, ys, format!("{output} strictly {dir} over {} points", xs.len())),
                    Some(i) => outcome(
                        check,
                        false,
                        ys.clone(),
                        format!(
                            "{output} not strictly {dir} between {}={} and {} ({} -> {})",
                            run.source,
                            num(xs[i]),
                            num(xs[i + 1]),
                            num(ys[i]),
                            num(ys[i + 1])
                        ),
                    ),
                }
            }
            Check::RailBound { node, lo, hi } => {
                let sol = op_solution(check, op)?;
                let mut values = vec![sol
                    .voltage(node)
                    .ok_or_else(|| outcome(check, false, vec![], format!("unknown node {node}")))?];
                for run in sweeps {
                    if let Ok(sweep) = &run.result {
                        values.extend(sweep.trace(node).into_iter().flatten());
                    }
                }
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let passed = min >= *lo && max <= *hi;
                let verdict = if passed { "inside" } else { "outside" };
                outcome(
                    check,
                    passed,
                    vec![min, max],
                    format!("{node} spans [{}, {}] {verdict} [{}, {}]", num(min), num(max), num(*lo), num(*hi)),
                )
            }
            Check::Region { device, region } => {
                let sol = op_solution(check, op)?;
                let got = sol
                    .region(device)
                    .ok_or_else(|| outcome(check, false, vec![], format!("unknown MOSFET {device}")))?;
                outcome(
                    check,
                    got == *region,
                    vec![],
                    format!("{device} in {got:?} expected {region:?}").to_lowercase(),
                )
            }
        })
    })();
    result.unwrap_or_else(|failed| failed)
}

/// Evaluate every check, running one operating point (if any check needs
/// it) and one 21-point sweep per distinct `(source, start, stop)`.
pub fn evaluate_spec_detailed(flat: &FlatCircuit, spec: &SpecRequirement, opts: &SolverOptions) -> SpecRun {
    let op = spec
        .checks
        .iter()
        .any(Check::needs_op)
        .then(|| solve_op(flat, opts).map_err(|e| e.to_string()));

    let mut sweeps: Vec<SweepRun> = Vec::new();
    for key in spec.checks.iter().filter_map(Check::sweep_key) {
        let seen = sweeps
            .iter()
            .any(|s| s.source.eq_ignore_ascii_case(&key.0) && s.start == key.1 && s.stop == key.2);
        if seen {
            continue;
        }
        let (source, start, stop) = key;
        let step = (stop - start) / (SWEEP_POINTS - 1) as f64;
        let result = dc_sweep(flat, &source, start, stop, step, opts).map_err(|e| e.to_string());
        sweeps.push(SweepRun {
            source,
            start,
            stop,
            result,
        });
    }

    let outcomes = spec
        .checks
        .iter()
        .map(|c| evaluate_one(c, &op, &sweeps))
        .collect();
    SpecRun { outcomes, op, sweeps }
}

pub fn evaluate_spec(flat: &FlatCircuit, spec: &SpecRequirement, opts: &SolverOptions) -> Vec<CheckOutcome> {
    evaluate_spec_detailed(flat, spec, opts).outcomes
}
