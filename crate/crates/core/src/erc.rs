//! Structural electrical rule checks on a flattened circuit.
//!
//! The rule registry is closed. Each rule has a default severity that can be
//! overridden per rule through [`ErcConfig`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::flatten::{FlatCircuit, NodeId};
use crate::netlist::{ElementKind, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "E-GND")]
    Gnd,
    #[serde(rename = "E-ARITY")]
    Arity,
    #[serde(rename = "E-MODEL")]
    Model,
    #[serde(rename = "E-SHORT")]
    Short,
    #[serde(rename = "E-FLOAT")]
    Float,
    #[serde(rename = "E-GATE")]
    Gate,
    #[serde(rename = "E-NOPATH")]
    NoPath,
}

impl RuleId {
    pub const ALL: [RuleId; 7] = [
        RuleId::Gnd,
        RuleId::Arity,
        RuleId::Model,
        RuleId::Short,
        RuleId::Float,
        RuleId::Gate,
        RuleId::NoPath,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RuleId::Gnd => "E-GND",
            RuleId::Arity => "E-ARITY",
            RuleId::Model => "E-MODEL",
            RuleId::Short => "E-SHORT",
            RuleId::Float => "E-FLOAT",
            RuleId::Gate => "E-GATE",
            RuleId::NoPath => "E-NOPATH",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code().eq_ignore_ascii_case(code))
    }

    pub fn default_severity(self) -> Severity {
        match self {
            RuleId::Gnd | RuleId::Arity | RuleId::Model | RuleId::Short => Severity::Error,
            RuleId::Float | RuleId::Gate | RuleId::NoPath => Severity::Warning,
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule_id, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErcReport {
    pub violations: Vec<RuleViolation>,
    pub passed: bool,
}

impl ErcReport {
    pub fn errors(&self) -> impl Iterator<Item = &RuleViolation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErcConfig {
    #[serde(default)]
    pub severity: BTreeMap<RuleId, Severity>,
}

impl ErcConfig {
    /// Every warning-class rule promoted to an error.
    pub fn strict() -> Self {
        ErcConfig {
            severity: RuleId::ALL
                .into_iter()
                .map(|r| (r, Severity::Error))
                .collect(),
        }
    }

    pub fn severity_of(&self, rule: RuleId) -> Severity {
        self.severity
            .get(&rule)
            .copied()
            .unwrap_or_else(|| rule.default_severity())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn run_erc(flat: &FlatCircuit, config: &ErcConfig) -> ErcReport {
    let mut found: Vec<(RuleId, String, String)> = Vec::new();
    let n = flat.node_count();

    if !flat.has_ground() {
        found.push((RuleId::Gnd, "0".into(), "circuit has no ground node \"0\"".into()));
    }

    let mut terminals = vec![0usize; n];
    let mut gate_terminals = vec![0usize; n];
    let mut source_driven = vec![false; n];
    for d in &flat.devices {
        for &node in &d.nodes {
            terminals[node] += 1;
        }
        if d.kind.is_source() {
            for &node in &d.nodes {
                source_driven[node] = true;
            }
        }
        if d.kind == ElementKind::Mosfet && d.nodes.len() == 4 {
            gate_terminals[d.nodes[1]] += 1;
        }

        match d.kind.terminal_count() {
            Some(expected) if expected != d.nodes.len() => {
                found.push((
                    RuleId::Arity,
                    d.name.clone(),
                    format!("{} has {} terminals, expected {expected}", d.name, d.nodes.len()),
                ));
                continue;
            }
            None => {
                found.push((
                    RuleId::Arity,
                    d.name.clone(),
                    format!("{} is an unexpanded subcircuit instance", d.name),
                ));
                continue;
            }
            _ => {}
        }
        if d.kind == ElementKind::Mosfet && flat.model_for(d).is_none() {
            let model = d.model.as_deref().unwrap_or("<none>");
            found.push((
                RuleId::Model,
                d.name.clone(),
                format!("{} references undefined model {model}", d.name),
            ));
        }
        if d.kind == ElementKind::VSource && d.nodes[0] == d.nodes[1] {
            found.push((
                RuleId::Short,
                d.name.clone(),
                format!(
                    "{} has both terminals on node {}",
                    d.name,
                    flat.node_name(d.nodes[0])
                ),
            ));
        }
    }

    for (id, name) in flat.nodes.iter().enumerate() {
        if id == 0 && flat.has_ground() {
            continue;
        }
        if terminals[id] == 1 {
            found.push((
                RuleId::Float,
                name.clone(),
                format!("node {name} is connected to a single device terminal"),
            ));
        }
        if gate_terminals[id] > 0 && gate_terminals[id] == terminals[id] && !source_driven[id] {
            found.push((
                RuleId::Gate,
                name.clone(),
                format!("node {name} only connects MOSFET gates and is never driven"),
            ));
        }
    }

    if flat.has_ground() {
        let mut uf = UnionFind::new(n);
        for d in &flat.devices {
            let pair: Option<(NodeId, NodeId)> = match d.kind {
                ElementKind::Resistor | ElementKind::VSource | ElementKind::ISource
                    if d.nodes.len() == 2 =>
                {
                    Some((d.nodes[0], d.nodes[1]))
                }
                ElementKind::Mosfet if d.nodes.len() == 4 => Some((d.nodes[0], d.nodes[2])),
                _ => None,
            };
            if let Some((a, b)) = pair {
                uf.union(a, b);
            }
        }
        let ground = uf.find(0);
        for (id, name) in flat.nodes.iter().enumerate().skip(1) {
            if uf.find(id) != ground {
                found.push((
                    RuleId::NoPath,
                    name.clone(),
                    format!("node {name} has no DC path to ground"),
                ));
            }
        }
    }

    found.sort();
    let violations: Vec<RuleViolation> = found
        .into_iter()
        .map(|(rule_id, subject, message)| RuleViolation {
            rule_id,
            severity: config.severity_of(rule_id),
            subject,
            message,
        })
        .collect();
    let passed = !violations.iter().any(|v| v.severity == Severity::Error);
    ErcReport { violations, passed }
}
