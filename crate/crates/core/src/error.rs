use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("empty numeric field")]
    Empty,
    #[error("`{0}` has no leading number")]
    NotNumeric(String),
    #[error("`{0}` has a non-alphabetic tail after the number")]
    TrailingGarbage(String),
}

/// First error-severity diagnostic of a deck, surfaced as a `Result`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("line {line}, col {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("line {line}, col {col}: unsupported element `{name}`")]
    UnsupportedElement {
        line: usize,
        col: usize,
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlattenError {
    #[error("instance {instance} references undefined subcircuit `{subckt}`")]
    UnresolvedSubckt { instance: String, subckt: String },
    #[error("recursive subcircuit instantiation: {}", chain.join(" -> "))]
    Recursion { chain: Vec<String> },
    #[error("instance {instance} connects {found} nodes but `{subckt}` declares {expected} ports")]
    PortArityMismatch {
        instance: String,
        subckt: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("circuit has no ground node \"0\"")]
    NoGround,
    #[error("device {device} references undefined model `{model}`")]
    UnknownModel { device: String, model: String },
    #[error("device {device} has {found} terminals, expected {expected}")]
    BadArity {
        device: String,
        expected: usize,
        found: usize,
    },
    #[error("device {device} has no value")]
    MissingValue { device: String },
    #[error("no independent source named `{0}`")]
    UnknownSource(String),
    #[error("sweep step must be nonzero")]
    StepZero,
    #[error("sweep step {step} points away from stop value")]
    StepDirection { step: f64 },
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("spec document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported spec version {0}, expected 1")]
    Version(u32),
    #[error("invalid check #{index}: {reason}")]
    InvalidCheck { index: usize, reason: String },
}
