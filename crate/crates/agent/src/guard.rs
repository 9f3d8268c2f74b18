//! Early termination when the same failure keeps coming back.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardDecision {
    Continue,
    Terminate,
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").unwrap())
}

/// Collapse whitespace and drop numerals, so failures that differ only in a
/// measured value compare equal.
pub fn normalize(message: &str) -> String {
    let stripped = number_re().replace_all(message, "");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Hash of a failure category plus its normalized message.
pub fn signature(code: &str, message: &str) -> String {
    let mut h = Sha256::new();
    h.update(code.as_bytes());
    h.update([0u8]);
    h.update(normalize(message).as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Terminate iff the last `threshold` signatures are identical.
pub fn loop_guard(signatures: &[String], threshold: usize) -> GuardDecision {
    assert!(threshold >= 2, "loop threshold must be at least 2");
    if signatures.len() < threshold {
        return GuardDecision::Continue;
    }
    let tail = &signatures[signatures.len() - threshold..];
    if tail.iter().all(|s| s == &tail[0]) {
        GuardDecision::Terminate
    } else {
        GuardDecision::Continue
    }
}
