//! Multiple-choice benchmark: one call per item, answer parsed from a tag
//! with lenient fallbacks for common formatting drift.

use std::sync::OnceLock;

use menter_llm::{ChatBackend, ChatMessage, TokenUsage};
use regex::Regex;
use serde::{Deserialize, Serialize};

pub const LABELS: [char; 4] = ['A', 'B', 'C', 'D'];

pub const MCQ_SYSTEM: &str = "You are an analog IC expert answering multiple-choice questions. \
Think briefly, then end your reply with <answer>X</answer> where X is A, B, C or D.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McqItem {
    pub question: String,
    pub choices: [String; 4],
    pub answer: char,
}

impl McqItem {
    pub fn validate(&self) -> Result<(), String> {
        if !LABELS.contains(&self.answer) {
            return Err(format!("answer `{}` is not one of A-D", self.answer));
        }
        if self.question.trim().is_empty() {
            return Err("question is empty".into());
        }
        Ok(())
    }

    pub fn prompt(&self) -> String {
        let mut out = format!("{}\n", self.question.trim());
        for (l, c) in LABELS.iter().zip(&self.choices) {
            out.push_str(&format!("{l}. {c}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqRecord {
    pub index: usize,
    pub expected: char,
    pub parsed: Option<char>,
    pub correct: bool,
    /// `format` when no answer could be read, or the backend error.
    pub reason: Option<String>,
    pub reply: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqResult {
    pub accuracy: f64,
    pub records: Vec<McqRecord>,
    pub usage: TokenUsage,
}

fn patterns() -> &'static [Regex] {
    static RE: OnceLock<Vec<Regex>> = OnceLock::new();
    RE.get_or_init(|| {
        [
            r"<answer>\s*([A-D])\s*</answer>",
            r"\*\*(?i:answer)\*\*\s*[:：]?\s*\**\s*\(?([A-D])\b",
            r"(?m)^\s*#+\s*(?i:answer)\s*[:：]?\s*\**\(?([A-D])\b",
            r"(?i:answer\s+is)\s*[:：]?\s*\**\(?([A-D])\b",
            r"(?i:answer)\s*[:：]\s*\**\(?([A-D])\b",
            r"^\s*\(?([A-D])[).:]*\s*$",
        ]
        .iter()
        .map(|p| Regex::new(p).unwrap())
        .collect()
    })
}

/// The first pattern that matches wins; the tag is tried first.
pub fn parse_answer(reply: &str) -> Option<char> {
    patterns()
        .iter()
        .find_map(|re| re.captures(reply))
        .and_then(|c| c[1].chars().next())
}

/// Ask every item in order on one backend session.
pub fn run_mcq(items: &[McqItem], backend: &mut dyn ChatBackend) -> McqResult {
    let mut records = Vec::with_capacity(items.len());
    let mut usage = TokenUsage::default();
    for (index, item) in items.iter().enumerate() {
        let messages = [ChatMessage::system(MCQ_SYSTEM), ChatMessage::user(item.prompt())];
        let rec = match backend.complete(&messages) {
            Ok(c) => {
                usage += c.usage;
                let parsed = parse_answer(&c.content);
                McqRecord {
                    index,
                    expected: item.answer,
                    parsed,
                    correct: parsed == Some(item.answer),
                    reason: parsed.is_none().then(|| "format".to_string()),
                    reply: Some(c.content),
                }
            }
            Err(e) => McqRecord {
                index,
                expected: item.answer,
                parsed: None,
                correct: false,
                reason: Some(e.to_string()),
                reply: None,
            },
        };
        records.push(rec);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    McqResult {
        accuracy: if records.is_empty() { 0.0 } else { correct as f64 / records.len() as f64 },
        records,
        usage,
    }
}
