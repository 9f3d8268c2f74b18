//! Prompt text and reply parsing for the design agents.

use std::sync::OnceLock;

use menter_knowledge::{CttEntry, Hit, StageRecord};
use regex::Regex;

use crate::task::TaskDef;

pub const CIRCUIT_SYSTEM: &str = "You are a senior analog designer. You write SPICE netlists in a \
restricted dialect: R, C, M (level-1 MOSFET: drain gate source bulk model w= l=), V and I (DC \
value), X subcircuit instances, plus .title, .subckt/.ends, .model NAME nmos|pmos (level=1 vto= \
kp= lambda=) and .end. Node 0 is ground. Every node needs a DC path to ground.";

pub const PLANNER_SYSTEM: &str = "You plan analog design work as an ordered list of stages. Each \
stage is one focused sub-task whose output feeds the next. Reply with a numbered list of short \
stage names only.";

/// The design brief assembled at intake from the task and retrieved material.
pub fn brief(task: &TaskDef, chunks: &[Hit], prior: &[(CttEntry, f64)]) -> String {
    let mut out = format!("Design task: {}\n{}\n", task.title, task.prompt.trim());
    if !task.spec.checks.is_empty() {
        out.push_str("\nAcceptance checks (DC):\n");
        for c in &task.spec.checks {
            out.push_str(&format!("- {c}\n"));
        }
    }
    if !chunks.is_empty() {
        out.push_str("\nReference material:\n");
        for h in chunks {
            out.push_str(&format!("[{}#{}] {}\n", h.chunk.doc_id, h.chunk.chunk_id, h.chunk.text));
        }
    }
    if !prior.is_empty() {
        out.push_str("\nSolved designs from the think tank:\n");
        for (e, _) in prior {
            out.push_str(&format!("* {} ({})\n{}", e.circuit_name, e.specifications.describe(), e.netlist));
        }
    }
    out
}

pub fn planning_request(brief: &str) -> String {
    format!("{brief}\nList the design stages needed for this circuit.")
}

fn stage_list(stages: &[String]) -> String {
    stages.iter().enumerate().map(|(i, s)| format!("{}. {s}\n", i + 1)).collect()
}

pub fn drafting_request(brief: &str, stages: &[String]) -> String {
    format!(
        "{brief}\nWork through these stages in order:\n{}\nStart each stage with a line `## Stage N: <name>`. \
Finish with the complete netlist in one ```spice fenced block.",
        stage_list(stages)
    )
}

/// Fixed repair template: stage list, failures, and the rejected draft.
pub fn repair_request(stages: &[String], failures: &[String], draft: &str) -> String {
    let mut out = String::from("The previous draft was rejected. Revise it.\n\nStages:\n");
    out.push_str(&stage_list(stages));
    out.push_str("\nFailures:\n");
    for f in failures {
        out.push_str(&format!("- {f}\n"));
    }
    out.push_str(&format!(
        "\nPrevious draft:\n```spice\n{}\n```\nReturn the corrected design with the same stage headings and the full netlist in one ```spice fenced block.",
        draft.trim_end()
    ));
    out
}

fn fence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?ms)^[ \t]*(```|~~~)[^\n]*\n(.*?)^[ \t]*(```|~~~)[ \t]*$").unwrap())
}

/// The netlist inside the last fenced block, or the whole reply.
pub fn extract_netlist(reply: &str) -> String {
    match fence_re().captures_iter(reply).last() {
        Some(c) => c[2].to_string(),
        None => reply.to_string(),
    }
}

fn stage_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^[ \t]*#{0,6}[ \t]*\**stage[ \t]+(\d+)\b[^\n]*$").unwrap())
}

/// Split a drafting reply into per-stage records. Without stage markers the
/// whole reply belongs to the final stage.
pub fn stage_records(reply: &str, stages: &[String], prompt_sent: &str) -> Vec<StageRecord> {
    let mut outputs = vec![String::new(); stages.len()];
    let markers: Vec<(usize, usize, usize)> = stage_marker_re()
        .captures_iter(reply)
        .filter_map(|c| {
            let m = c.get(0).unwrap();
            let n: usize = c[1].parse().ok()?;
            (1..=stages.len()).contains(&n).then_some((n - 1, m.start(), m.end()))
        })
        .collect();
    if markers.is_empty() {
        if let Some(last) = outputs.last_mut() {
            *last = reply.to_string();
        }
    } else {
        for (i, &(stage, _, body_start)) in markers.iter().enumerate() {
            let end = markers.get(i + 1).map_or(reply.len(), |m| m.1);
            let text = reply[body_start..end].trim();
            if outputs[stage].is_empty() {
                outputs[stage] = text.to_string();
            } else {
                outputs[stage] = format!("{}\n{text}", outputs[stage]);
            }
        }
    }
    stages
        .iter()
        .zip(outputs)
        .enumerate()
        .map(|(index, (name, output))| StageRecord {
            index,
            stage_name: name.clone(),
            prompt_sent: prompt_sent.to_string(),
            output,
        })
        .collect()
}

fn list_item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:(?:stage\s+)?\d+\s*[.):]|[-*•+])\s+(.+?)\s*$").unwrap())
}

/// Lenient parse of a numbered or bulleted stage list.
pub fn parse_stage_list(reply: &str) -> Option<Vec<String>> {
    let stages: Vec<String> = reply
        .lines()
        .filter_map(|l| list_item_re().captures(l))
        .map(|c| c[1].trim_matches(|ch: char| ch == '*' || ch == '`' || ch.is_whitespace()).to_string())
        .filter(|s| !s.is_empty())
        .collect();
    (!stages.is_empty()).then_some(stages)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_lists() {
        assert_eq!(
            parse_stage_list("1. Requirements\n2. Topology\n3. Sizing").unwrap(),
            ["Requirements", "Topology", "Sizing"]
        );
        assert_eq!(
            parse_stage_list("Plan:\n- **Specs**\n* Bias\nStage 3) Netlist").unwrap(),
            ["Specs", "Bias", "Netlist"]
        );
        assert_eq!(parse_stage_list("We should first think about the requirements carefully."), None);
    }

    #[test]
    fn netlist_extraction() {
        assert_eq!(extract_netlist("x\n```spice\nR1 a 0 1k\n```\n"), "R1 a 0 1k\n");
        assert_eq!(extract_netlist("```\nold\n```\ntext\n```cir\nnew\n```"), "new\n");
        assert_eq!(extract_netlist("R1 a 0 1k"), "R1 a 0 1k");
    }

    #[test]
    fn stage_sections() {
        let stages = vec!["requirements".to_string(), "topology".into(), "netlist".into()];
        let reply = "## Stage 1: requirements\nmid at 2.5\n## Stage 3: netlist\n```\nR1 a 0 1\n```";
        let r = stage_records(reply, &stages, "p");
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].output, "mid at 2.5");
        assert_eq!(r[1].output, "");
        assert_eq!(r[2].output, "```\nR1 a 0 1\n```");
        assert!(r.iter().enumerate().all(|(i, s)| s.index == i && s.prompt_sent == "p"));

        let plain = stage_records("just a deck", &stages, "p");
        assert_eq!(plain[2].output, "just a deck");
    }
}
