use std::io::{BufRead, Write};

use menter_agent::{Checkpoint, CheckpointAction, Phase};

/// Review prompts on stderr, answers from stdin.
pub struct TerminalCheckpoint<R> {
    input: R,
}

impl<R: BufRead> TerminalCheckpoint<R> {
    pub fn new(input: R) -> Self {
        TerminalCheckpoint { input }
    }

    fn line(&mut self) -> Option<String> {
        let mut s = String::new();
        match self.input.read_line(&mut s) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(s.trim_end_matches(['\r', '\n']).to_string()),
        }
    }
}

impl<R: BufRead> Checkpoint for TerminalCheckpoint<R> {
    fn review(&mut self, phase: Phase, artifact: &str) -> CheckpointAction {
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "--- checkpoint: {phase:?} ---\n{}", artifact.trim_end());
        loop {
            let _ = write!(err, "[a]pprove/[e]dit/[q]uit> ");
            let _ = err.flush();
            let Some(answer) = self.line() else { return CheckpointAction::Abort };
            match answer.trim() {
                "a" | "" => return CheckpointAction::Approve,
                "q" => return CheckpointAction::Abort,
                "e" => {
                    let _ = writeln!(err, "enter the replacement, end with a line holding a single `.`");
                    let mut text = String::new();
                    while let Some(l) = self.line() {
                        if l == "." {
                            break;
                        }
                        text.push_str(&l);
                        text.push('\n');
                    }
                    return CheckpointAction::Edit(text);
                }
                other => {
                    let _ = writeln!(err, "unknown answer `{other}`");
                }
            }
        }
    }
}
