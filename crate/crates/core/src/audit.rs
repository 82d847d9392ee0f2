//! Syntactic well-formedness before and after revision.
//!
//! The builtin checker is a delimiter-balance proxy for a real parser; an
//! external command can be plugged in instead.

use std::io::{ErrorKind, Write};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const BUILTIN_ID: &str = "builtin-balance";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub pass: bool,
    pub checker_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Checker {
    #[default]
    Builtin,
    /// Program plus whitespace-separated arguments. Source text goes to
    /// stdin; exit status 0 means pass.
    External(String),
}

impl Checker {
    /// `builtin` or `cmd:<command line>`.
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "builtin" | BUILTIN_ID => Ok(Checker::Builtin),
            _ => match s.strip_prefix("cmd:") {
                Some(cmd) if !cmd.trim().is_empty() => {
                    Ok(Checker::External(cmd.trim().to_string()))
                }
                _ => Err(format!("unknown checker `{s}` (builtin|cmd:<command>)")),
            },
        }
    }

    pub fn id(&self) -> String {
        match self {
            Checker::Builtin => BUILTIN_ID.to_string(),
            Checker::External(cmd) => format!("external:{cmd}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("external checker `{command}` is unavailable: {reason}")]
    ExternalCheckerUnavailable { command: String, reason: String },
}

/// Balanced `()[]{}` outside string state. A `'` or `"` opens a string that
/// only the same quote closes; inside it a backslash escapes the next char.
fn balance(text: &str) -> Result<(), String> {
    let mut stack: Vec<(char, usize)> = Vec::new();
    let mut quote: Option<(char, usize)> = None;
    let mut escaped = false;
    for (at, c) in text.char_indices() {
        if let Some((q, _)) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '\'' | '"' => quote = Some((c, at)),
            '(' | '[' | '{' => stack.push((c, at)),
            ')' | ']' | '}' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {}
                    Some((open, from)) => {
                        return Err(format!(
                            "`{c}` at byte {at} closes `{open}` opened at byte {from}"
                        ))
                    }
                    None => return Err(format!("unmatched `{c}` at byte {at}")),
                }
            }
            _ => {}
        }
    }
    if let Some((q, from)) = quote {
        return Err(format!("unterminated {q} quote opened at byte {from}"));
    }
    match stack.pop() {
        Some((open, from)) => Err(format!("unclosed `{open}` opened at byte {from}")),
        None => Ok(()),
    }
}

fn run_external(command: &str, text: &str) -> Result<ValidityVerdict, AuditError> {
    let unavailable = |reason: String| AuditError::ExternalCheckerUnavailable {
        command: command.to_string(),
        reason,
    };
    let mut parts = command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| unavailable("empty command".into()))?;
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| unavailable(e.to_string()))?;
    if let Some(mut stdin) = child.stdin.take() {
        // a checker may exit without reading everything
        match stdin.write_all(text.as_bytes()) {
            Err(e) if e.kind() != ErrorKind::BrokenPipe => return Err(unavailable(e.to_string())),
            _ => {}
        }
    }
    let output = child
        .wait_with_output()
        .map_err(|e| unavailable(e.to_string()))?;
    let stderr = String::from_utf8_lossy(&output.stderr).trim().to_string();
    let detail = match (output.status.success(), stderr.is_empty()) {
        (true, _) => None,
        (false, true) => Some(format!("exit status {}", output.status)),
        (false, false) => Some(stderr),
    };
    Ok(ValidityVerdict {
        pass: output.status.success(),
        checker_id: format!("external:{command}"),
        detail,
    })
}

pub fn check_wellformed(text: &str, checker: &Checker) -> Result<ValidityVerdict, AuditError> {
    match checker {
        Checker::Builtin => {
            let result = balance(text);
            Ok(ValidityVerdict {
                pass: result.is_ok(),
                checker_id: BUILTIN_ID.to_string(),
                detail: result.err(),
            })
        }
        Checker::External(cmd) => run_external(cmd, text),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityLabel {
    Stable,
    Regressed,
    Fixed,
    StableFail,
}

impl StabilityLabel {
    pub fn classify(pre: bool, post: bool) -> Self {
        match (pre, post) {
            (true, true) => StabilityLabel::Stable,
            (true, false) => StabilityLabel::Regressed,
            (false, true) => StabilityLabel::Fixed,
            (false, false) => StabilityLabel::StableFail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityCell {
    pub pre: bool,
    pub post: bool,
    pub label: StabilityLabel,
}

impl StabilityCell {
    pub fn new(pre: bool, post: bool) -> Self {
        Self {
            pre,
            post,
            label: StabilityLabel::classify(pre, post),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StabilityCounts {
    pub stable: usize,
    pub regressed: usize,
    pub fixed: usize,
    pub stable_fail: usize,
}

impl StabilityCounts {
    pub fn add(&mut self, label: StabilityLabel) {
        match label {
            StabilityLabel::Stable => self.stable += 1,
            StabilityLabel::Regressed => self.regressed += 1,
            StabilityLabel::Fixed => self.fixed += 1,
            StabilityLabel::StableFail => self.stable_fail += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.stable + self.regressed + self.fixed + self.stable_fail
    }

    /// Share of all samples that went through a revision.
    pub fn revision_rate(&self, total_samples: usize) -> Option<f64> {
        (total_samples > 0).then(|| self.total() as f64 / total_samples as f64)
    }
}

/// Checks both sides of every pair and tallies the cells. Checks run on the
/// current rayon pool.
pub fn stability_matrix<S: AsRef<str> + Sync>(
    pairs: &[(S, S)],
    checker: &Checker,
) -> Result<(StabilityCounts, Vec<StabilityCell>), AuditError> {
    let cells: Vec<StabilityCell> = pairs
        .par_iter()
        .map(|(pre, post)| {
            let pre = check_wellformed(pre.as_ref(), checker)?.pass;
            let post = check_wellformed(post.as_ref(), checker)?.pass;
            Ok(StabilityCell::new(pre, post))
        })
        .collect::<Result<_, AuditError>>()?;
    let mut counts = StabilityCounts::default();
    for cell in &cells {
        counts.add(cell.label);
    }
    Ok((counts, cells))
}
