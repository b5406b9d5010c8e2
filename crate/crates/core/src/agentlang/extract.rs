//! Call-site and use-case extraction from parsed programs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSite {
    pub callee: String,
    pub kwargs: Vec<(String, Value)>,
    /// Number of the most recent step comment above the call.
    pub step: Option<u32>,
    pub line: usize,
    pub end_line: usize,
}

/// A verbatim snippet demonstrating one API: from a leading comment down
/// to the line calling the API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseCase {
    pub api_name: String,
    pub leading_comment: String,
    pub snippet: String,
    pub source: UseCaseSource,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UseCaseSource {
    pub tutorial_id: String,
    pub step: Option<u32>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("call to `{callee}` at line {line} has no comment above it")]
pub struct NoLeadingComment {
    pub callee: String,
    pub line: usize,
}

/// Every call statement at any depth, in source order.
pub fn extract_calls(p: &AgentProgram) -> Vec<CallSite> {
    let mut step = None;
    let mut out = Vec::new();
    for s in p.walk() {
        match &s.kind {
            StmtKind::Comment(Comment { kind: CommentKind::Step(n), .. }) => step = Some(*n),
            StmtKind::Call(c) => out.push(CallSite {
                callee: c.callee.clone(),
                kwargs: c.kwargs.clone(),
                step,
                line: s.line,
                end_line: s.end_line,
            }),
            _ => {}
        }
    }
    out
}

/// One use case per call site, or `None` where no comment precedes the call.
pub fn use_cases_lenient(
    p: &AgentProgram,
    source_text: &str,
    tutorial_id: &str,
) -> Vec<(CallSite, Option<UseCase>)> {
    let lines: Vec<&str> = source_text.lines().collect();
    let mut step = None;
    let mut last_comment: Option<(usize, &str)> = None;
    let mut out = Vec::new();
    for s in p.walk() {
        match &s.kind {
            StmtKind::Comment(c) => {
                if let CommentKind::Step(n) = c.kind {
                    step = Some(n);
                }
                if c.kind != CommentKind::Skip {
                    last_comment = Some((s.line, c.text.as_str()));
                }
            }
            StmtKind::Call(call) => {
                let site = CallSite {
                    callee: call.callee.clone(),
                    kwargs: call.kwargs.clone(),
                    step,
                    line: s.line,
                    end_line: s.end_line,
                };
                let uc = last_comment.map(|(from, text)| UseCase {
                    api_name: call.callee.clone(),
                    leading_comment: text.to_string(),
                    snippet: lines[from - 1..s.end_line].join("\n"),
                    source: UseCaseSource { tutorial_id: tutorial_id.to_string(), step },
                });
                out.push((site, uc));
            }
            _ => {}
        }
    }
    out
}

/// Extracts the use case of every call site.
///
/// The leading comment is the nearest non-skip comment above the call, so a
/// sub-step comment wins over the enclosing step comment whenever one
/// intervenes. `source_text` must be the exact text that was parsed.
pub fn extract_use_cases(
    p: &AgentProgram,
    source_text: &str,
    tutorial_id: &str,
) -> Result<Vec<UseCase>, NoLeadingComment> {
    use_cases_lenient(p, source_text, tutorial_id)
        .into_iter()
        .map(|(site, uc)| uc.ok_or(NoLeadingComment { callee: site.callee, line: site.line }))
        .collect()
}
