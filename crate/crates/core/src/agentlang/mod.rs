//! The agent-program language.
//!
//! A program imports primitive APIs and objects, wires receptacle
//! relations, and defines a single `robot_program` whose body is a sequence
//! of comments, keyword-only calls and `while`/`if` blocks over material
//! properties:
//!
//! ```text
//! from utils import find, grab, chop, put_back
//! from objects_pool import chocolate_0, knife_0, cutting_board_0
//! def robot_program():
//!     # 1. Chop the chocolate into small pieces.
//!     find(obj=chocolate_0)
//!     while chocolate_0.material_properties['form'] != 'small pieces':
//!         chop(obj=chocolate_0, tool=knife_0, on=cutting_board_0)
//! robot_program()
//! ```
//!
//! Anything outside this subset is a [`ParseError`].

mod ast;
mod extract;
mod lexer;
mod parser;
mod printer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tutorial;

pub use ast::*;
pub use extract::{
    extract_calls, extract_use_cases, use_cases_lenient, CallSite, NoLeadingComment, UseCase,
    UseCaseSource,
};
pub use parser::{parse, API_MODULE, OBJECT_MODULE, POLICY_FUNCTION};
pub use printer::print;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("line {line}, column {column}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub reason: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, reason: impl Into<String>) -> Self {
        Self { line, column, reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coverage {
    Ok,
    MissingSteps(Vec<u32>),
}

/// Every step `1..=n` of the tutorial needs a numbered step comment.
/// Only presence is checked; order and headline wording are not.
pub fn check_step_coverage(p: &AgentProgram, t: &Tutorial) -> Coverage {
    let present: std::collections::HashSet<u32> = p.step_numbers().into_iter().collect();
    let missing: Vec<u32> = t.step_indices().filter(|i| !present.contains(i)).collect();
    if missing.is_empty() {
        Coverage::Ok
    } else {
        Coverage::MissingSteps(missing)
    }
}

/// Why a generated program was turned away.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum Rejection {
    #[error("syntax: {0}")]
    Syntax(ParseError),
    #[error("missing step comments for steps {0:?}")]
    MissingSteps(Vec<u32>),
}

/// Both acceptance checks: the text parses and covers every step.
pub fn verify(source_text: &str, t: &Tutorial) -> Result<AgentProgram, Rejection> {
    let p = parse(source_text).map_err(Rejection::Syntax)?;
    match check_step_coverage(&p, t) {
        Coverage::Ok => Ok(p),
        Coverage::MissingSteps(m) => Err(Rejection::MissingSteps(m)),
    }
}

#[cfg(test)]
mod tests;
