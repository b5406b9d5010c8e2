use serde::{Deserialize, Serialize};

/// A parsed agent program: imports, receptacle wiring and the body of the
/// single `robot_program` policy function.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentProgram {
    /// Names imported from `utils`.
    pub imports_apis: Vec<String>,
    /// Names imported from `objects_pool`.
    pub imports_objects: Vec<String>,
    /// The `utils` import line ended with `...`.
    pub apis_elided: bool,
    /// The `objects_pool` import line ended with `...`.
    pub objects_elided: bool,
    /// Top-level receptacle statements in source order.
    pub receptacle_stmts: Vec<ReceptacleStmt>,
    /// A bare `...` line appeared at top level.
    pub preamble_elided: bool,
    pub body: Vec<Stmt>,
    pub has_trailing_invocation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Receptacles,
    ReceptaclesOf,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Receptacles => "receptacles",
            Relation::ReceptaclesOf => "receptacles_of",
        }
    }
}

/// `subject.<relation>.append(object)`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptacleStmt {
    pub subject: String,
    pub relation: Relation,
    pub object: String,
}

impl ReceptacleStmt {
    /// `(container, contained)` for this statement.
    pub fn containment(&self) -> (&str, &str) {
        match self.relation {
            Relation::Receptacles => (&self.object, &self.subject),
            Relation::ReceptaclesOf => (&self.subject, &self.object),
        }
    }
}

/// A statement with its physical line span (1-based, inclusive).
///
/// Equality ignores the span so that re-printed programs compare equal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stmt {
    pub line: usize,
    pub end_line: usize,
    pub kind: StmtKind,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StmtKind {
    Comment(Comment),
    Call(Call),
    Loop(Block),
    Conditional(Block),
    Receptacle(ReceptacleStmt),
    Ellipsis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommentKind {
    Step(u32),
    Substep,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub kind: CommentKind,
    /// Text after `#`, surrounding whitespace trimmed.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub callee: String,
    pub kwargs: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub condition: Condition,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connective {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub clauses: Vec<Comparison>,
    pub connective: Connective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// `object.material_properties['key'] <op> literal`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub object: String,
    pub key: String,
    pub op: CmpOp,
    pub literal: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Object(String),
    Text(String),
    Number(f64),
}

impl AgentProgram {
    /// Pre-order walk over every statement in the body, in source order.
    pub fn walk(&self) -> Vec<&Stmt> {
        fn go<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
            for s in stmts {
                out.push(s);
                if let StmtKind::Loop(b) | StmtKind::Conditional(b) = &s.kind {
                    go(&b.body, out);
                }
            }
        }
        let mut out = Vec::new();
        go(&self.body, &mut out);
        out
    }

    /// Numbers of all step comments, in source order.
    pub fn step_numbers(&self) -> Vec<u32> {
        self.walk()
            .into_iter()
            .filter_map(|s| match &s.kind {
                StmtKind::Comment(Comment { kind: CommentKind::Step(n), .. }) => Some(*n),
                _ => None,
            })
            .collect()
    }
}
