//! Recursive-descent parser over indentation-delimited logical lines.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{logical_lines, LineKind, LogicalLine, Tok, Token};
use super::ParseError;
use crate::worldmodel::{is_identifier, is_object_id};

pub const POLICY_FUNCTION: &str = "robot_program";
pub const API_MODULE: &str = "utils";
pub const OBJECT_MODULE: &str = "objects_pool";

pub fn parse(text: &str) -> Result<AgentProgram, ParseError> {
    let lines = logical_lines(text)?;
    let mut p = Parser { lines, pos: 0, unit: 0, seen_steps: HashSet::new() };
    let program = p.program()?;
    check_declared_objects(&program)?;
    Ok(program)
}

struct Parser {
    lines: Vec<LogicalLine>,
    pos: usize,
    unit: usize,
    seen_steps: HashSet<u32>,
}

/// Cursor over the tokens of one logical line.
struct Cursor<'a> {
    toks: &'a [Token],
    i: usize,
    line: &'a LogicalLine,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a LogicalLine, toks: &'a [Token]) -> Self {
        Self { toks, i: 0, line }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Tok> {
        self.toks.get(self.i + n).map(|t| &t.tok)
    }

    fn err_here(&self, reason: impl Into<String>) -> ParseError {
        match self.toks.get(self.i) {
            Some(t) => ParseError::new(t.line, t.col, reason),
            None => {
                let (line, col) = self
                    .toks
                    .last()
                    .map(|t| (t.line, t.col + 1))
                    .unwrap_or((self.line.line, self.line.indent + 1));
                ParseError::new(line, col, reason)
            }
        }
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.peek();
        self.i += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.i += 1;
                Ok(())
            }
            Some(t) => Err(self.err_here(format!("expected {what}, found {}", t.describe()))),
            None => Err(self.err_here(format!("expected {what} before end of line"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<&'a str, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.i += 1;
                Ok(s)
            }
            Some(t) => Err(self.err_here(format!("expected {what}, found {}", t.describe()))),
            None => Err(self.err_here(format!("expected {what} before end of line"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.i += 1;
                Ok(())
            }
            _ => Err(self.err_here(format!("expected `{kw}`"))),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err_here(format!("unexpected {} after statement", t.describe()))),
        }
    }
}


impl Parser {
    fn program(&mut self) -> Result<AgentProgram, ParseError> {
        let mut prog = AgentProgram::default();
        let mut saw_def = false;
        while self.pos < self.lines.len() {
            let line = self.lines[self.pos].clone();
            let toks = match &line.kind {
                LineKind::Comment(_) => {
                    self.pos += 1;
                    continue;
                }
                LineKind::Code(t) => t,
            };
            if line.indent != 0 {
                return Err(ParseError::new(line.line, 1, "unexpected indent at top level"));
            }
            let mut c = Cursor::new(&line, toks);
            match (c.peek(), c.peek_at(1)) {
                (Some(Tok::Ident(kw)), _) if kw == "from" => {
                    if saw_def {
                        return Err(c.err_here("imports must precede the policy function"));
                    }
                    self.import(&mut c, &mut prog)?;
                    self.pos += 1;
                }
                (Some(Tok::Ident(kw)), _) if kw == "def" => {
                    if saw_def {
                        return Err(c.err_here("only one policy function may be defined"));
                    }
                    c.next();
                    let name = c.ident("function name")?;
                    if name != POLICY_FUNCTION {
                        return Err(ParseError::new(
                            line.line,
                            5,
                            format!("policy function must be named `{POLICY_FUNCTION}`, found `{name}`"),
                        ));
                    }
                    c.expect(&Tok::LParen, "`(`")?;
                    c.expect(&Tok::RParen, "`)`")?;
                    c.expect(&Tok::Colon, "`:` after function signature")?;
                    c.end()?;
                    self.pos += 1;
                    self.unit = self.body_unit(&line)?;
                    prog.body = self.block(1, &line)?;
                    saw_def = true;
                }
                (Some(Tok::Ident(name)), Some(Tok::LParen)) if name == POLICY_FUNCTION => {
                    if !saw_def {
                        return Err(c.err_here("policy function invoked before its definition"));
                    }
                    if prog.has_trailing_invocation {
                        return Err(c.err_here("policy function invoked more than once"));
                    }
                    c.next();
                    c.next();
                    c.expect(&Tok::RParen, "`)`")?;
                    c.end()?;
                    prog.has_trailing_invocation = true;
                    self.pos += 1;
                }
                (Some(Tok::Ident(_)), Some(Tok::Dot)) => {
                    if saw_def {
                        return Err(c.err_here("receptacle statements must precede the policy function"));
                    }
                    let r = receptacle(&mut c)?;
                    prog.receptacle_stmts.push(r);
                    self.pos += 1;
                }
                (Some(Tok::Ellipsis), None) => {
                    prog.preamble_elided = true;
                    self.pos += 1;
                }
                _ => return Err(c.err_here("unknown top-level statement")),
            }
            if prog.has_trailing_invocation && self.pos < self.lines.len() {
                // Only comments may follow the invocation.
                if let Some(l) = self.lines[self.pos..]
                    .iter()
                    .find(|l| matches!(l.kind, LineKind::Code(_)))
                {
                    return Err(ParseError::new(l.line, l.indent + 1, "code after the policy invocation"));
                }
            }
        }
        if !saw_def {
            let line = self.lines.last().map(|l| l.end_line).unwrap_or(1);
            return Err(ParseError::new(
                line,
                1,
                format!("missing policy function `def {POLICY_FUNCTION}():`"),
            ));
        }
        Ok(prog)
    }

    fn import(&self, c: &mut Cursor<'_>, prog: &mut AgentProgram) -> Result<(), ParseError> {
        c.keyword("from")?;
        let module = c.ident("module name")?;
        c.keyword("import")?;
        let mut names = Vec::new();
        let mut elided = false;
        loop {
            match c.next() {
                Some(Tok::Ident(n)) => names.push(n.clone()),
                Some(Tok::Ellipsis) => {
                    elided = true;
                    break;
                }
                _ => {
                    c.i -= 1;
                    return Err(c.err_here("expected a name to import"));
                }
            }
            match c.peek() {
                None => break,
                Some(Tok::Comma) => {
                    c.next();
                }
                Some(Tok::Ellipsis) => {
                    c.next();
                    elided = true;
                    break;
                }
                Some(t) => return Err(c.err_here(format!("unexpected {} in import list", t.describe()))),
            }
        }
        c.end()?;
        match module {
            API_MODULE => {
                prog.imports_apis.extend(names);
                prog.apis_elided |= elided;
            }
            OBJECT_MODULE => {
                for n in &names {
                    if !is_object_id(n) {
                        return Err(ParseError::new(c.line.line, 1, format!("`{n}` is not an object id")));
                    }
                }
                prog.imports_objects.extend(names);
                prog.objects_elided |= elided;
            }
            other => {
                return Err(ParseError::new(
                    c.line.line,
                    6,
                    format!("imports are only allowed from `{API_MODULE}` or `{OBJECT_MODULE}`, not `{other}`"),
                ))
            }
        }
        Ok(())
    }

    /// The indentation unit is the indent of the first code line in the body.
    fn body_unit(&self, def_line: &LogicalLine) -> Result<usize, ParseError> {
        let first = self.lines[self.pos..]
            .iter()
            .find(|l| matches!(l.kind, LineKind::Code(_)));
        match first {
            Some(l) if l.indent > 0 => Ok(l.indent),
            Some(l) => Err(ParseError::new(l.line, 1, "expected an indented block after `def`")),
            None => Err(ParseError::new(def_line.line, 1, "expected an indented block after `def`")),
        }
    }

    fn depth_of(&self, line: &LogicalLine) -> Result<usize, ParseError> {
        if line.indent % self.unit != 0 {
            return Err(ParseError::new(
                line.line,
                line.indent + 1,
                format!("inconsistent indentation: {} spaces is not a multiple of {}", line.indent, self.unit),
            ));
        }
        Ok(line.indent / self.unit)
    }

    fn next_code_depth(&self, from: usize) -> Result<usize, ParseError> {
        match self.lines[from..].iter().find(|l| matches!(l.kind, LineKind::Code(_))) {
            Some(l) => self.depth_of(l),
            None => Ok(0),
        }
    }

    /// Parses statements at exactly `depth`, stopping at the first line that
    /// belongs to a shallower block.
    fn block(&mut self, depth: usize, opener: &LogicalLine) -> Result<Vec<Stmt>, ParseError> {
        let mut out: Vec<Stmt> = Vec::new();
        while self.pos < self.lines.len() {
            let line = self.lines[self.pos].clone();
            match &line.kind {
                LineKind::Comment(text) => {
                    // Comments take the depth of the surrounding code: at
                    // least as deep as the next code line, at most `depth`.
                    let own = line.indent / self.unit;
                    let eff = own.max(self.next_code_depth(self.pos + 1)?).min(depth);
                    if eff < depth {
                        break;
                    }
                    out.push(Stmt {
                        line: line.line,
                        end_line: line.end_line,
                        kind: StmtKind::Comment(self.comment(text)),
                    });
                    self.pos += 1;
                }
                LineKind::Code(toks) => {
                    let d = self.depth_of(&line)?;
                    if d < depth {
                        break;
                    }
                    if d > depth {
                        return Err(ParseError::new(line.line, line.indent + 1, "unexpected indent"));
                    }
                    self.pos += 1;
                    let stmt = self.statement(&line, toks, depth)?;
                    out.push(stmt);
                }
            }
        }
        if !out.iter().any(|s| !matches!(s.kind, StmtKind::Comment(_))) {
            let (line, col) = match self.lines.get(self.pos) {
                Some(l) => (l.line, l.indent + 1),
                None => (opener.end_line + 1, 1),
            };
            return Err(ParseError::new(
                line,
                col,
                format!("expected an indented block after line {}", opener.line),
            ));
        }
        Ok(out)
    }

    fn comment(&mut self, text: &str) -> Comment {
        let kind = match step_number(text) {
            Some(n) if self.seen_steps.insert(n) => CommentKind::Step(n),
            Some(_) => CommentKind::Substep,
            None if is_skip(text) => CommentKind::Skip,
            None => CommentKind::Substep,
        };
        Comment { kind, text: text.to_string() }
    }

    fn statement(
        &mut self,
        line: &LogicalLine,
        toks: &[Token],
        depth: usize,
    ) -> Result<Stmt, ParseError> {
        let mut c = Cursor::new(line, toks);
        let kind = match (c.peek(), c.peek_at(1)) {
            (Some(Tok::Ident(kw)), _) if kw == "while" || kw == "if" => {
                let is_loop = kw == "while";
                c.next();
                let condition = condition(&mut c)?;
                c.expect(&Tok::Colon, "`:` after condition")?;
                c.end()?;
                let body = self.block(depth + 1, line)?;
                let block = Block { condition, body };
                if is_loop {
                    StmtKind::Loop(block)
                } else {
                    StmtKind::Conditional(block)
                }
            }
            (Some(Tok::Ellipsis), None) => StmtKind::Ellipsis,
            (Some(Tok::Ident(_)), Some(Tok::Dot)) => StmtKind::Receptacle(receptacle(&mut c)?),
            (Some(Tok::Ident(kw)), Some(Tok::LParen)) if !is_reserved(kw) => StmtKind::Call(call(&mut c)?),
            _ => return Err(c.err_here("unknown statement form")),
        };
        Ok(Stmt { line: line.line, end_line: line.end_line, kind })
    }
}

const RESERVED: &[&str] = &[
    "and", "or", "not", "if", "elif", "else", "while", "for", "in", "def", "return", "import",
    "from", "class", "lambda", "pass", "break", "continue", "True", "False", "None",
];

fn is_reserved(s: &str) -> bool {
    RESERVED.contains(&s)
}

/// `# 3. ...` style comments carry a step number.
fn step_number(text: &str) -> Option<u32> {
    let digits: String = text.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() || !text[digits.len()..].starts_with('.') {
        return None;
    }
    digits.parse().ok().filter(|n| *n > 0)
}

fn is_skip(text: &str) -> bool {
    text.to_ascii_lowercase().starts_with("skip this instruction")
}

fn receptacle(c: &mut Cursor<'_>) -> Result<ReceptacleStmt, ParseError> {
    let subject = c.ident("object id")?.to_string();
    if !is_object_id(&subject) {
        c.i -= 1;
        return Err(c.err_here(format!("`{subject}` is not an object id")));
    }
    c.expect(&Tok::Dot, "`.`")?;
    let relation = match c.ident("`receptacles` or `receptacles_of`")? {
        "receptacles" => Relation::Receptacles,
        "receptacles_of" => Relation::ReceptaclesOf,
        other => {
            c.i -= 1;
            return Err(c.err_here(format!("unsupported attribute `{other}`")));
        }
    };
    c.expect(&Tok::Dot, "`.`")?;
    c.keyword("append")?;
    c.expect(&Tok::LParen, "`(`")?;
    let object = c.ident("object id")?.to_string();
    if !is_object_id(&object) {
        c.i -= 1;
        return Err(c.err_here(format!("`{object}` is not an object id")));
    }
    c.expect(&Tok::RParen, "`)`")?;
    c.end()?;
    Ok(ReceptacleStmt { subject, relation, object })
}

fn call(c: &mut Cursor<'_>) -> Result<Call, ParseError> {
    let callee = c.ident("function name")?.to_string();
    c.expect(&Tok::LParen, "`(`")?;
    let mut kwargs: Vec<(String, Value)> = Vec::new();
    loop {
        if let Some(Tok::RParen) = c.peek() {
            c.next();
            break;
        }
        let arg_start = c.i;
        let is_keyword = matches!(
            (c.peek(), c.peek_at(1)),
            (Some(Tok::Ident(_)), Some(Tok::Assign))
        );
        if !is_keyword {
            c.i = arg_start;
            return Err(c.err_here("positional argument: every argument must be passed by keyword"));
        }
        let name = c.ident("keyword")?.to_string();
        if kwargs.iter().any(|(k, _)| *k == name) {
            c.i -= 1;
            return Err(c.err_here(format!("keyword argument `{name}` repeated")));
        }
        c.next();
        let v = value(c)?;
        kwargs.push((name, v));
        match c.next() {
            Some(Tok::Comma) => {}
            Some(Tok::RParen) => break,
            _ => {
                c.i -= 1;
                return Err(c.err_here("expected `,` or `)` in argument list"));
            }
        }
    }
    c.end()?;
    Ok(Call { callee, kwargs })
}

fn value(c: &mut Cursor<'_>) -> Result<Value, ParseError> {
    match c.peek() {
        Some(Tok::Str(s)) => {
            c.next();
            Ok(Value::Text(s.clone()))
        }
        Some(Tok::Num(n)) => {
            c.next();
            Ok(Value::Number(*n))
        }
        Some(Tok::Ident(s)) if is_object_id(s) && !matches!(c.peek_at(1), Some(Tok::Dot | Tok::LParen | Tok::LBracket)) => {
            c.next();
            Ok(Value::Object(s.clone()))
        }
        Some(Tok::Ident(s)) if is_identifier(s) && !matches!(c.peek_at(1), Some(Tok::Dot | Tok::LParen | Tok::LBracket)) => {
            Err(c.err_here(format!("`{s}` is neither a literal nor an object reference")))
        }
        Some(t) => Err(c.err_here(format!("expected a literal or object reference, found {}", t.describe()))),
        None => Err(c.err_here("expected a value")),
    }
}

fn condition(c: &mut Cursor<'_>) -> Result<Condition, ParseError> {
    let mut clauses = vec![comparison(c)?];
    let mut connective: Option<Connective> = None;
    while let Some(Tok::Ident(kw)) = c.peek() {
        let conn = match kw.as_str() {
            "and" => Connective::And,
            "or" => Connective::Or,
            _ => break,
        };
        if connective.is_some_and(|k| k != conn) {
            return Err(c.err_here("malformed condition: `and` and `or` cannot be mixed"));
        }
        connective = Some(conn);
        c.next();
        clauses.push(comparison(c)?);
    }
    Ok(Condition { clauses, connective: connective.unwrap_or(Connective::And) })
}

fn comparison(c: &mut Cursor<'_>) -> Result<Comparison, ParseError> {
    let malformed = |c: &Cursor<'_>, what: &str| {
        c.err_here(format!(
            "malformed condition: expected {what} in `<object>.material_properties['<key>'] == <literal>`"
        ))
    };
    let object = match c.next() {
        Some(Tok::Ident(s)) if is_object_id(s) => s.clone(),
        _ => {
            c.i -= 1;
            return Err(malformed(c, "an object id"));
        }
    };
    if c.next() != Some(&Tok::Dot) {
        c.i -= 1;
        return Err(malformed(c, "`.`"));
    }
    match c.next() {
        Some(Tok::Ident(s)) if s == "material_properties" => {}
        _ => {
            c.i -= 1;
            return Err(malformed(c, "`material_properties`"));
        }
    }
    if c.next() != Some(&Tok::LBracket) {
        c.i -= 1;
        return Err(malformed(c, "`[`"));
    }
    let key = match c.next() {
        Some(Tok::Str(s)) => s.clone(),
        _ => {
            c.i -= 1;
            return Err(malformed(c, "a string key"));
        }
    };
    if c.next() != Some(&Tok::RBracket) {
        c.i -= 1;
        return Err(malformed(c, "`]`"));
    }
    let op = match c.next() {
        Some(Tok::EqEq) => CmpOp::Eq,
        Some(Tok::NotEq) => CmpOp::Ne,
        _ => {
            c.i -= 1;
            return Err(malformed(c, "`==` or `!=`"));
        }
    };
    let literal = match c.next() {
        Some(Tok::Str(s)) => Value::Text(s.clone()),
        Some(Tok::Num(n)) => Value::Number(*n),
        _ => {
            c.i -= 1;
            return Err(malformed(c, "a string or number literal"));
        }
    };
    Ok(Comparison { object, key, op, literal })
}

/// Every object referenced by a call argument or a condition must be
/// imported, unless the object import list is elided with `...`.
fn check_declared_objects(p: &AgentProgram) -> Result<(), ParseError> {
    if p.objects_elided {
        return Ok(());
    }
    let declared: HashSet<&str> = p.imports_objects.iter().map(String::as_str).collect();
    for s in p.walk() {
        let mut used: Vec<&str> = Vec::new();
        match &s.kind {
            StmtKind::Call(call) => {
                used.extend(call.kwargs.iter().filter_map(|(_, v)| match v {
                    Value::Object(o) => Some(o.as_str()),
                    _ => None,
                }));
            }
            StmtKind::Loop(b) | StmtKind::Conditional(b) => {
                used.extend(b.condition.clauses.iter().map(|c| c.object.as_str()));
            }
            _ => {}
        }
        if let Some(o) = used.into_iter().find(|o| !declared.contains(o)) {
            return Err(ParseError::new(
                s.line,
                1,
                format!("object `{o}` is not imported from `{OBJECT_MODULE}`"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(body: &str) -> String {
        format!(
            "from utils import find, grab\nfrom objects_pool import cup_0, sink_0, chocolate_0\ndef robot_program():\n{body}robot_program()\n"
        )
    }

    fn err(text: &str) -> ParseError {
        parse(text).expect_err("should fail")
    }

    #[test]
    fn minimal_program() {
        let p = parse(&wrap("    # 1. Find the cup.\n    find(obj=cup_0)\n")).unwrap();
        assert_eq!(p.imports_apis, ["find", "grab"]);
        assert_eq!(p.body.len(), 2);
        assert!(p.has_trailing_invocation);
        assert_eq!(p.step_numbers(), [1]);
    }

    #[test]
    fn empty_text_is_missing_function() {
        let e = err("");
        assert!(e.reason.contains("missing policy function"), "{e}");
        let e = err("# just a comment\nfrom utils import find\n");
        assert!(e.reason.contains("missing policy function"), "{e}");
    }

    #[test]
    fn wrong_function_name() {
        let e = err("def main():\n    find(obj=cup_0)\n");
        assert!(e.reason.contains("robot_program"));
    }

    #[test]
    fn positional_argument_rejected() {
        let e = err(&wrap("    grab(cup_0)\n"));
        assert!(e.reason.contains("positional"), "{e}");
        assert_eq!((e.line, e.column), (4, 10));
    }

    #[test]
    fn bare_identifier_value_rejected() {
        let e = err(&wrap("    find(obj=cup)\n"));
        assert!(e.reason.contains("neither a literal"), "{e}");
    }

    #[test]
    fn unknown_statement_rejected() {
        for body in ["    x = 1\n", "    for c in cups:\n        find(obj=cup_0)\n", "    return\n", "    pass\n"] {
            let e = err(&wrap(body));
            assert!(e.reason.contains("unknown statement"), "{body:?}: {e}");
        }
    }

    #[test]
    fn indentation_errors() {
        let e = err(&wrap("    find(obj=cup_0)\n      grab(obj=cup_0)\n"));
        assert!(e.reason.contains("inconsistent indentation"), "{e}");
        let e = err(&wrap("    find(obj=cup_0)\n        grab(obj=cup_0)\n"));
        assert!(e.reason.contains("unexpected indent"), "{e}");
        let e = err(&wrap("    while cup_0.material_properties['filled'] != 'full':\n    grab(obj=cup_0)\n"));
        assert!(e.reason.contains("indented block"), "{e}");
    }

    #[test]
    fn mixed_connectives_rejected() {
        let cond = "cup_0.material_properties['a'] == 1 and cup_0.material_properties['b'] == 2 or sink_0.material_properties['c'] != 'x'";
        let e = err(&wrap(&format!("    while {cond}:\n        find(obj=cup_0)\n")));
        assert!(e.reason.contains("cannot be mixed"), "{e}");
    }

    #[test]
    fn malformed_condition() {
        let e = err(&wrap("    if cup_0.form == 'x':\n        find(obj=cup_0)\n"));
        assert!(e.reason.contains("malformed condition"), "{e}");
        let e = err(&wrap("    if cup_0.material_properties['form'] > 1:\n        find(obj=cup_0)\n"));
        assert!(e.reason.contains("'>'"), "{e}");
    }

    #[test]
    fn multi_clause_condition() {
        let cond = "cup_0.material_properties['a'] == 1 or sink_0.material_properties['c'] != 'x'";
        let p = parse(&wrap(&format!("    if {cond}:\n        find(obj=cup_0)\n"))).unwrap();
        let StmtKind::Conditional(b) = &p.body[0].kind else { panic!() };
        assert_eq!(b.condition.connective, Connective::Or);
        assert_eq!(b.condition.clauses.len(), 2);
        assert_eq!(b.condition.clauses[0].literal, Value::Number(1.0));
    }

    #[test]
    fn undeclared_object_rejected() {
        let e = err(&wrap("    find(obj=knife_0)\n"));
        assert!(e.reason.contains("knife_0"), "{e}");
        let text = "from objects_pool import cup_0 ...\ndef robot_program():\n    find(obj=knife_0)\n";
        assert!(parse(text).is_ok());
    }

    #[test]
    fn step_comment_kinds() {
        let body = "    # 1. Fill the cup.\n    find(obj=cup_0)\n    # skip this instruction\n    # 1. again\n    grab(obj=cup_0)\n    # 2.5 is fine\n    find(obj=sink_0)\n";
        let p = parse(&wrap(body)).unwrap();
        let kinds: Vec<_> = p
            .walk()
            .into_iter()
            .filter_map(|s| match &s.kind {
                StmtKind::Comment(c) => Some(c.kind),
                _ => None,
            })
            .collect();
        assert_eq!(
            kinds,
            [CommentKind::Step(1), CommentKind::Skip, CommentKind::Substep, CommentKind::Step(2)]
        );
    }

    #[test]
    fn comment_depth_follows_code() {
        // column-0 comment inside the body attaches to the body
        let body = "    find(obj=cup_0)\n# note\n    while cup_0.material_properties['filled'] != 'full':\n# inside\n        grab(obj=cup_0)\n        # trailing\n    find(obj=sink_0)\n";
        let p = parse(&wrap(body)).unwrap();
        assert_eq!(p.body.len(), 4);
        let StmtKind::Loop(b) = &p.body[2].kind else { panic!() };
        assert_eq!(b.body.len(), 3);
    }

    #[test]
    fn code_after_invocation_rejected() {
        let text = wrap("    find(obj=cup_0)\n") + "find(obj=cup_0)\n";
        assert!(parse(&text).is_err());
    }

    #[test]
    fn non_policy_def_rejected() {
        let text = wrap("    find(obj=cup_0)\n").replace("robot_program()\n", "def other():\n    find(obj=cup_0)\n");
        assert!(parse(&text).is_err());
    }
}
