//! Canonical pretty-printer. Output re-parses to an equal program.

use std::fmt::Write;

use super::ast::*;
use super::parser::{API_MODULE, OBJECT_MODULE, POLICY_FUNCTION};

const INDENT: &str = "    ";

pub fn quote(s: &str) -> String {
    let q = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(q);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c == q => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(q);
    out
}

pub fn value(v: &Value) -> String {
    match v {
        Value::Object(o) => o.clone(),
        Value::Text(t) => quote(t),
        Value::Number(n) => format!("{n}"),
    }
}

pub fn call(c: &Call) -> String {
    let args: Vec<String> = c.kwargs.iter().map(|(k, v)| format!("{k}={}", value(v))).collect();
    format!("{}({})", c.callee, args.join(", "))
}

pub fn condition(c: &Condition) -> String {
    let joiner = match c.connective {
        Connective::And => " and ",
        Connective::Or => " or ",
    };
    c.clauses
        .iter()
        .map(|cl| {
            format!(
                "{}.material_properties[{}] {} {}",
                cl.object,
                quote(&cl.key),
                cl.op.as_str(),
                value(&cl.literal)
            )
        })
        .collect::<Vec<_>>()
        .join(joiner)
}

fn receptacle(r: &ReceptacleStmt) -> String {
    format!("{}.{}.append({})", r.subject, r.relation.as_str(), r.object)
}

fn import_line(module: &str, names: &[String], elided: bool) -> String {
    let mut line = format!("from {module} import {}", names.join(", "));
    if elided {
        line.push_str(if names.is_empty() { "..." } else { " ..." });
    }
    line
}

fn stmts(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        let pad = INDENT.repeat(depth);
        match &s.kind {
            StmtKind::Comment(c) => writeln!(out, "{pad}# {}", c.text),
            StmtKind::Call(c) => writeln!(out, "{pad}{}", call(c)),
            StmtKind::Receptacle(r) => writeln!(out, "{pad}{}", receptacle(r)),
            StmtKind::Ellipsis => writeln!(out, "{pad}..."),
            StmtKind::Loop(b) | StmtKind::Conditional(b) => {
                let kw = if matches!(s.kind, StmtKind::Loop(_)) { "while" } else { "if" };
                writeln!(out, "{pad}{kw} {}:", condition(&b.condition)).unwrap();
                stmts(out, &b.body, depth + 1);
                Ok(())
            }
        }
        .unwrap();
    }
}

pub fn print(p: &AgentProgram) -> String {
    let mut out = String::new();
    if !p.imports_apis.is_empty() || p.apis_elided {
        out.push_str("# primitive APIs\n");
        out.push_str(&import_line(API_MODULE, &p.imports_apis, p.apis_elided));
        out.push('\n');
    }
    if !p.imports_objects.is_empty() || p.objects_elided {
        out.push_str("# objects\n");
        out.push_str(&import_line(OBJECT_MODULE, &p.imports_objects, p.objects_elided));
        out.push('\n');
    }
    if !p.receptacle_stmts.is_empty() || p.preamble_elided {
        out.push_str("# object-object relation specification\n");
        for r in &p.receptacle_stmts {
            out.push_str(&receptacle(r));
            out.push('\n');
        }
        if p.preamble_elided {
            out.push_str("...\n");
        }
    }
    out.push_str("# program\n");
    let _ = writeln!(out, "def {POLICY_FUNCTION}():");
    stmts(&mut out, &p.body, 1);
    if p.has_trailing_invocation {
        out.push_str("# execute the program\n");
        let _ = writeln!(out, "{POLICY_FUNCTION}()");
    }
    out
}
