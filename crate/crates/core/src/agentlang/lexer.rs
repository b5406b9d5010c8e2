//! Splits program text into logical lines of tokens.
//!
//! A logical line is one physical line, or several when brackets are left
//! open at the end of a line. Comment-only lines are kept as their own
//! logical lines; trailing comments after code are dropped.

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Assign,
    EqEq,
    NotEq,
    Dot,
    Colon,
    Ellipsis,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Num(_) => "number literal".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Assign => "`=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::NotEq => "`!=`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Ellipsis => "`...`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineKind {
    Comment(String),
    Code(Vec<Token>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalLine {
    pub line: usize,
    pub end_line: usize,
    /// Leading spaces on the first physical line.
    pub indent: usize,
    pub kind: LineKind,
}

pub fn logical_lines(text: &str) -> Result<Vec<LogicalLine>, ParseError> {
    let physical: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < physical.len() {
        let raw = physical[i];
        let line_no = i + 1;
        let content = raw.trim_start_matches(' ');
        let indent = raw.len() - content.len();
        if content.trim().is_empty() {
            i += 1;
            continue;
        }
        if content.starts_with('\t') {
            return Err(ParseError::new(line_no, indent + 1, "tab characters are not allowed in indentation"));
        }
        if let Some(comment) = content.strip_prefix('#') {
            out.push(LogicalLine {
                line: line_no,
                end_line: line_no,
                indent,
                kind: LineKind::Comment(comment.trim().to_string()),
            });
            i += 1;
            continue;
        }
        let mut tokens = Vec::new();
        let mut depth: i32 = 0;
        let mut j = i;
        loop {
            let (col0, body) = if j == i { (indent, content) } else { (0, physical[j]) };
            depth = scan_line(body, j + 1, col0, depth, &mut tokens)?;
            if depth <= 0 {
                break;
            }
            j += 1;
            if j >= physical.len() {
                return Err(ParseError::new(line_no, indent + 1, "unclosed bracket at end of input"));
            }
        }
        out.push(LogicalLine { line: line_no, end_line: j + 1, indent, kind: LineKind::Code(tokens) });
        i = j + 1;
    }
    Ok(out)
}

/// Tokenizes one physical line, returning the updated bracket depth.
fn scan_line(
    text: &str,
    line: usize,
    col_offset: usize,
    mut depth: i32,
    out: &mut Vec<Token>,
) -> Result<i32, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let col = col_offset + k + 1;
        let mut push = |tok: Tok| out.push(Token { tok, line, col });
        match c {
            ' ' | '\t' => {
                k += 1;
            }
            '#' => break,
            '(' | '[' => {
                depth += 1;
                push(if c == '(' { Tok::LParen } else { Tok::LBracket });
                k += 1;
            }
            ')' | ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(ParseError::new(line, col, format!("unmatched `{c}`")));
                }
                push(if c == ')' { Tok::RParen } else { Tok::RBracket });
                k += 1;
            }
            ',' => {
                push(Tok::Comma);
                k += 1;
            }
            ':' => {
                push(Tok::Colon);
                k += 1;
            }
            '=' if chars.get(k + 1) == Some(&'=') => {
                push(Tok::EqEq);
                k += 2;
            }
            '=' => {
                push(Tok::Assign);
                k += 1;
            }
            '!' if chars.get(k + 1) == Some(&'=') => {
                push(Tok::NotEq);
                k += 2;
            }
            '.' if chars.get(k + 1) == Some(&'.') && chars.get(k + 2) == Some(&'.') => {
                push(Tok::Ellipsis);
                k += 3;
            }
            '.' if chars.get(k + 1).is_some_and(|d| d.is_ascii_digit()) => {
                let (n, len) = scan_number(&chars[k..], line, col)?;
                push(Tok::Num(n));
                k += len;
            }
            '.' => {
                push(Tok::Dot);
                k += 1;
            }
            '\'' | '"' => {
                let (s, len) = scan_string(&chars[k..], line, col)?;
                push(Tok::Str(s));
                k += len;
            }
            '-' if chars.get(k + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.') => {
                let (n, len) = scan_number(&chars[k + 1..], line, col)?;
                push(Tok::Num(-n));
                k += len + 1;
            }
            c if c.is_ascii_digit() => {
                let (n, len) = scan_number(&chars[k..], line, col)?;
                push(Tok::Num(n));
                k += len;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = k;
                while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                    k += 1;
                }
                push(Tok::Ident(chars[start..k].iter().collect()));
            }
            other => {
                return Err(ParseError::new(line, col, format!("unexpected character {other:?}")));
            }
        }
    }
    Ok(depth)
}

fn scan_number(chars: &[char], line: usize, col: usize) -> Result<(f64, usize), ParseError> {
    let mut k = 0;
    while k < chars.len()
        && (chars[k].is_ascii_digit()
            || chars[k] == '.'
            || chars[k] == '_'
            || chars[k] == 'e'
            || chars[k] == 'E'
            || ((chars[k] == '-' || chars[k] == '+') && k > 0 && matches!(chars[k - 1], 'e' | 'E')))
    {
        k += 1;
    }
    if k < chars.len() && (chars[k].is_ascii_alphabetic() || chars[k] == '_') {
        return Err(ParseError::new(line, col, "invalid number literal"));
    }
    let text: String = chars[..k].iter().filter(|c| **c != '_').collect();
    let n: f64 = text
        .parse()
        .ok()
        .filter(|n: &f64| n.is_finite())
        .ok_or_else(|| ParseError::new(line, col, format!("invalid number literal {text:?}")))?;
    Ok((n, k))
}

fn scan_string(chars: &[char], line: usize, col: usize) -> Result<(String, usize), ParseError> {
    let quote = chars[0];
    let mut s = String::new();
    let mut k = 1;
    while k < chars.len() {
        match chars[k] {
            c if c == quote => return Ok((s, k + 1)),
            '\\' => {
                let esc = chars
                    .get(k + 1)
                    .ok_or_else(|| ParseError::new(line, col, "unterminated string literal"))?;
                s.push(match esc {
                    'n' => '\n',
                    't' => '\t',
                    other => *other,
                });
                k += 2;
            }
            c => {
                s.push(c);
                k += 1;
            }
        }
    }
    Err(ParseError::new(line, col, "unterminated string literal"))
}
