//! DIMACS CNF reading and canonical writing.

use std::fmt::Write as _;
use std::path::Path;

use super::{Clause, Formula, Lit};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number; for end-of-input errors, the last line.
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header `{0}`")]
    MalformedHeader(String),
    #[error("duplicate header")]
    DuplicateHeader,
    #[error("invalid token `{0}`")]
    InvalidToken(String),
    #[error("literal {lit} exceeds the declared variable count {num_vars}")]
    LiteralOutOfRange { lit: i64, num_vars: u32 },
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("header declares {expected} clauses but {found} were read")]
    ClauseCountMismatch { expected: usize, found: usize },
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

/// Parses DIMACS CNF. Clauses may span lines; `c` lines are comments and a
/// line starting with `%` ends the clause section (SATLIB convention).
pub fn parse_dimacs(input: &[u8]) -> Result<Formula, ParseError> {
    let text = std::str::from_utf8(input).map_err(|_| err(1, ParseErrorKind::InvalidUtf8))?;
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut last_line = 1;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(line_no, ParseErrorKind::DuplicateHeader));
            }
            header = Some(parse_header(line).ok_or_else(|| {
                err(line_no, ParseErrorKind::MalformedHeader(line.to_string()))
            })?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(err(line_no, ParseErrorKind::MissingHeader));
        };
        for token in line.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| err(line_no, ParseErrorKind::InvalidToken(token.to_string())))?;
            if value == 0 {
                clauses.push(Clause::new(current.drain(..)));
                continue;
            }
            if value.unsigned_abs() > num_vars as u64 {
                return Err(err(
                    line_no,
                    ParseErrorKind::LiteralOutOfRange { lit: value, num_vars },
                ));
            }
            current.push(Lit::new(value as i32).expect("nonzero"));
        }
    }

    let Some((num_vars, expected)) = header else {
        return Err(err(last_line, ParseErrorKind::MissingHeader));
    };
    if !current.is_empty() {
        return Err(err(last_line, ParseErrorKind::UnterminatedClause));
    }
    if clauses.len() != expected {
        return Err(err(
            last_line,
            ParseErrorKind::ClauseCountMismatch { expected, found: clauses.len() },
        ));
    }
    Ok(Formula::new(num_vars, clauses).expect("range checked while parsing"))
}

fn parse_header(line: &str) -> Option<(u32, usize)> {
    let mut parts = line.split_whitespace();
    if parts.next()? != "p" || parts.next()? != "cnf" {
        return None;
    }
    let n: u32 = parts.next()?.parse().ok()?;
    let m: usize = parts.next()?.parse().ok()?;
    if parts.next().is_some() || n > i32::MAX as u32 {
        return None;
    }
    Some((n, m))
}

/// Canonical DIMACS: header, then one `0`-terminated clause per line.
pub fn write_dimacs(formula: &Formula) -> String {
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", formula.num_vars(), formula.num_clauses()).unwrap();
    for clause in formula.clauses() {
        for lit in clause {
            write!(out, "{} ", lit.value()).unwrap();
        }
        out.push_str("0\n");
    }
    out
}

pub fn read_dimacs_file(path: impl AsRef<Path>) -> Result<Formula, crate::Error> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| crate::Error::io(path, e))?;
    parse_dimacs(&bytes).map_err(|e| crate::Error::Dimacs { path: path.to_path_buf(), source: e })
}
