//! Level-annotated solver trails and their text format.
//!
//! ```text
//! trail v1 n=4
//! D 4 1
//! D 3 2
//! A -2 2
//! BT -3 1
//! BT 0 0
//! ```
//!
//! Each line is `D|A|BT <signed literal> <level>`. `BT 0 0` is a restart,
//! the only event without a literal.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::cnf::Lit;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    D,
    A,
    BT,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::D => "D",
            Tag::A => "A",
            Tag::BT => "BT",
        })
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Tag, String> {
        match s {
            "D" => Ok(Tag::D),
            "A" => Ok(Tag::A),
            "BT" => Ok(Tag::BT),
            other => Err(format!("unknown tag `{other}`")),
        }
    }
}

/// One solver event; `level` is the decision level after the event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrailEvent {
    Decision { lit: Lit, level: u32 },
    Implied { lit: Lit, level: u32 },
    /// Backjump to `level`, followed by enqueueing the asserting literal `lit`.
    Backjump { lit: Lit, level: u32 },
    /// Backtrack to level 0 without enqueueing anything.
    Restart,
}

impl TrailEvent {
    pub fn tag(&self) -> Tag {
        match self {
            TrailEvent::Decision { .. } => Tag::D,
            TrailEvent::Implied { .. } => Tag::A,
            TrailEvent::Backjump { .. } | TrailEvent::Restart => Tag::BT,
        }
    }

    pub fn lit(&self) -> Option<Lit> {
        match *self {
            TrailEvent::Decision { lit, .. }
            | TrailEvent::Implied { lit, .. }
            | TrailEvent::Backjump { lit, .. } => Some(lit),
            TrailEvent::Restart => None,
        }
    }

    pub fn level(&self) -> u32 {
        match *self {
            TrailEvent::Decision { level, .. }
            | TrailEvent::Implied { level, .. }
            | TrailEvent::Backjump { level, .. } => level,
            TrailEvent::Restart => 0,
        }
    }

    /// Shorthand for tests and fixtures; `lit == 0` with tag `BT` is a restart.
    pub fn from_parts(tag: Tag, lit: i32, level: u32) -> Option<TrailEvent> {
        match (tag, Lit::new(lit)) {
            (Tag::BT, None) if level == 0 => Some(TrailEvent::Restart),
            (Tag::D, Some(lit)) => Some(TrailEvent::Decision { lit, level }),
            (Tag::A, Some(lit)) => Some(TrailEvent::Implied { lit, level }),
            (Tag::BT, Some(lit)) => Some(TrailEvent::Backjump { lit, level }),
            _ => None,
        }
    }
}

impl fmt::Display for TrailEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = self.lit().map_or(0, Lit::value);
        write!(f, "{} {} {}", self.tag(), lit, self.level())
    }
}

/// The chronological event log of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trail {
    pub num_vars: u32,
    pub events: Vec<TrailEvent>,
}

impl Trail {
    pub fn new(num_vars: u32) -> Trail {
        Trail { num_vars, events: Vec::new() }
    }

    pub fn from_events(num_vars: u32, events: Vec<TrailEvent>) -> Trail {
        Trail { num_vars, events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, tag: Tag) -> usize {
        self.events.iter().filter(|e| e.tag() == tag).count()
    }

    pub fn to_text(&self) -> String {
        write_event_lines(self.num_vars, self.events.iter().copied())
    }

    pub fn parse(text: &str) -> Result<Trail> {
        let (num_vars, events) = parse_event_lines(text)?;
        Ok(Trail { num_vars, events })
    }
}

pub(crate) fn write_event_lines(num_vars: u32, events: impl Iterator<Item = TrailEvent>) -> String {
    let mut out = format!("trail v1 n={num_vars}\n");
    for e in events {
        writeln!(out, "{e}").unwrap();
    }
    out
}

pub(crate) fn parse_event_lines(text: &str) -> Result<(u32, Vec<TrailEvent>)> {
    let bad = |line: usize, message: String| Error::TraceFormat { line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
    let num_vars = header
        .trim()
        .strip_prefix("trail v1 n=")
        .and_then(|n| n.parse::<u32>().ok())
        .ok_or_else(|| bad(1, format!("bad header `{header}`")))?;

    let mut events = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [tag, lit, level] = fields[..] else {
            return Err(bad(line_no, format!("expected 3 fields, got `{line}`")));
        };
        let tag: Tag = tag.parse().map_err(|e| bad(line_no, e))?;
        let lit: i32 = lit.parse().map_err(|_| bad(line_no, format!("bad literal `{lit}`")))?;
        let level: u32 =
            level.parse().map_err(|_| bad(line_no, format!("bad level `{level}`")))?;
        if lit.unsigned_abs() > num_vars {
            return Err(bad(line_no, format!("literal {lit} exceeds n={num_vars}")));
        }
        let event = TrailEvent::from_parts(tag, lit, level)
            .ok_or_else(|| bad(line_no, format!("invalid event `{line}`")))?;
        events.push(event);
    }
    Ok((num_vars, events))
}
