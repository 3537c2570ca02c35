//! KeyTraces: solver trails with every backtracked detour removed.
//!
//! A left-to-right scan keeps a working sequence `K`:
//!
//! * `D` and `A` events are appended as they are;
//! * a backjump `(BT, λ, h)` first drops the maximal suffix of `K` whose
//!   levels exceed `h`, then appends `(D, λ, h)`;
//! * a restart drops every event above level 0.
//!
//! What survives is the root-to-current path of the run: its decisions, the
//! literals they implied, and the asserting literals of backjumps (stored as
//! decisions).

mod probes;
mod replay;
mod tokens;

pub use probes::{harvest_probes, ProbeSample};
pub use replay::{replay, replay_with, SequentialReplay};
pub use tokens::{cnf_tokens, deserialize, serialize, serialize_with_cnf, Token, TokenStream};

use crate::cdcl::trail::{parse_event_lines, write_event_lines, Trail, TrailEvent};
use crate::cnf::Lit;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KeyKind {
    Decision,
    Assign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KeyEvent {
    pub kind: KeyKind,
    pub lit: Lit,
    pub level: u32,
}

impl KeyEvent {
    pub fn decision(lit: Lit, level: u32) -> KeyEvent {
        KeyEvent { kind: KeyKind::Decision, lit, level }
    }

    pub fn assign(lit: Lit, level: u32) -> KeyEvent {
        KeyEvent { kind: KeyKind::Assign, lit, level }
    }

    pub fn is_decision(&self) -> bool {
        self.kind == KeyKind::Decision
    }

    fn to_trail_event(self) -> TrailEvent {
        match self.kind {
            KeyKind::Decision => TrailEvent::Decision { lit: self.lit, level: self.level },
            KeyKind::Assign => TrailEvent::Implied { lit: self.lit, level: self.level },
        }
    }
}

/// A decision literal together with the literals implied right after it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub decision: Lit,
    pub implied: Vec<Lit>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct KeyTrace {
    events: Vec<KeyEvent>,
}

impl KeyTrace {
    pub fn new() -> KeyTrace {
        KeyTrace::default()
    }

    pub fn from_events(events: Vec<KeyEvent>) -> KeyTrace {
        KeyTrace { events }
    }

    pub fn events(&self) -> &[KeyEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn decisions(&self) -> impl Iterator<Item = Lit> + '_ {
        self.events.iter().filter(|e| e.is_decision()).map(|e| e.lit)
    }

    pub fn decision_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_decision()).count()
    }

    pub fn max_var(&self) -> u32 {
        self.events.iter().map(|e| e.lit.var()).max().unwrap_or(0)
    }

    pub fn push(&mut self, event: KeyEvent) {
        self.events.push(event);
    }

    /// Removes the maximal suffix of events whose level exceeds `level`.
    pub fn trim(&mut self, level: u32) {
        while self.events.last().is_some_and(|e| e.level > level) {
            self.events.pop();
        }
    }

    /// Applies one trail event to the working sequence.
    pub fn apply(&mut self, event: &TrailEvent) {
        match *event {
            TrailEvent::Decision { lit, level } => self.push(KeyEvent::decision(lit, level)),
            TrailEvent::Implied { lit, level } => self.push(KeyEvent::assign(lit, level)),
            TrailEvent::Backjump { lit, level } => {
                self.trim(level);
                self.push(KeyEvent::decision(lit, level));
            }
            TrailEvent::Restart => self.trim(0),
        }
    }

    /// Implied literals before the first decision (level-0 facts from unit clauses).
    pub fn leading_assigns(&self) -> impl Iterator<Item = Lit> + '_ {
        self.events.iter().take_while(|e| !e.is_decision()).map(|e| e.lit)
    }

    /// Decision blocks, ignoring leading implied literals.
    pub fn blocks(&self) -> Vec<Block> {
        let mut blocks: Vec<Block> = Vec::new();
        for e in &self.events {
            if e.is_decision() {
                blocks.push(Block { decision: e.lit, implied: Vec::new() });
            } else if let Some(last) = blocks.last_mut() {
                last.implied.push(e.lit);
            }
        }
        blocks
    }

    /// The events strictly before the `j`-th (0-based) decision.
    pub fn prefix_before_decision(&self, j: usize) -> Option<KeyTrace> {
        let pos = self
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_decision())
            .nth(j)?
            .0;
        Some(KeyTrace { events: self.events[..pos].to_vec() })
    }

    pub fn to_text(&self, num_vars: u32) -> String {
        write_event_lines(num_vars, self.events.iter().map(|e| e.to_trail_event()))
    }

    /// Reads the trail line format restricted to `D` and `A` tags.
    pub fn parse(text: &str) -> Result<(u32, KeyTrace)> {
        let (num_vars, events) = parse_event_lines(text)?;
        let events = events
            .into_iter()
            .enumerate()
            .map(|(i, e)| match e {
                TrailEvent::Decision { lit, level } => Ok(KeyEvent::decision(lit, level)),
                TrailEvent::Implied { lit, level } => Ok(KeyEvent::assign(lit, level)),
                other => Err(Error::TraceFormat {
                    line: i + 2,
                    message: format!("tag {} is not allowed in a KeyTrace", other.tag()),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((num_vars, KeyTrace { events }))
    }
}

impl FromIterator<KeyEvent> for KeyTrace {
    fn from_iter<I: IntoIterator<Item = KeyEvent>>(iter: I) -> Self {
        KeyTrace { events: iter.into_iter().collect() }
    }
}

/// Collapses a trail into its KeyTrace.
pub fn extract_keytrace(trail: &Trail) -> KeyTrace {
    let mut k = KeyTrace::new();
    for e in &trail.events {
        k.apply(e);
    }
    k
}
