//! Branching policies and their budgeted integration into the solver.
//!
//! At each decision point the solver asks [`budgeted_decide`] for a literal.
//! If the budget still has queries left and the schedule admits this
//! decision index, one query is consumed and the policy sees the formula and
//! the current KeyTrace. A proposal is accepted only if its variable is in
//! range and unassigned; anything else (including no proposal) falls back to
//! VSIDS. The query is spent either way.

mod bc;
mod expert;
mod external;

pub use bc::{bc_policy, train_bc, BcConfig, BcModel, BcPolicy, TrainReport};
pub use expert::{expert_policy, ExpertPolicy};
pub use external::{
    extern_policy, serve, ExternPolicy, DEFAULT_TIMEOUT, HANDSHAKE_REQUEST, HANDSHAKE_RESPONSE,
};

use serde::{Deserialize, Serialize};

use crate::cdcl::Solver;
use crate::cnf::{Formula, Lit};
use crate::keytrace::KeyTrace;
use crate::scalar::Activity;

/// Something that can propose the next decision literal.
pub trait BranchingPolicy {
    fn name(&self) -> &str;

    /// Proposes a decision given the formula and the current KeyTrace.
    /// `None` means "no opinion"; the solver then uses VSIDS.
    fn query(&mut self, formula: &Formula, prefix: &KeyTrace) -> Option<Lit>;

    /// Number of transport failures so far (only external policies have any).
    fn failures(&self) -> u64 {
        0
    }
}

/// Always abstains, so every decision is VSIDS.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoPolicy;

impl BranchingPolicy for NoPolicy {
    fn name(&self) -> &str {
        "vsids"
    }

    fn query(&mut self, _: &Formula, _: &KeyTrace) -> Option<Lit> {
        None
    }
}

/// Returns a fixed list of answers, one per query, then abstains.
#[derive(Clone, Debug, Default)]
pub struct ScriptedPolicy {
    answers: Vec<Option<Lit>>,
    next: usize,
    /// Decision counts of the KeyTraces seen at each query.
    pub seen_prefix_decisions: Vec<usize>,
}

impl ScriptedPolicy {
    pub fn new(answers: Vec<Option<Lit>>) -> ScriptedPolicy {
        ScriptedPolicy { answers, next: 0, seen_prefix_decisions: Vec::new() }
    }
}

impl BranchingPolicy for ScriptedPolicy {
    fn name(&self) -> &str {
        "scripted"
    }

    fn query(&mut self, _: &Formula, prefix: &KeyTrace) -> Option<Lit> {
        self.seen_prefix_decisions.push(prefix.decision_count());
        let answer = self.answers.get(self.next).copied().flatten();
        self.next += 1;
        answer
    }
}

/// Which decision indices (1-based, counted over the whole run) may query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schedule {
    /// Query from the first decision on.
    FrontLoaded,
    /// Let VSIDS make the first `k` decisions, then query.
    AfterK(u64),
}

impl Schedule {
    pub fn admits(&self, decision_index: u64) -> bool {
        match *self {
            Schedule::FrontLoaded => true,
            Schedule::AfterK(k) => decision_index > k,
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = String;

    /// `front` or `after:K`.
    fn from_str(s: &str) -> Result<Schedule, String> {
        if s == "front" {
            return Ok(Schedule::FrontLoaded);
        }
        s.strip_prefix("after:")
            .and_then(|k| k.parse().ok())
            .map(Schedule::AfterK)
            .ok_or_else(|| format!("schedule must be `front` or `after:K`, got `{s}`"))
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Schedule::FrontLoaded => f.write_str("front"),
            Schedule::AfterK(k) => write!(f, "after:{k}"),
        }
    }
}

/// Query budget `B` with `remaining` queries left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    total: u64,
    remaining: u64,
    schedule: Schedule,
}

impl Budget {
    pub fn new(total: u64, schedule: Schedule) -> Budget {
        Budget { total, remaining: total, schedule }
    }

    pub fn none() -> Budget {
        Budget::new(0, Schedule::FrontLoaded)
    }

    pub fn unlimited() -> Budget {
        Budget::new(u64::MAX, Schedule::FrontLoaded)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub fn used(&self) -> u64 {
        self.total - self.remaining
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn admits(&self, decision_index: u64) -> bool {
        self.remaining > 0 && self.schedule.admits(decision_index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Choice {
    pub lit: Lit,
    /// True if the literal came from the policy.
    pub accepted: bool,
}

/// One budgeted branching step. Requires an unassigned variable.
pub fn budgeted_decide<A: Activity>(
    solver: &mut Solver<A>,
    formula: &Formula,
    policy: &mut dyn BranchingPolicy,
    budget: &mut Budget,
    queries: &mut u64,
) -> Choice {
    let index = solver.counts.decisions + 1;
    if budget.admits(index) {
        budget.remaining -= 1;
        *queries += 1;
        let prefix = solver.keytrace().expect("KeyTrace tracking is on whenever the budget is");
        if let Some(lit) = policy.query(formula, prefix) {
            if solver.is_legal(lit) {
                return Choice { lit, accepted: true };
            }
        }
    }
    let lit = solver.vsids_pick().expect("budgeted_decide needs an unassigned variable");
    Choice { lit, accepted: false }
}
