use super::KeyTrace;
use crate::cdcl::{solve_with, SolveResult, SolverConfig};
use crate::cnf::{Formula, Lit};
use crate::policy::{BranchingPolicy, Budget};
use crate::scalar::Activity;

/// Proposes the KeyTrace decisions in order, one per branching point.
///
/// Every query consumes a position, even if the solver rejects the
/// proposal as illegal; once the sequence is exhausted the policy abstains.
#[derive(Clone, Debug)]
pub struct SequentialReplay {
    decisions: Vec<Lit>,
    next: usize,
}

impl SequentialReplay {
    pub fn new(trace: &KeyTrace) -> SequentialReplay {
        SequentialReplay { decisions: trace.decisions().collect(), next: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.next
    }
}

impl BranchingPolicy for SequentialReplay {
    fn name(&self) -> &str {
        "replay"
    }

    fn query(&mut self, _: &Formula, _: &KeyTrace) -> Option<Lit> {
        let lit = self.decisions.get(self.next).copied();
        self.next += 1;
        lit
    }
}

/// Re-solves `formula` following the decisions of `trace`, with learning and
/// backjumping still active and VSIDS taking over when the trace runs out.
pub fn replay(formula: &Formula, trace: &KeyTrace, config: &SolverConfig) -> SolveResult {
    replay_with::<f64>(formula, trace, config)
}

pub fn replay_with<A: Activity>(
    formula: &Formula,
    trace: &KeyTrace,
    config: &SolverConfig,
) -> SolveResult {
    let mut policy = SequentialReplay::new(trace);
    let budget = Budget::new(trace.decision_count() as u64, crate::policy::Schedule::FrontLoaded);
    solve_with::<A>(formula, config, &mut policy, budget)
}
