use super::BranchingPolicy;
use crate::cnf::{Formula, Lit};
use crate::keytrace::KeyTrace;

/// Oracle policy backed by a KeyTrace from an earlier run on the same formula.
///
/// Stateless: the answer depends only on the queried prefix. It is the
/// expert decision that follows the longest common prefix between the
/// queried decisions and the expert's, or `None` once the expert sequence is
/// exhausted.
#[derive(Clone, Debug)]
pub struct ExpertPolicy {
    decisions: Vec<Lit>,
}

impl ExpertPolicy {
    pub fn new(trace: &KeyTrace) -> ExpertPolicy {
        ExpertPolicy { decisions: trace.decisions().collect() }
    }

    pub fn decisions(&self) -> &[Lit] {
        &self.decisions
    }

    pub fn propose(&self, prefix: &KeyTrace) -> Option<Lit> {
        let matched =
            prefix.decisions().zip(&self.decisions).take_while(|(a, b)| a == *b).count();
        self.decisions.get(matched).copied()
    }
}

pub fn expert_policy(trace: &KeyTrace) -> ExpertPolicy {
    ExpertPolicy::new(trace)
}

impl BranchingPolicy for ExpertPolicy {
    fn name(&self) -> &str {
        "expert"
    }

    fn query(&mut self, _: &Formula, prefix: &KeyTrace) -> Option<Lit> {
        self.propose(prefix)
    }
}
