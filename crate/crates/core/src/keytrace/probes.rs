use std::sync::Arc;

use super::{extract_keytrace, KeyTrace};
use crate::cdcl::Trail;
use crate::cnf::{Formula, Lit};

/// One supervision triple: the expert chose `target` after `prefix`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeSample {
    pub formula: Arc<Formula>,
    pub prefix: KeyTrace,
    pub target: Lit,
}

/// One probe per decision of the final KeyTrace of `trail`.
pub fn harvest_probes(formula: &Formula, trail: &Trail) -> Vec<ProbeSample> {
    let formula = Arc::new(formula.clone());
    let k = extract_keytrace(trail);
    let mut probes = Vec::with_capacity(k.decision_count());
    for (pos, e) in k.events().iter().enumerate() {
        if e.is_decision() {
            probes.push(ProbeSample {
                formula: Arc::clone(&formula),
                prefix: KeyTrace::from_events(k.events()[..pos].to_vec()),
                target: e.lit,
            });
        }
    }
    probes
}
