use super::{Assignment, Formula};

pub const MAX_BRUTE_FORCE_VARS: u32 = 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BruteVerdict {
    Sat(Assignment),
    Unsat,
}

impl BruteVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, BruteVerdict::Sat(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("brute force refuses {0} variables (limit {MAX_BRUTE_FORCE_VARS})")]
pub struct BruteForceError(pub u32);

/// Exhaustive search. Assignments are enumerated as binary counters with
/// variable 1 as the least significant bit (`false` = 0), and the first
/// satisfying one is returned.
pub fn brute_force_solve(formula: &Formula) -> Result<BruteVerdict, BruteForceError> {
    let n = formula.num_vars();
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(BruteForceError(n));
    }
    // Per clause: bitmask of variables whose positive / negative literal occurs.
    let masks: Vec<(u32, u32)> = formula
        .clauses()
        .iter()
        .map(|c| {
            c.iter().fold((0u32, 0u32), |(pos, neg), l| {
                let bit = 1u32 << l.index();
                if l.is_positive() {
                    (pos | bit, neg)
                } else {
                    (pos, neg | bit)
                }
            })
        })
        .collect();
    let full: u32 = if n == 0 { 0 } else { u32::MAX >> (32 - n) };
    let mut bits: u32 = 0;
    loop {
        if masks.iter().all(|&(pos, neg)| (bits & pos) != 0 || (!bits & neg) != 0) {
            let values: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            return Ok(BruteVerdict::Sat(Assignment::from_bools(&values)));
        }
        if bits == full {
            return Ok(BruteVerdict::Unsat);
        }
        bits += 1;
    }
}
