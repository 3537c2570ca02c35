//! CNF data model: literals, clauses, formulas and partial assignments.

mod brute;
mod dimacs;

pub use brute::{brute_force_solve, BruteForceError, BruteVerdict, MAX_BRUTE_FORCE_VARS};
pub use dimacs::{parse_dimacs, read_dimacs_file, write_dimacs, ParseError, ParseErrorKind};

use std::fmt;
use std::ops::Not;

use serde::{Deserialize, Serialize};

/// A signed variable: `+j` means `x_j = true`, `-j` means `x_j = false`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Lit(i32);

impl Lit {
    /// Returns `None` for zero, which is not a literal.
    pub fn new(value: i32) -> Option<Lit> {
        if value == 0 || value == i32::MIN {
            None
        } else {
            Some(Lit(value))
        }
    }

    /// Literal of 1-based variable `var` with the given polarity.
    pub fn from_var(var: u32, positive: bool) -> Lit {
        debug_assert!(var >= 1 && var <= i32::MAX as u32);
        let v = var as i32;
        Lit(if positive { v } else { -v })
    }

    /// Builds a literal from its dense code (see [`Lit::code`]).
    pub fn from_code(code: usize) -> Lit {
        Lit::from_var((code >> 1) as u32 + 1, code & 1 == 0)
    }

    #[inline]
    pub fn value(self) -> i32 {
        self.0
    }

    /// 1-based variable number.
    #[inline]
    pub fn var(self) -> u32 {
        self.0.unsigned_abs()
    }

    /// 0-based variable index.
    #[inline]
    pub fn index(self) -> usize {
        self.var() as usize - 1
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Dense code: `2 * index` for the positive literal, `2 * index + 1` for the negative one.
    #[inline]
    pub fn code(self) -> usize {
        (self.index() << 1) | (self.0 < 0) as usize
    }
}

impl Not for Lit {
    type Output = Lit;

    #[inline]
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<i32> for Lit {
    type Error = String;

    fn try_from(value: i32) -> Result<Self, Self::Error> {
        Lit::new(value).ok_or_else(|| format!("{value} is not a literal"))
    }
}

impl From<Lit> for i32 {
    fn from(lit: Lit) -> i32 {
        lit.0
    }
}

/// A disjunction of literals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Clause {
    lits: Vec<Lit>,
}

impl Clause {
    /// Builds a clause, dropping repeated literals (first occurrence wins).
    pub fn new(lits: impl IntoIterator<Item = Lit>) -> Clause {
        let mut out: Vec<Lit> = Vec::new();
        for lit in lits {
            if !out.contains(&lit) {
                out.push(lit);
            }
        }
        Clause { lits: out }
    }

    /// Builds a clause from DIMACS integers. Panics on zero.
    pub fn from_ints(ints: &[i32]) -> Clause {
        Clause::new(ints.iter().map(|&v| Lit::new(v).expect("zero is not a literal")))
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    /// True when the clause contains both `l` and `!l` for some literal.
    pub fn is_tautology(&self) -> bool {
        self.lits.iter().any(|&l| self.lits.contains(&!l))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Lit> {
        self.lits.iter()
    }

    pub fn max_var(&self) -> u32 {
        self.lits.iter().map(|l| l.var()).max().unwrap_or(0)
    }
}

impl<'a> IntoIterator for &'a Clause {
    type Item = &'a Lit;
    type IntoIter = std::slice::Iter<'a, Lit>;

    fn into_iter(self) -> Self::IntoIter {
        self.lits.iter()
    }
}

/// A conjunction of clauses over variables `1..=num_vars`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Formula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("literal {lit} exceeds the variable count {num_vars}")]
pub struct VariableRangeError {
    pub lit: i32,
    pub num_vars: u32,
}

impl Formula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Formula, VariableRangeError> {
        for clause in &clauses {
            if let Some(&lit) = clause.iter().find(|l| l.var() > num_vars) {
                return Err(VariableRangeError { lit: lit.value(), num_vars });
            }
        }
        Ok(Formula { num_vars, clauses })
    }

    /// Convenience constructor from nested integer slices. Panics on malformed input.
    pub fn from_ints(num_vars: u32, clauses: &[&[i32]]) -> Formula {
        Formula::new(num_vars, clauses.iter().map(|c| Clause::from_ints(c)).collect())
            .expect("literal out of range")
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }

    /// Drops tautological clauses. Duplicate clauses are kept.
    pub fn simplify(&self) -> Formula {
        Formula {
            num_vars: self.num_vars,
            clauses: self.clauses.iter().filter(|c| !c.is_tautology()).cloned().collect(),
        }
    }

    pub fn evaluate(&self, assignment: &Assignment) -> Evaluation {
        evaluate(self, assignment)
    }
}

/// Truth values for variables `1..=n`; `None` means unassigned.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn unassigned(num_vars: u32) -> Assignment {
        Assignment { values: vec![None; num_vars as usize] }
    }

    pub fn from_values(values: Vec<Option<bool>>) -> Assignment {
        Assignment { values }
    }

    /// Total assignment from booleans, index 0 is variable 1.
    pub fn from_bools(bools: &[bool]) -> Assignment {
        Assignment { values: bools.iter().map(|&b| Some(b)).collect() }
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    /// Value of 1-based variable `var`.
    pub fn get(&self, var: u32) -> Option<bool> {
        self.values.get(var as usize - 1).copied().flatten()
    }

    pub fn set(&mut self, var: u32, value: Option<bool>) {
        self.values[var as usize - 1] = value;
    }

    pub fn assign(&mut self, lit: Lit) {
        self.set(lit.var(), Some(lit.is_positive()));
    }

    /// Truth value of a literal, `None` if its variable is unassigned.
    pub fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.get(lit.var()).map(|v| v == lit.is_positive())
    }

    pub fn values(&self) -> &[Option<bool>] {
        &self.values
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Assigned literals in variable order.
    pub fn lits(&self) -> impl Iterator<Item = Lit> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| Lit::from_var(i as u32 + 1, b)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    Satisfied,
    Falsified,
    Undetermined,
}

/// Three-valued evaluation of `formula` under a partial assignment.
pub fn evaluate(formula: &Formula, assignment: &Assignment) -> Evaluation {
    let mut all_satisfied = true;
    for clause in formula.clauses() {
        let mut satisfied = false;
        let mut open = false;
        for &lit in clause {
            match assignment.lit_value(lit) {
                Some(true) => {
                    satisfied = true;
                    break;
                }
                Some(false) => {}
                None => open = true,
            }
        }
        if !satisfied {
            if !open {
                return Evaluation::Falsified;
            }
            all_satisfied = false;
        }
    }
    if all_satisfied {
        Evaluation::Satisfied
    } else {
        Evaluation::Undetermined
    }
}
