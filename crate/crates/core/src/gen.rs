//! Planted random 3-SAT instances and variable relabeling.
//!
//! All randomness comes from `rand_chacha::ChaCha8Rng::seed_from_u64`, with
//! uniform draws through `rand 0.8`'s `gen_range`/`gen_bool`/`shuffle`.
//! Draw order for [`generate_planted`] is: the planted value of variables
//! `1..=n` (one `gen_bool(0.5)` each), the ratio, then clauses (three
//! distinct variables by rejection, then three signs).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Clause, Formula, Lit};
use crate::keytrace::{KeyEvent, KeyTrace};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub num_vars: u32,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(num_vars: u32, seed: u64) -> GenSpec {
        GenSpec { num_vars, ratio_min: 4.1, ratio_max: 4.4, seed }
    }

    pub fn with_ratio(mut self, min: f64, max: f64) -> GenSpec {
        self.ratio_min = min;
        self.ratio_max = max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_vars < 3 {
            return Err(Error::Config(format!("num_vars {} < 3", self.num_vars)));
        }
        if !(self.ratio_min > 0.0 && self.ratio_min <= self.ratio_max && self.ratio_max.is_finite())
        {
            return Err(Error::Config(format!(
                "ratio range [{}, {}] is invalid",
                self.ratio_min, self.ratio_max
            )));
        }
        Ok(())
    }
}

/// Draws a planted 3-SAT formula together with its hidden satisfying assignment.
pub fn generate_planted(spec: &GenSpec) -> Result<(Formula, Assignment)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.num_vars;
    let planted: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let ratio = if spec.ratio_min == spec.ratio_max {
        spec.ratio_min
    } else {
        rng.gen_range(spec.ratio_min..=spec.ratio_max)
    };
    let m = (ratio * n as f64).round() as usize;

    let mut clauses = Vec::with_capacity(m);
    while clauses.len() < m {
        let mut vars = [0u32; 3];
        let mut k = 0;
        while k < 3 {
            let v = rng.gen_range(1..=n);
            if !vars[..k].contains(&v) {
                vars[k] = v;
                k += 1;
            }
        }
        let lits = vars.map(|v| Lit::from_var(v, rng.gen_bool(0.5)));
        if lits.iter().any(|l| planted[l.index()] == l.is_positive()) {
            clauses.push(Clause::new(lits));
        }
    }
    let formula = Formula::new(n, clauses).expect("variables drawn in range");
    Ok((formula, Assignment::from_bools(&planted)))
}

/// Variable-count range of a dataset bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub name: &'static str,
    pub n_min: u32,
    pub n_max: u32,
}

pub const BUCKETS: [Bucket; 6] = [
    Bucket { name: "5-15", n_min: 5, n_max: 15 },
    Bucket { name: "16-30", n_min: 16, n_max: 30 },
    Bucket { name: "31-60", n_min: 31, n_max: 60 },
    Bucket { name: "61-100", n_min: 61, n_max: 100 },
    Bucket { name: "50", n_min: 50, n_max: 50 },
    Bucket { name: "100", n_min: 100, n_max: 100 },
];

impl Bucket {
    pub fn by_name(name: &str) -> Option<Bucket> {
        BUCKETS.iter().copied().find(|b| b.name == name)
    }

    /// The first range bucket containing `n` (fixed-size presets are not matched).
    pub fn for_num_vars(n: u32) -> Option<Bucket> {
        BUCKETS[..4].iter().copied().find(|b| (b.n_min..=b.n_max).contains(&n))
    }
}

/// One generated dataset member.
#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub index: usize,
    pub spec: GenSpec,
    pub formula: Formula,
    pub planted: Assignment,
}

/// Generates `count` instances with `n` uniform in `[n_min, n_max]`.
///
/// Instance `i` uses seed `base_seed + i` (wrapping). Its variable count is
/// drawn from stream 1 of that seed so the formula draws (stream 0) are the
/// same as a direct [`generate_planted`] call with the same spec.
pub fn generate_dataset(
    n_min: u32,
    n_max: u32,
    count: usize,
    ratio_min: f64,
    ratio_max: f64,
    base_seed: u64,
) -> Result<Vec<PlantedInstance>> {
    if n_min > n_max {
        return Err(Error::Config(format!("n range [{n_min}, {n_max}] is empty")));
    }
    (0..count)
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let mut size_rng = ChaCha8Rng::seed_from_u64(seed);
            size_rng.set_stream(1);
            let n = size_rng.gen_range(n_min..=n_max);
            let spec = GenSpec { num_vars: n, ratio_min, ratio_max, seed };
            let (formula, planted) = generate_planted(&spec)?;
            Ok(PlantedInstance { index: i, spec, formula, planted })
        })
        .collect()
}

/// A bijection on variables `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariablePermutation {
    // image[v - 1] = π(v)
    image: Vec<u32>,
}

impl VariablePermutation {
    pub fn identity(n: u32) -> VariablePermutation {
        VariablePermutation { image: (1..=n).collect() }
    }

    pub fn random<R: Rng + ?Sized>(n: u32, rng: &mut R) -> VariablePermutation {
        let mut image: Vec<u32> = (1..=n).collect();
        image.shuffle(rng);
        VariablePermutation { image }
    }

    /// `image[i]` is where variable `i + 1` goes. Fails unless it is a bijection on `1..=len`.
    pub fn from_image(image: Vec<u32>) -> Result<VariablePermutation> {
        let n = image.len() as u32;
        let mut seen = vec![false; image.len()];
        for &v in &image {
            if v == 0 || v > n || std::mem::replace(&mut seen[v as usize - 1], true) {
                return Err(Error::Config(format!("{image:?} is not a permutation of 1..={n}")));
            }
        }
        Ok(VariablePermutation { image })
    }

    /// Transposition of `a` and `b` on `1..=n`.
    pub fn swap(n: u32, a: u32, b: u32) -> VariablePermutation {
        let mut p = VariablePermutation::identity(n);
        p.image.swap(a as usize - 1, b as usize - 1);
        p
    }

    pub fn len(&self) -> u32 {
        self.image.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn apply_var(&self, var: u32) -> u32 {
        self.image[var as usize - 1]
    }

    pub fn apply(&self, lit: Lit) -> Lit {
        Lit::from_var(self.apply_var(lit.var()), lit.is_positive())
    }

    pub fn inverse(&self) -> VariablePermutation {
        let mut inv = vec![0; self.image.len()];
        for (i, &v) in self.image.iter().enumerate() {
            inv[v as usize - 1] = i as u32 + 1;
        }
        VariablePermutation { image: inv }
    }
}

/// Relabels every literal `±j` to `±π(j)`.
pub fn permute(formula: &Formula, perm: &VariablePermutation) -> Result<Formula> {
    if perm.len() != formula.num_vars() {
        return Err(Error::PermutationDomain { perm: perm.len(), needed: formula.num_vars() });
    }
    let clauses = formula
        .clauses()
        .iter()
        .map(|c| Clause::new(c.iter().map(|&l| perm.apply(l))))
        .collect();
    Ok(Formula::new(formula.num_vars(), clauses).expect("permutation stays in range"))
}

/// Relabels event literals, keeping tags and levels.
pub fn permute_trace(trace: &KeyTrace, perm: &VariablePermutation) -> Result<KeyTrace> {
    let needed = trace.max_var();
    if needed > perm.len() {
        return Err(Error::PermutationDomain { perm: perm.len(), needed });
    }
    Ok(trace
        .events()
        .iter()
        .map(|e| KeyEvent { lit: perm.apply(e.lit), ..*e })
        .collect())
}
