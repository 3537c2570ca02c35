//! Behavior cloning with a bounded-context count model.
//!
//! The model conditions on two token windows of the serialized input
//! `z(F, K)`: a digest made of the first `digest` tokens after `[CNF]`, and
//! the last `order` tokens of the stream. For every context it keeps counts
//! of the next token, and turns them into probabilities with add-α smoothing
//! over the vocabulary:
//!
//! ```text
//! p(t | c) = (count(c, t) + α) / (count(c) + α·|V|)
//! ```
//!
//! Training minimizes the average negative log-likelihood of the expert
//! decisions, which for a count model is just counting.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BranchingPolicy;
use crate::cnf::{Formula, Lit};
use crate::gen::{permute, permute_trace, Bucket, VariablePermutation};
use crate::keytrace::{cnf_tokens, KeyTrace, ProbeSample, Token, TokenStream};
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "bcmodel v1";

#[derive(Clone, Debug, PartialEq)]
pub struct BcConfig {
    /// Tail window length in tokens.
    pub order: usize,
    /// Number of CNF tokens kept as instance digest.
    pub digest: usize,
    pub alpha: f64,
    /// Copies of each probe; copy 0 is unpermuted, the rest use random
    /// variable relabelings. 0 behaves like 1.
    pub permutations_per_sample: usize,
    /// Bucket names processed first, in this order.
    pub curriculum: Vec<String>,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            order: 24,
            digest: 16,
            alpha: 0.1,
            permutations_per_sample: 1,
            curriculum: Vec::new(),
            seed: 0,
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.order == 0 {
            return Err(Error::Config("order must be at least 1".into()));
        }
        if let Some(b) = self.curriculum.iter().find(|b| Bucket::by_name(b).is_none()) {
            return Err(Error::Config(format!("unknown bucket `{b}`")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Context {
    digest: Vec<Token>,
    tail: Vec<Token>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcModel {
    order: usize,
    digest: usize,
    alpha: f64,
    max_var: u32,
    tables: BTreeMap<Context, BTreeMap<Token, u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainReport {
    pub samples: usize,
    /// Mean of `-ln p(target | context)` over the original probes.
    pub nll: f64,
    /// Top-1 masked accuracy over the original probes.
    pub accuracy: f64,
}

impl BcModel {
    fn empty(cfg: &BcConfig) -> BcModel {
        BcModel {
            order: cfg.order,
            digest: cfg.digest,
            alpha: cfg.alpha,
            max_var: 0,
            tables: BTreeMap::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn max_var(&self) -> u32 {
        self.max_var
    }

    /// `[CNF]`, `[SEP]`, `[D]`, `0` and `±1..=±max_var`.
    pub fn vocab(&self) -> Vec<Token> {
        let mut v = vec![Token::Cnf, Token::Sep, Token::D, Token::ClauseEnd];
        for var in 1..=self.max_var {
            v.push(Token::Lit(Lit::from_var(var, true)));
            v.push(Token::Lit(Lit::from_var(var, false)));
        }
        v
    }

    pub fn vocab_size(&self) -> usize {
        4 + 2 * self.max_var as usize
    }

    pub fn num_contexts(&self) -> usize {
        self.tables.len()
    }

    /// Sum of all counts.
    pub fn total_count(&self) -> u64 {
        self.tables.values().flat_map(|t| t.values()).sum()
    }

    fn context(&self, cnf: &[Token], prefix: &KeyTrace) -> Context {
        context_of(self.digest, self.order, cnf, prefix)
    }

    fn count(&self, ctx: &Context, token: Token) -> u64 {
        self.tables.get(ctx).and_then(|t| t.get(&token)).copied().unwrap_or(0)
    }

    fn context_total(&self, ctx: &Context) -> u64 {
        self.tables.get(ctx).map_or(0, |t| t.values().sum())
    }

    /// Smoothed probability of `token` following `ctx`.
    fn prob(&self, ctx: &Context, token: Token) -> f64 {
        let v = self.vocab_size() as f64;
        (self.count(ctx, token) as f64 + self.alpha)
            / (self.context_total(ctx) as f64 + self.alpha * v)
    }

    /// Probability of `target` as the next decision after `prefix`.
    pub fn probability(&self, formula: &Formula, prefix: &KeyTrace, target: Lit) -> f64 {
        let ctx = self.context(&cnf_tokens(formula), prefix);
        self.prob(&ctx, Token::Lit(target))
    }

    /// Masked argmax over literal tokens of variables `1..=num_vars` not yet
    /// assigned in `prefix`. Ties go to the lowest variable, positive first.
    /// Returns `None` when no legal literal has been seen in this context,
    /// i.e. the best score is the smoothing floor.
    fn predict(&self, num_vars: u32, cnf: &[Token], prefix: &KeyTrace) -> Option<Lit> {
        let ctx = self.context(cnf, prefix);
        let table = self.tables.get(&ctx)?;
        let mut assigned = vec![false; num_vars as usize + 1];
        for e in prefix.events() {
            if let Some(slot) = assigned.get_mut(e.lit.var() as usize) {
                *slot = true;
            }
        }
        let mut best: Option<(u64, Lit)> = None;
        for (&token, &count) in table {
            let Token::Lit(lit) = token else { continue };
            if lit.var() > num_vars || assigned[lit.var() as usize] || count == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((c, l)) => count > c || (count == c && tie_key(lit) < tie_key(l)),
            };
            if better {
                best = Some((count, lit));
            }
        }
        best.map(|(_, lit)| lit)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file())?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<BcModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BcModel::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<BcModel> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("expected `{MODEL_FORMAT}`, got `{}`", file.format)));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(file.alpha > 0.0) {
            return Err(Error::ModelFormat("alpha must be positive".into()));
        }
        let mut model = BcModel {
            order: file.order,
            digest: file.digest,
            alpha: file.alpha,
            max_var: file.max_var,
            tables: BTreeMap::new(),
        };
        let expected = model.vocab().iter().map(Token::to_string).collect::<Vec<_>>();
        if file.vocab != expected {
            return Err(Error::ModelFormat("vocabulary does not match max_var".into()));
        }
        let tokens = |s: &str| -> Result<Vec<Token>> {
            let stream = TokenStream::parse(s).map_err(|e| Error::ModelFormat(e.to_string()))?;
            Ok(stream.tokens)
        };
        for entry in file.entries {
            let ctx = Context { digest: tokens(&entry.digest)?, tail: tokens(&entry.tail)? };
            let mut table = BTreeMap::new();
            for (tok, count) in entry.counts {
                let t: Token = tok.parse().map_err(|e: Error| Error::ModelFormat(e.to_string()))?;
                table.insert(t, count);
            }
            model.tables.insert(ctx, table);
        }
        Ok(model)
    }

    fn to_file(&self) -> ModelFile {
        let join = |ts: &[Token]| TokenStream { tokens: ts.to_vec() }.to_text();
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            order: self.order,
            digest: self.digest,
            alpha: self.alpha,
            max_var: self.max_var,
            vocab: self.vocab().iter().map(Token::to_string).collect(),
            entries: self
                .tables
                .iter()
                .map(|(ctx, table)| Entry {
                    digest: join(&ctx.digest),
                    tail: join(&ctx.tail),
                    counts: table.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
                })
                .collect(),
        }
    }
}

fn tie_key(lit: Lit) -> (u32, bool) {
    (lit.var(), !lit.is_positive())
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    order: usize,
    digest: usize,
    alpha: f64,
    max_var: u32,
    vocab: Vec<String>,
    entries: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    digest: String,
    tail: String,
    counts: Vec<(String, u64)>,
}

/// Context of `z(F, prefix)` without materializing the whole stream.
fn context_of(digest: usize, order: usize, cnf: &[Token], prefix: &KeyTrace) -> Context {
    let digest_tokens = cnf.iter().skip(1).take(digest).copied().collect();
    let mut tail: Vec<Token> = vec![Token::D];
    // Walk the prefix backwards; stop once the window is full or at the
    // leading implied literals, which the stream does not encode.
    let first_decision = prefix.events().iter().position(|e| e.is_decision());
    if let Some(first) = first_decision {
        for e in prefix.events()[first..].iter().rev() {
            if tail.len() >= order {
                break;
            }
            tail.push(Token::Lit(e.lit));
            if e.is_decision() && tail.len() < order {
                tail.push(Token::D);
            }
        }
    }
    if tail.len() < order {
        tail.push(Token::Sep);
    }
    for t in cnf.iter().rev() {
        if tail.len() >= order {
            break;
        }
        tail.push(*t);
    }
    tail.truncate(order);
    tail.reverse();
    Context { digest: digest_tokens, tail }
}

struct Sample {
    cnf: Vec<Token>,
    prefix: KeyTrace,
    target: Lit,
}

fn curriculum_rank(cfg: &BcConfig, num_vars: u32) -> usize {
    cfg.curriculum
        .iter()
        .position(|name| {
            Bucket::by_name(name).is_some_and(|b| (b.n_min..=b.n_max).contains(&num_vars))
        })
        .unwrap_or(cfg.curriculum.len())
}

/// Fits the count model to `probes`.
pub fn train_bc(probes: &[ProbeSample], cfg: &BcConfig) -> Result<(BcModel, TrainReport)> {
    if probes.is_empty() {
        return Err(Error::EmptyProbeSet);
    }
    cfg.validate()?;
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by_key(|&i| curriculum_rank(cfg, probes[i].formula.num_vars()));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let copies = cfg.permutations_per_sample.max(1);
    let mut model = BcModel::empty(cfg);
    let mut cnf_cache: Option<(Arc<Formula>, Vec<Token>)> = None;
    let mut samples = 0;
    for &i in &order {
        let p = &probes[i];
        let n = p.formula.num_vars();
        model.max_var = model.max_var.max(n);
        for copy in 0..copies {
            let sample = if copy == 0 {
                let cnf = match &cnf_cache {
                    Some((f, cnf)) if Arc::ptr_eq(f, &p.formula) => cnf.clone(),
                    _ => {
                        let cnf = cnf_tokens(&p.formula);
                        cnf_cache = Some((Arc::clone(&p.formula), cnf.clone()));
                        cnf
                    }
                };
                Sample { cnf, prefix: p.prefix.clone(), target: p.target }
            } else {
                let perm = VariablePermutation::random(n, &mut rng);
                Sample {
                    cnf: cnf_tokens(&permute(&p.formula, &perm)?),
                    prefix: permute_trace(&p.prefix, &perm)?,
                    target: perm.apply(p.target),
                }
            };
            let ctx = model.context(&sample.cnf, &sample.prefix);
            *model.tables.entry(ctx).or_default().entry(Token::Lit(sample.target)).or_insert(0) += 1;
            samples += 1;
        }
    }

    let mut nll = 0.0;
    let mut hits = 0usize;
    for p in probes {
        let cnf = cnf_tokens(&p.formula);
        let ctx = model.context(&cnf, &p.prefix);
        nll -= model.prob(&ctx, Token::Lit(p.target)).ln();
        if model.predict(p.formula.num_vars(), &cnf, &p.prefix) == Some(p.target) {
            hits += 1;
        }
    }
    let report = TrainReport {
        samples,
        nll: nll / probes.len() as f64,
        accuracy: hits as f64 / probes.len() as f64,
    };
    Ok((model, report))
}

/// Decodes with a trained model; abstains on unseen contexts.
#[derive(Clone, Debug)]
pub struct BcPolicy {
    model: Arc<BcModel>,
    cache: Option<(Formula, Vec<Token>)>,
}

pub fn bc_policy(model: Arc<BcModel>) -> BcPolicy {
    BcPolicy { model, cache: None }
}

impl BcPolicy {
    pub fn model(&self) -> &BcModel {
        &self.model
    }
}

impl BranchingPolicy for BcPolicy {
    fn name(&self) -> &str {
        "bc"
    }

    fn query(&mut self, formula: &Formula, prefix: &KeyTrace) -> Option<Lit> {
        if self.cache.as_ref().is_none_or(|(f, _)| f != formula) {
            self.cache = Some((formula.clone(), cnf_tokens(formula)));
        }
        let cnf = &self.cache.as_ref().expect("cache filled above").1;
        self.model.predict(formula.num_vars(), cnf, prefix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdcl::{solve, solve_with, SolverConfig};
    use crate::gen::generate_dataset;
    use crate::keytrace::tests::{golden_formula, golden_keytrace};
    use crate::keytrace::{harvest_probes, serialize, KeyEvent};
    use crate::policy::{Budget, Schedule};
    use rand::Rng;

    fn lit(v: i32) -> Lit {
        Lit::new(v).unwrap()
    }

    fn probes(count: usize, seed: u64) -> Vec<ProbeSample> {
        generate_dataset(5, 15, count, 4.1, 4.4, seed)
            .unwrap()
            .iter()
            .flat_map(|inst| {
                let r = solve(&inst.formula, &SolverConfig::default());
                harvest_probes(&inst.formula, &r.trail)
            })
            .collect()
    }

    #[test]
    fn context_matches_serialized_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in probes(30, 1) {
            let z = serialize(&p.formula, &p.prefix).unwrap().tokens;
            let cnf = cnf_tokens(&p.formula);
            let order = rng.gen_range(1..60);
            let digest = rng.gen_range(0..20);
            let ctx = context_of(digest, order, &cnf, &p.prefix);
            assert_eq!(ctx.tail, z[z.len().saturating_sub(order)..]);
            let want: Vec<Token> = z[1..].iter().take(digest).copied().collect();
            assert_eq!(ctx.digest.len(), want.len().min(cnf.len() - 1));
            assert_eq!(ctx.digest[..], want[..ctx.digest.len()]);
        }
    }

    #[test]
    fn context_skips_leading_assigns() {
        let f = Formula::from_ints(3, &[&[1]]);
        let k = KeyTrace::from_events(vec![
            KeyEvent::assign(lit(1), 0),
            KeyEvent::decision(lit(2), 1),
        ]);
        let ctx = context_of(4, 50, &cnf_tokens(&f), &k);
        assert_eq!(ctx.tail, serialize(&f, &k).unwrap().tokens);
    }

    #[test]
    fn repeated_probe_nll_follows_count_formula() {
        let f = Arc::new(golden_formula());
        let p = ProbeSample { formula: f, prefix: KeyTrace::new(), target: lit(-4) };
        let cfg = BcConfig { alpha: 0.5, ..BcConfig::default() };
        let mut last = f64::INFINITY;
        for c in 1..6u64 {
            let set = vec![p.clone(); c as usize];
            let (model, report) = train_bc(&set, &cfg).unwrap();
            let v = model.vocab_size() as f64;
            assert_eq!(v, 12.0);
            let want = -((c as f64 + 0.5) / (c as f64 + 0.5 * v)).ln();
            assert!((report.nll - want).abs() < 1e-12);
            assert!(report.nll < last);
            last = report.nll;
            let mut policy = bc_policy(Arc::new(model));
            assert_eq!(policy.query(&p.formula, &KeyTrace::new()), Some(lit(-4)));
        }
    }

    #[test]
    fn unseen_context_abstains() {
        let f = Arc::new(golden_formula());
        let p = ProbeSample { formula: f, prefix: KeyTrace::new(), target: lit(-4) };
        let (model, _) = train_bc(&[p], &BcConfig::default()).unwrap();
        let mut policy = bc_policy(Arc::new(model));
        assert_eq!(policy.query(&Formula::from_ints(4, &[&[1, 2]]), &KeyTrace::new()), None);
        assert_eq!(policy.query(&golden_formula(), &golden_keytrace()), None);
    }

    #[test]
    fn empty_probe_set_is_an_error() {
        assert!(matches!(train_bc(&[], &BcConfig::default()), Err(Error::EmptyProbeSet)));
    }

    #[test]
    fn ties_prefer_low_variable_then_positive() {
        let f = Arc::new(Formula::from_ints(3, &[&[1, 2, 3]]));
        let mk = |t| ProbeSample { formula: Arc::clone(&f), prefix: KeyTrace::new(), target: lit(t) };
        let (model, _) = train_bc(&[mk(-3), mk(-2), mk(2), mk(3)], &BcConfig::default()).unwrap();
        let mut policy = bc_policy(Arc::new(model));
        assert_eq!(policy.query(&f, &KeyTrace::new()), Some(lit(2)));
    }

    #[test]
    fn permutation_copies_scale_mass_and_keep_targets() {
        let set = probes(20, 2);
        let (m1, r1) = train_bc(&set, &BcConfig::default()).unwrap();
        let cfg4 = BcConfig { permutations_per_sample: 4, ..BcConfig::default() };
        let (m4, r4) = train_bc(&set, &cfg4).unwrap();
        assert_eq!(m4.total_count(), 4 * m1.total_count());
        assert_eq!(r4.samples, 4 * r1.samples);
        let mut policy = bc_policy(Arc::new(m4));
        for p in &set {
            if m1.predict(p.formula.num_vars(), &cnf_tokens(&p.formula), &p.prefix) == Some(p.target) {
                assert_eq!(policy.query(&p.formula, &p.prefix), Some(p.target));
            }
        }
    }

    #[test]
    fn memorizes_unique_contexts() {
        let set: Vec<ProbeSample> = probes(40, 3).into_iter().take(100).collect();
        assert_eq!(set.len(), 100);
        let cfg = BcConfig { order: 10_000, ..BcConfig::default() };
        let (_, report) = train_bc(&set, &cfg).unwrap();
        assert_eq!(report.accuracy, 1.0);
    }

    #[test]
    fn masked_argmax_never_proposes_assigned() {
        let set = probes(60, 4);
        let cfg = BcConfig { order: 3, digest: 0, ..BcConfig::default() };
        let (model, _) = train_bc(&set, &cfg).unwrap();
        let mut policy = bc_policy(Arc::new(model));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut proposals = 0;
        for _ in 0..10_000 {
            let p = &set[rng.gen_range(0..set.len())];
            let n = p.formula.num_vars();
            // Random consistent prefix: shuffled distinct variables with random signs.
            let len = rng.gen_range(0..=n as usize);
            let perm = VariablePermutation::random(n, &mut rng);
            let events = (0..len)
                .map(|i| {
                    let l = Lit::from_var(perm.apply_var(i as u32 + 1), rng.gen_bool(0.5));
                    if rng.gen_bool(0.5) { KeyEvent::decision(l, i as u32) } else { KeyEvent::assign(l, i as u32) }
                })
                .collect();
            let prefix = KeyTrace::from_events(events);
            if let Some(l) = policy.query(&p.formula, &prefix) {
                proposals += 1;
                assert!(l.var() >= 1 && l.var() <= n);
                assert!(prefix.events().iter().all(|e| e.lit.var() != l.var()));
            }
        }
        assert!(proposals > 100);
    }

    #[test]
    fn model_file_round_trip() {
        let (model, _) = train_bc(&probes(10, 6), &BcConfig::default()).unwrap();
        let text = model.to_json();
        assert!(text.contains(MODEL_FORMAT));
        assert_eq!(BcModel::from_json(&text).unwrap(), model);
        assert!(BcModel::from_json(&text.replace(MODEL_FORMAT, "bcmodel v9")).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let set = probes(15, 7);
        let cfg = BcConfig { permutations_per_sample: 3, seed: 9, ..BcConfig::default() };
        let (a, _) = train_bc(&set, &cfg).unwrap();
        let (b, _) = train_bc(&set, &cfg).unwrap();
        assert_eq!(a, b);
        let f = &set[0].formula;
        let budget = || Budget::new(3, Schedule::FrontLoaded);
        let ra = solve_with::<f64>(f, &SolverConfig::default(), &mut bc_policy(Arc::new(a)), budget());
        let rb = solve_with::<f64>(f, &SolverConfig::default(), &mut bc_policy(Arc::new(b)), budget());
        assert_eq!(ra.trail, rb.trail);
    }

    #[test]
    fn curriculum_rejects_unknown_bucket() {
        let cfg = BcConfig { curriculum: vec!["tiny".into()], ..BcConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
